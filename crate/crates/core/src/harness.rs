//! Monte Carlo sweeps: scenario generation, detector runs, NMSE/BER
//! aggregation and CSV output.
//!
//! Every detector at a sweep point sees the same scenario for a given trial
//! index, and trial `t` uses the same random streams at every sweep point.
//! Per-trial results are collected in trial order and reduced with a fixed
//! pairwise tree, so output does not depend on the thread count.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::crlb::normalized_crlb;
use crate::detect::{
    biased_gs, em_gs, exhaustive_search, zf_known_phase, DetectionResult, DetectorConfig, DetectorKind,
    SearchCriterion,
};
use crate::error::{Error, Result};
use crate::scenario::{generate_trial, Scenario, ScenarioConfig};

pub const CSV_HEADER: &str =
    "detector,snr_db,rsr_db,n,k,mod,trials,nmse,nmse_db,ber,ber_ci95,mean_iterations,wall_ms,seed";

/// Rows with fewer bit errors than this are flagged low-confidence.
pub const LOW_CONFIDENCE_ERRORS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    RsrDb,
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "snr" | "snr_db" | "snr-db" => Ok(SweepAxis::SnrDb),
            "rsr" | "rsr_db" | "rsr-db" => Ok(SweepAxis::RsrDb),
            other => Err(Error::Config(format!("unknown sweep axis {other:?} (expected snr or rsr)"))),
        }
    }
}

/// A column of results: a detector, or the CRLB benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Detector(DetectorKind),
    Crlb,
}

impl Series {
    pub fn name(self) -> &'static str {
        match self {
            Series::Detector(d) => d.name(),
            Series::Crlb => "crlb",
        }
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Series {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("crlb") {
            Ok(Series::Crlb)
        } else {
            s.parse().map(Series::Detector)
        }
    }
}

/// Parses `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let num = |t: &str| -> Result<f64> {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("not a number: {t:?}")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(step > 0.0) || !(stop >= start) {
                return Err(Error::Config(format!("bad range {text:?}: need step > 0 and stop >= start")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 100_000 {
                return Err(Error::Config(format!("range {text:?} has {count} points")));
            }
            (0..count).map(|i| start + i as f64 * step).collect()
        }
        [_] => text.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(Error::Parse(format!("expected start:step:stop or a list, got {text:?}"))),
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("values must be finite and non-empty: {text:?}")));
    }
    Ok(values)
}

/// Adaptive BER stopping: batches of `SweepSpec::trials` are added until a
/// series has `min_errors` bit errors or `max_trials` trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveBer {
    pub min_errors: u64,
    pub max_trials: u64,
}

impl Default for AdaptiveBer {
    fn default() -> Self {
        Self {
            min_errors: 200,
            max_trials: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Base scenario; the swept field is overwritten per point.
    pub base: ScenarioConfig,
    pub series: Vec<Series>,
    pub trials: u64,
    pub detector: DetectorConfig,
    pub adaptive: Option<AdaptiveBer>,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Fill `wall_ms`. Off by default so repeated runs are byte-identical.
    pub timing: bool,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, values: Vec<f64>, base: ScenarioConfig, series: Vec<Series>, trials: u64) -> Self {
        Self {
            axis,
            values,
            base,
            series,
            trials,
            detector: DetectorConfig::default(),
            adaptive: None,
            threads: None,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.series.is_empty() {
            return Err(Error::Config("no detectors requested".into()));
        }
        if let Some(ad) = self.adaptive {
            if ad.max_trials < self.trials {
                return Err(Error::Config("adaptive max_trials is below the batch size".into()));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        self.detector.validate()?;
        for v in &self.values {
            self.point(*v).validate()?;
        }
        let exhaustive = self.series.iter().any(|s| {
            matches!(
                s,
                Series::Detector(DetectorKind::ExhaustiveLs | DetectorKind::ExhaustiveMl)
            )
        });
        if exhaustive {
            let required = (self.base.order as f64).powi(self.base.users as i32);
            if required > self.detector.search_cap {
                return Err(Error::Budget {
                    required,
                    cap: self.detector.search_cap,
                });
            }
        }
        Ok(())
    }

    fn point(&self, value: f64) -> ScenarioConfig {
        let mut cfg = self.base.clone();
        match self.axis {
            SweepAxis::SnrDb => cfg.snr_db = value,
            SweepAxis::RsrDb => cfg.rsr_db = value,
        }
        cfg
    }

    /// Series in output order (sorted by name, duplicates removed).
    fn ordered_series(&self) -> Vec<Series> {
        let mut s = self.series.clone();
        s.sort_by_key(|x| x.name());
        s.dedup();
        s
    }
}

/// Outcome of one series on one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrialOutcome {
    Detected {
        sq_error: f64,
        bit_errors: u64,
        bits: u64,
        iterations: usize,
        nanos: u64,
    },
    Bound {
        value: f64,
        nanos: u64,
    },
    Failed,
}

fn hamming(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

fn run_detector(kind: DetectorKind, sc: &Scenario, c: &Constellation, cfg: &DetectorConfig) -> Result<DetectionResult> {
    let (z, a, b) = (&sc.z, &sc.channel, &sc.reference);
    match kind {
        DetectorKind::BiasedGs => biased_gs(z, a, b, cfg, None, c),
        DetectorKind::EmGs => em_gs(z, a, b, sc.sigma2, cfg, None, c),
        DetectorKind::ZfKnown => zf_known_phase(&sc.y_oracle, a, b, c),
        DetectorKind::ExhaustiveLs => exhaustive_search(z, a, b, sc.sigma2, c, SearchCriterion::LeastSquares, cfg),
        DetectorKind::ExhaustiveMl => {
            exhaustive_search(z, a, b, sc.sigma2, c, SearchCriterion::MaximumLikelihood, cfg)
        }
    }
}

/// Runs every series on one scenario. Detector errors become
/// [`TrialOutcome::Failed`].
pub fn evaluate(sc: &Scenario, c: &Constellation, series: &[Series], cfg: &DetectorConfig) -> Vec<TrialOutcome> {
    let mut true_bits = Vec::with_capacity(sc.symbol_indices.len() * c.bits_per_symbol());
    for &i in &sc.symbol_indices {
        c.push_bits(i, &mut true_bits);
    }
    series
        .iter()
        .map(|s| {
            let start = Instant::now();
            match *s {
                Series::Detector(kind) => match run_detector(kind, sc, c, cfg) {
                    Ok(r) => TrialOutcome::Detected {
                        sq_error: (&r.s_soft - &sc.s_true).norm_squared(),
                        bit_errors: hamming(&r.bits, &true_bits),
                        bits: true_bits.len() as u64,
                        iterations: r.iterations_run,
                        nanos: start.elapsed().as_nanos() as u64,
                    },
                    Err(_) => TrialOutcome::Failed,
                },
                Series::Crlb => match normalized_crlb(&sc.channel, &sc.s_true, &sc.reference, sc.sigma2) {
                    Ok(value) => TrialOutcome::Bound {
                        value,
                        nanos: start.elapsed().as_nanos() as u64,
                    },
                    Err(_) => TrialOutcome::Failed,
                },
            }
        })
        .collect()
}

/// Generates trial `trial` of `cfg` and evaluates `series` on it.
pub fn run_trial(cfg: &ScenarioConfig, series: &[Series], det: &DetectorConfig, trial: u64) -> Result<Vec<TrialOutcome>> {
    let c = Constellation::new(cfg.order)?;
    let sc = generate_trial(cfg, trial)?;
    Ok(evaluate(&sc, &c, series, det))
}

/// Sum in a fixed pairwise tree over the slice order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n if n <= 8 => v.iter().sum(),
        n => {
            let mid = n / 2;
            pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub series: Series,
    pub snr_db: f64,
    pub rsr_db: f64,
    pub antennas: usize,
    pub users: usize,
    pub modulation: String,
    /// Trials attempted for this series.
    pub trials: u64,
    /// Trials whose detector returned an error; excluded from the metrics.
    pub failures: u64,
    pub nmse: Option<f64>,
    pub ber: Option<f64>,
    pub ber_ci95: Option<f64>,
    pub bit_errors: u64,
    pub mean_iterations: Option<f64>,
    pub wall_ms: Option<f64>,
    pub seed: u64,
}

impl SweepRow {
    pub fn nmse_db(&self) -> Option<f64> {
        self.nmse.map(|v| 10.0 * v.log10())
    }

    pub fn low_confidence(&self) -> bool {
        self.ber.is_some() && self.bit_errors < LOW_CONFIDENCE_ERRORS
    }

    pub fn to_csv(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| format!("{x}")).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.series.name(),
            self.snr_db,
            self.rsr_db,
            self.antennas,
            self.users,
            self.modulation,
            self.trials,
            opt(self.nmse),
            opt(self.nmse_db()),
            opt(self.ber),
            opt(self.ber_ci95),
            opt(self.mean_iterations),
            opt(self.wall_ms),
            self.seed
        )
    }
}

/// Half-width of the normal-approximation 95% interval, `1.96 sqrt(p(1-p)/n)`.
pub fn ber_ci95(errors: u64, bits: u64) -> f64 {
    if bits == 0 {
        return 0.0;
    }
    let p = errors as f64 / bits as f64;
    1.96 * (p * (1.0 - p) / bits as f64).sqrt()
}

#[derive(Default, Clone)]
struct Tally {
    trials: u64,
    failures: u64,
    sq_errors: Vec<f64>,
    bounds: Vec<f64>,
    bit_errors: u64,
    bits: u64,
    iterations: u64,
    nanos: u64,
}

impl Tally {
    fn add(&mut self, o: &TrialOutcome) {
        self.trials += 1;
        match *o {
            TrialOutcome::Detected {
                sq_error,
                bit_errors,
                bits,
                iterations,
                nanos,
            } => {
                self.sq_errors.push(sq_error);
                self.bit_errors += bit_errors;
                self.bits += bits;
                self.iterations += iterations as u64;
                self.nanos += nanos;
            }
            TrialOutcome::Bound { value, nanos } => {
                self.bounds.push(value);
                self.nanos += nanos;
            }
            TrialOutcome::Failed => self.failures += 1,
        }
    }

    fn done(&self, ad: &AdaptiveBer) -> bool {
        self.bit_errors >= ad.min_errors || self.trials >= ad.max_trials
    }
}

fn run_batch(
    cfg: &ScenarioConfig,
    c: &Constellation,
    series: &[Series],
    det: &DetectorConfig,
    range: std::ops::Range<u64>,
) -> Result<Vec<Vec<TrialOutcome>>> {
    range
        .into_par_iter()
        .map(|t| {
            let sc = generate_trial(cfg, t)?;
            Ok(evaluate(&sc, c, series, det))
        })
        .collect()
}

fn sweep_point(spec: &SweepSpec, value: f64, series: &[Series]) -> Result<Vec<SweepRow>> {
    let cfg = spec.point(value);
    let c = Constellation::new(cfg.order)?;
    let mut tallies = vec![Tally::default(); series.len()];

    let first = run_batch(&cfg, &c, series, &spec.detector, 0..spec.trials)?;
    for outcomes in &first {
        for (t, o) in tallies.iter_mut().zip(outcomes) {
            t.add(o);
        }
    }
    if let Some(ad) = spec.adaptive {
        let mut next = spec.trials;
        loop {
            // the CRLB carries no BER and never needs more trials
            let active: Vec<usize> = (0..series.len())
                .filter(|&i| series[i] != Series::Crlb && !tallies[i].done(&ad))
                .collect();
            if active.is_empty() {
                break;
            }
            let end = next.saturating_add(spec.trials).min(ad.max_trials);
            let subset: Vec<Series> = active.iter().map(|&i| series[i]).collect();
            let batch = run_batch(&cfg, &c, &subset, &spec.detector, next..end)?;
            for outcomes in &batch {
                for (&i, o) in active.iter().zip(outcomes) {
                    tallies[i].add(o);
                }
            }
            next = end;
        }
    }

    Ok(series
        .iter()
        .zip(tallies)
        .map(|(&s, t)| {
            let ok = (t.trials - t.failures) as f64;
            let (nmse, ber, ci, iters) = match s {
                Series::Crlb => ((ok > 0.0).then(|| pairwise_sum(&t.bounds) / ok), None, None, None),
                Series::Detector(kind) => {
                    let nmse = (ok > 0.0).then(|| pairwise_sum(&t.sq_errors) / (ok * cfg.users as f64));
                    let ber = (t.bits > 0).then(|| t.bit_errors as f64 / t.bits as f64);
                    let ci = (t.bits > 0).then(|| ber_ci95(t.bit_errors, t.bits));
                    let iters = (kind.is_iterative() && ok > 0.0).then(|| t.iterations as f64 / ok);
                    (nmse, ber, ci, iters)
                }
            };
            SweepRow {
                series: s,
                snr_db: cfg.snr_db,
                rsr_db: cfg.rsr_db,
                antennas: cfg.antennas,
                users: cfg.users,
                modulation: c.name(),
                trials: t.trials,
                failures: t.failures,
                nmse,
                ber,
                ber_ci95: ci,
                bit_errors: t.bit_errors,
                mean_iterations: iters,
                wall_ms: spec.timing.then(|| t.nanos as f64 / 1e6),
                seed: cfg.seed,
            }
        })
        .collect())
}

/// Runs the sweep. Rows are ordered by axis value, then series name.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let series = spec.ordered_series();
    let body = || -> Result<Vec<SweepRow>> {
        let mut rows = Vec::new();
        for &v in &spec.values {
            rows.extend(sweep_point(spec, v, &series)?);
        }
        Ok(rows)
    };
    match spec.threads {
        None => body(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
            .install(body),
    }
}

pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_csv())?;
    }
    Ok(())
}

pub fn csv_string(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is ASCII")
}
