//! Invariant checks run by the `selftest` subcommand and the acceptance
//! tests.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constellation::Constellation;
use crate::crlb::{fisher, rician_expectation, score};
use crate::detect::{biased_gs, em_gs, em_gs_with_filter, DetectorConfig, DetectorKind, RatioFilter};
use crate::error::Result;
use crate::harness::{csv_string, run_sweep, Series, SweepAxis, SweepSpec};
use crate::linalg::hermitian_min_eigenvalue;
use crate::model::{forward, ml_objective, CVector};
use crate::quadrature::QuadOptions;
use crate::scenario::{generate_trial, noise_of, Scenario, ScenarioConfig};
use crate::special::{bessel_ratio, log_bessel_i0};

/// Relative per-step tolerance for the monotone-objective checks.
pub const MONOTONE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Random scenario number `index`: dimensions, modulation, SNR and RSR are
/// drawn from a generator seeded by `index`.
pub fn random_scenario(index: u64) -> Result<(Scenario, Constellation)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f_7e57 ^ index);
    let k = rng.random_range(1..=4usize);
    let n = k + rng.random_range(0..=24usize);
    let order = if rng.random_bool(0.5) { 4 } else { 16 };
    let snr = rng.random_range(-6.0..15.0);
    let rsr = rng.random_range(0.0..25.0);
    let cfg = ScenarioConfig::new(n, k, order, snr, rsr, index);
    Ok((generate_trial(&cfg, 0)?, Constellation::new(order)?))
}

/// First step that moves the wrong way by more than `MONOTONE_REL_TOL`
/// relative to the larger of the two values and `scale`. `scale` keeps
/// round-off from counting when the objective converges to zero.
fn monotone(trace: &[f64], increasing: bool, scale: f64) -> Option<(usize, f64, f64)> {
    trace.windows(2).enumerate().find_map(|(i, w)| {
        let slack = MONOTONE_REL_TOL * w[0].abs().max(w[1].abs()).max(scale);
        let bad = if increasing { w[1] < w[0] - slack } else { w[1] > w[0] + slack };
        bad.then_some((i, w[0], w[1]))
    })
}

/// Biased-GS LS traces are non-increasing and EM-GS log-likelihood traces
/// non-decreasing on `count` random instances.
pub fn objective_monotonicity(count: u64) -> Result<(bool, String)> {
    let cfg = DetectorConfig::default();
    for i in 0..count {
        let (sc, c) = random_scenario(i)?;
        // ||z||^2 sets the size of both objectives
        let energy = sc.z.values().norm_squared();
        let gs = biased_gs(&sc.z, &sc.channel, &sc.reference, &cfg, None, &c)?;
        if let Some((t, a, b)) = monotone(&gs.objective_trace, false, energy) {
            return Ok((false, format!("instance {i}: LS rose at step {t}: {a:e} -> {b:e}")));
        }
        let em = em_gs(&sc.z, &sc.channel, &sc.reference, sc.sigma2, &cfg, None, &c)?;
        if let Some((t, a, b)) = monotone(&em.objective_trace, true, energy / sc.sigma2) {
            return Ok((false, format!("instance {i}: log-likelihood fell at step {t}: {a:e} -> {b:e}")));
        }
    }
    Ok((true, format!("{count} instances, both detectors")))
}

pub fn density_normalization() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for &(lam, s2) in &[(0.0, 1.0), (1.0, 1.0), (3.0, 0.5), (0.2, 4.0), (25.0, 1.0)] {
        let mass = rician_expectation(lam, s2, |_| 1.0, &QuadOptions::default())?;
        worst = worst.max((mass - 1.0).abs());
    }
    Ok((worst < 1e-8, format!("max |mass - 1| = {worst:.2e}")))
}

pub fn first_moment_identity() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for &(lam, s2) in &[(0.5, 1.0), (1.0, 1.0), (4.0, 0.25), (0.05, 2.0), (12.0, 1.5)] {
        let v = rician_expectation(
            lam,
            s2,
            |z| z * bessel_ratio(2.0 * z * lam / s2).unwrap_or(f64::NAN),
            &QuadOptions::default(),
        )?;
        worst = worst.max((v - lam).abs());
    }
    Ok((worst < 1e-6, format!("max |E[zR] - |lambda|| = {worst:.2e}")))
}

/// Score sample mean within three standard errors of zero on every
/// component, at the true symbols of a fixed instance.
pub fn score_mean_zero(draws: usize) -> Result<(bool, String)> {
    let (sc, _) = random_scenario(7)?;
    let k = sc.channel.users();
    let n = sc.channel.antennas();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let sd = (0.5 * sc.sigma2).sqrt();
    let mut sum = CVector::zeros(k);
    let mut sq = vec![0.0; k];
    for _ in 0..draws {
        let w = CVector::from_fn(n, |_, _| {
            Complex64::new(
                sd * rng.sample::<f64, _>(rand_distr::StandardNormal),
                sd * rng.sample::<f64, _>(rand_distr::StandardNormal),
            )
        });
        let (z, _) = forward(&sc.channel, &sc.s_true, &sc.reference, &w)?;
        let g = score(&z, &sc.channel, &sc.s_true, &sc.reference, sc.sigma2)?.gradient;
        sum += &g;
        for (acc, v) in sq.iter_mut().zip(g.iter()) {
            *acc += v.norm_sqr();
        }
    }
    let d = draws as f64;
    let mut worst = 0.0f64;
    for i in 0..k {
        let mean = sum[i] / d;
        let se = (sq[i] / d / d).sqrt();
        worst = worst.max(mean.norm() / se);
    }
    Ok((worst < 3.0, format!("max |mean| / SE = {worst:.2} over {draws} draws")))
}

/// Score against central differences of the log-likelihood,
/// `d/ds* = (d/dx + i d/dy) / 2`.
pub fn score_finite_differences() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for idx in 0..20 {
        let (sc, _) = random_scenario(1000 + idx)?;
        // evaluate away from the truth so the gradient is not tiny
        let s = sc.s_true.map(|v| v * Complex64::new(0.9, 0.1));
        let g = score(&sc.z, &sc.channel, &s, &sc.reference, sc.sigma2)?.gradient;
        let h = 1e-6;
        for k in 0..s.len() {
            let f = |d: Complex64| -> Result<f64> {
                let mut sp = s.clone();
                sp[k] += d;
                ml_objective(&sc.z, &sc.channel, &sp, &sc.reference, sc.sigma2)
            };
            let dx = (f(Complex64::new(h, 0.0))? - f(Complex64::new(-h, 0.0))?) / (2.0 * h);
            let dy = (f(Complex64::new(0.0, h))? - f(Complex64::new(0.0, -h))?) / (2.0 * h);
            let fd = Complex64::new(0.5 * dx, 0.5 * dy);
            worst = worst.max((fd - g[k]).norm() / g[k].norm().max(1.0));
        }
    }
    Ok((worst < 1e-5, format!("max relative deviation {worst:.2e}")))
}

pub fn ratio_properties() -> Result<(bool, String)> {
    let mut prev = -1.0;
    for i in 0..=20_000 {
        let x = i as f64 * 0.01;
        let r = bessel_ratio(x)?;
        if !(0.0..1.0).contains(&r) || r < prev {
            return Ok((false, format!("R({x}) = {r} violates bounds or monotonicity")));
        }
        prev = r;
    }
    let mut worst = 0.0f64;
    for &x in &[0.1f64, 0.5, 1.0, 3.0, 7.0, 19.9, 20.1, 50.0, 300.0] {
        let h = 1e-5 * x.max(1.0);
        let d = (log_bessel_i0(x + h)? - log_bessel_i0(x - h)?) / (2.0 * h);
        worst = worst.max((d - bessel_ratio(x)?).abs());
    }
    Ok((worst < 1e-7, format!("bounds and monotone on [0, 200]; max |d log I0 - R| = {worst:.2e}")))
}

pub fn fisher_hermitian_psd() -> Result<(bool, String)> {
    for idx in 0..50 {
        let (sc, _) = random_scenario(2000 + idx)?;
        let f = fisher(&sc.channel, &sc.s_true, &sc.reference, sc.sigma2)?;
        let scale = f.info.norm();
        let asym = (&f.info - f.info.adjoint()).norm();
        let min_eig = hermitian_min_eigenvalue(&f.info);
        if asym > 1e-12 * scale || min_eig < -1e-12 * scale {
            return Ok((false, format!("instance {idx}: asymmetry {asym:e}, min eigenvalue {min_eig:e}")));
        }
    }
    Ok((true, "50 instances".into()))
}

/// EM-GS with `R = 1` reproduces biased GS bit for bit.
pub fn unity_filter_matches_gs() -> Result<(bool, String)> {
    let cfg = DetectorConfig::default();
    for idx in 0..100 {
        let (sc, c) = random_scenario(3000 + idx)?;
        let gs = biased_gs(&sc.z, &sc.channel, &sc.reference, &cfg, None, &c)?;
        let em = em_gs_with_filter(&sc.z, &sc.channel, &sc.reference, sc.sigma2, &cfg, None, &c, RatioFilter::Unity)?;
        let same = gs
            .s_soft
            .iter()
            .zip(em.s_soft.iter())
            .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
        if !same {
            return Ok((false, format!("instance {idx} differs")));
        }
    }
    Ok((true, "100 instances identical".into()))
}

/// The sweep used by the reproducibility check.
pub fn golden_sweep() -> SweepSpec {
    let mut series: Vec<Series> = DetectorKind::ALL.iter().copied().map(Series::Detector).collect();
    series.push(Series::Crlb);
    SweepSpec::new(
        SweepAxis::SnrDb,
        vec![0.0, 6.0],
        ScenarioConfig::new(12, 2, 4, 0.0, 12.0, 2024),
        series,
        48,
    )
}

pub fn thread_reproducibility() -> Result<(bool, String)> {
    let mut one = golden_sweep();
    one.threads = Some(1);
    let mut eight = golden_sweep();
    eight.threads = Some(8);
    let a = csv_string(&run_sweep(&one)?);
    let b = csv_string(&run_sweep(&eight)?);
    Ok((a == b, format!("{} CSV bytes, 1 vs 8 threads", a.len())))
}

/// Noise realisation of a scenario is recoverable from `y - A^H s - b`.
fn noise_consistency() -> Result<(bool, String)> {
    let (sc, _) = random_scenario(5)?;
    let w = noise_of(&sc)?;
    let (z, _) = forward(&sc.channel, &sc.s_true, &sc.reference, &w)?;
    let dev = (z.values() - sc.z.values()).amax();
    Ok((dev < 1e-9, format!("max |z - z'| = {dev:.1e}")))
}

/// Runs every check. `monotone_instances` is 1000 for the full suite.
pub fn run_all(monotone_instances: u64) -> Vec<Check> {
    vec![
        check("objective-monotonicity", objective_monotonicity(monotone_instances)),
        check("rician-normalization", density_normalization()),
        check("first-moment-identity", first_moment_identity()),
        check("score-mean-zero", score_mean_zero(20_000)),
        check("score-finite-differences", score_finite_differences()),
        check("bessel-ratio", ratio_properties()),
        check("fisher-hermitian-psd", fisher_hermitian_psd()),
        check("unity-filter-equals-gs", unity_filter_matches_gs()),
        check("thread-reproducibility", thread_reproducibility()),
        check("forward-model-consistency", noise_consistency()),
    ]
}
