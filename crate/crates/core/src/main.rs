use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use atomic_mimo::constellation::Constellation;
use atomic_mimo::detect::{
    biased_gs, em_gs, exhaustive_search, zf_known_phase, DetectionResult, DetectorConfig, DetectorKind,
    SearchCriterion,
};
use atomic_mimo::harness::{parse_values, run_sweep, write_csv, AdaptiveBer, Series, SweepAxis, SweepRow, SweepSpec};
use atomic_mimo::instance::Instance;
use atomic_mimo::scenario::{generate_trial, ChannelMode, ScenarioConfig};
use atomic_mimo::{selftest, Error, Result};

#[derive(Parser)]
#[command(name = "atomic-mimo", version, about = "Symbol detection for magnitude-only MIMO receivers with a reference field")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep over SNR or RSR, written as CSV.
    Sweep(SweepArgs),
    /// Normalised CRLB averaged over channel draws, written as CSV.
    Crlb(CrlbArgs),
    /// Run one detector on a JSON instance.
    Detect(DetectArgs),
    /// Write a random JSON instance.
    Instance(InstanceArgs),
    /// Run the invariant checks.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long = "snr-db", default_value_t = 6.0, allow_negative_numbers = true)]
    snr_db: f64,
    #[arg(long = "rsr-db", default_value_t = 12.0, allow_negative_numbers = true)]
    rsr_db: f64,
    #[arg(long = "n", default_value_t = 36)]
    antennas: usize,
    #[arg(long = "k", default_value_t = 3)]
    users: usize,
    #[arg(long = "mod", default_value = "16qam")]
    modulation: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// normalized | physical
    #[arg(long, default_value = "normalized")]
    mode: String,
}

impl ScenarioArgs {
    fn config(&self) -> Result<ScenarioConfig> {
        let c = Constellation::parse(&self.modulation)?;
        let mut cfg = ScenarioConfig::new(self.antennas, self.users, c.order(), self.snr_db, self.rsr_db, self.seed);
        cfg.mode = self.mode.parse::<ChannelMode>()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SweepArgs {
    /// snr | rsr
    #[arg(long)]
    axis: String,
    /// start:step:stop or a comma list
    #[arg(long, allow_hyphen_values = true)]
    values: String,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Comma list of biased-gs, em-gs, zf-known, exhaustive-ls, exhaustive-ml, crlb
    #[arg(long, default_value = "biased-gs,em-gs,zf-known,crlb")]
    detectors: String,
    #[arg(long, default_value_t = 20_000)]
    trials: u64,
    #[arg(long, default_value_t = 50)]
    t0: usize,
    /// Keep adding batches of --trials until 200 bit errors or 1e6 trials.
    #[arg(long)]
    adaptive_ber: bool,
    #[arg(long)]
    threads: Option<usize>,
    /// Record per-row detector time in wall_ms.
    #[arg(long)]
    timing: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CrlbArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 2_000)]
    trials: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "em-gs")]
    detector: String,
    /// Overrides the instance's noise variance.
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long, default_value_t = 50)]
    t0: usize,
    /// Overrides the instance's modulation (default 16qam).
    #[arg(long = "mod")]
    modulation: Option<String>,
}

#[derive(Args)]
struct InstanceArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Instances for the monotone-objective check.
    #[arg(long, default_value_t = 1000)]
    instances: u64,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn warn_rows(rows: &[SweepRow]) {
    for r in rows {
        if r.failures > 0 {
            eprintln!(
                "warning: {} at snr {} rsr {}: {} of {} trials failed",
                r.series, r.snr_db, r.rsr_db, r.failures, r.trials
            );
        }
        if r.low_confidence() {
            eprintln!(
                "warning: {} at snr {} rsr {}: only {} bit errors, BER is low-confidence",
                r.series, r.snr_db, r.rsr_db, r.bit_errors
            );
        }
    }
}

fn parse_series(list: &str) -> Result<Vec<Series>> {
    list.split(',').map(|s| s.trim().parse()).collect()
}

fn sweep(args: SweepArgs) -> Result<()> {
    let axis: SweepAxis = args.axis.parse()?;
    let mut spec = SweepSpec::new(
        axis,
        parse_values(&args.values)?,
        args.scenario.config()?,
        parse_series(&args.detectors)?,
        args.trials,
    );
    spec.detector.t0 = args.t0;
    spec.adaptive = args.adaptive_ber.then(AdaptiveBer::default);
    spec.threads = args.threads;
    spec.timing = args.timing;
    let rows = run_sweep(&spec)?;
    warn_rows(&rows);
    let mut out = output(&args.out)?;
    write_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn crlb(args: CrlbArgs) -> Result<()> {
    let cfg = args.scenario.config()?;
    let mut spec = SweepSpec::new(SweepAxis::SnrDb, vec![cfg.snr_db], cfg, vec![Series::Crlb], args.trials);
    spec.threads = args.threads;
    let rows = run_sweep(&spec)?;
    warn_rows(&rows);
    let mut out = output(&args.out)?;
    write_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DetectOutput {
    detector: String,
    s_soft: Vec<[f64; 2]>,
    s_hard: Vec<[f64; 2]>,
    indices: Vec<usize>,
    bits: String,
    iterations: usize,
    init_converged: bool,
    objective_trace: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    squared_error: Option<f64>,
}

fn detect(args: DetectArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)?;
    let p = Instance::from_json(&text)?.problem()?;
    let kind: DetectorKind = args.detector.parse()?;
    let c = match (&args.modulation, p.order) {
        (Some(m), _) => Constellation::parse(m)?,
        (None, Some(o)) => Constellation::new(o)?,
        (None, None) => Constellation::new(16)?,
    };
    let sigma2 = args.sigma2.or(p.sigma2);
    let need_sigma = || sigma2.ok_or_else(|| Error::Config(format!("{kind} needs --sigma2 or \"sigma2\" in the instance")));
    let cfg = DetectorConfig {
        t0: args.t0,
        ..Default::default()
    };
    let (z, a, b) = (&p.z, &p.channel, &p.reference);
    let r: DetectionResult = match kind {
        DetectorKind::BiasedGs => biased_gs(z, a, b, &cfg, None, &c)?,
        DetectorKind::EmGs => em_gs(z, a, b, need_sigma()?, &cfg, None, &c)?,
        DetectorKind::ZfKnown => {
            let y = p
                .y
                .as_ref()
                .ok_or_else(|| Error::Config("zf-known needs the complex field \"y\" in the instance".into()))?;
            zf_known_phase(y, a, b, &c)?
        }
        DetectorKind::ExhaustiveLs => {
            exhaustive_search(z, a, b, sigma2.unwrap_or(1.0), &c, SearchCriterion::LeastSquares, &cfg)?
        }
        DetectorKind::ExhaustiveMl => {
            exhaustive_search(z, a, b, need_sigma()?, &c, SearchCriterion::MaximumLikelihood, &cfg)?
        }
    };
    let pairs = |v: &atomic_mimo::model::CVector| v.iter().map(|x| [x.re, x.im]).collect::<Vec<_>>();
    let out = DetectOutput {
        detector: kind.to_string(),
        s_soft: pairs(&r.s_soft),
        s_hard: pairs(&r.s_hard),
        indices: r.indices.clone(),
        bits: r.bits.iter().map(|b| char::from(b'0' + b)).collect(),
        iterations: r.iterations_run,
        init_converged: r.init_converged,
        objective_trace: r.objective_trace.clone(),
        squared_error: p.s_true.as_ref().map(|s| (&r.s_soft - s).norm_squared()),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn instance(args: InstanceArgs) -> Result<()> {
    let cfg = args.scenario.config()?;
    let sc = generate_trial(&cfg, args.trial)?;
    let json = Instance::from_scenario(&sc, cfg.order).to_json()?;
    let mut out = output(&args.out)?;
    writeln!(out, "{json}")?;
    out.flush()?;
    Ok(())
}

fn run_selftest(args: SelftestArgs) -> Result<bool> {
    let checks = selftest::run_all(args.instances);
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {} failed", checks.len(), failed);
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Crlb(a) => crlb(a).map(|_| true),
        Command::Detect(a) => detect(a).map(|_| true),
        Command::Instance(a) => instance(a).map(|_| true),
        Command::Selftest(a) => run_selftest(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
