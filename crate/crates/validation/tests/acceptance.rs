//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the binary exits non-zero when any selected criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use atomic_mimo::detect::DetectorKind;
use atomic_mimo::harness::{run_sweep, AdaptiveBer, Series, SweepAxis, SweepRow, SweepSpec};
use atomic_mimo::scenario::ScenarioConfig;
use atomic_mimo::selftest;

const EM: Series = Series::Detector(DetectorKind::EmGs);
const GS: Series = Series::Detector(DetectorKind::BiasedGs);
const ZF: Series = Series::Detector(DetectorKind::ZfKnown);
const ML: Series = Series::Detector(DetectorKind::ExhaustiveMl);
const LS: Series = Series::Detector(DetectorKind::ExhaustiveLs);

const TARGET_BER: f64 = 1e-2;

struct Outcome {
    passed: bool,
    detail: String,
}

fn config_a(order: usize, snr_db: f64, seed: u64) -> ScenarioConfig {
    ScenarioConfig::new(36, 3, order, snr_db, 12.0, seed)
}

fn sweep(axis: SweepAxis, values: Vec<f64>, base: ScenarioConfig, series: Vec<Series>, trials: u64) -> Vec<SweepRow> {
    run_sweep(&SweepSpec::new(axis, values, base, series, trials)).expect("sweep")
}

fn adaptive(axis: SweepAxis, values: Vec<f64>, base: ScenarioConfig, series: Vec<Series>, batch: u64) -> Vec<SweepRow> {
    let mut spec = SweepSpec::new(axis, values, base, series, batch);
    spec.adaptive = Some(AdaptiveBer::default());
    run_sweep(&spec).expect("adaptive sweep")
}

fn pick(rows: &[SweepRow], s: Series, x: f64, axis: SweepAxis) -> &SweepRow {
    rows.iter()
        .find(|r| r.series == s && (if axis == SweepAxis::SnrDb { r.snr_db } else { r.rsr_db }) == x)
        .expect("row present")
}

fn nmse_db(r: &SweepRow) -> f64 {
    r.nmse_db().expect("nmse")
}

fn ber(r: &SweepRow) -> f64 {
    r.ber.expect("ber")
}

fn enough_errors(rows: &[&SweepRow]) -> bool {
    rows.iter().all(|r| r.bit_errors >= AdaptiveBer::default().min_errors)
}

fn c1() -> Outcome {
    let rows = sweep(SweepAxis::SnrDb, vec![-4.0], config_a(16, -4.0, 101), vec![GS, EM], 20_000);
    let gap = nmse_db(&rows[0]) - nmse_db(&rows[1]);
    Outcome {
        passed: (1.0..=3.0).contains(&gap),
        detail: format!("NMSE_dB(biased-gs) - NMSE_dB(em-gs) = {gap:.3} dB, want [1.0, 3.0]"),
    }
}

/// One sweep feeds criteria 2 and 3.
fn em_zf_crlb_sweep() -> Vec<SweepRow> {
    sweep(SweepAxis::SnrDb, vec![3.0, 6.0, 9.0, 12.0], config_a(16, 3.0, 202), vec![EM, ZF, Series::Crlb], 20_000)
}

fn c2(rows: &[SweepRow]) -> Outcome {
    let zf = nmse_db(pick(rows, ZF, 12.0, SweepAxis::SnrDb));
    let bound = nmse_db(pick(rows, Series::Crlb, 12.0, SweepAxis::SnrDb));
    let gap = zf - bound;
    Outcome {
        passed: (2.3..=3.7).contains(&gap),
        detail: format!(
            "NMSE_dB(zf-known) - CRLB_dB = {gap:.3} dB at 12 dB, want [2.3, 3.7] (|gap| = {:.3} dB)",
            gap.abs()
        ),
    }
}

fn c3(rows: &[SweepRow]) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    for snr in [3.0, 6.0, 9.0, 12.0] {
        let gap = nmse_db(pick(rows, EM, snr, SweepAxis::SnrDb)) - nmse_db(pick(rows, Series::Crlb, snr, SweepAxis::SnrDb));
        worst = worst.max(gap);
        parts.push(format!("{snr}:{gap:.2}"));
    }
    Outcome {
        passed: worst <= 1.5,
        detail: format!("NMSE_dB(em-gs) - CRLB_dB per SNR [{}], max {worst:.3} dB, want <= 1.5", parts.join(" ")),
    }
}

fn c4() -> Outcome {
    let rsr: Vec<f64> = (0..=5).map(|i| 5.0 * i as f64).collect();
    let base = config_a(16, 3.0, 404);
    let zf_rows = sweep(SweepAxis::RsrDb, rsr.clone(), base.clone(), vec![ZF], 20_000);
    let em_rows = sweep(SweepAxis::RsrDb, vec![0.0, 25.0], base, vec![EM], 20_000);
    let drop = nmse_db(pick(&em_rows, EM, 0.0, SweepAxis::RsrDb)) - nmse_db(pick(&em_rows, EM, 25.0, SweepAxis::RsrDb));
    let zf: Vec<f64> = zf_rows.iter().map(nmse_db).collect();
    let spread = zf.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - zf.iter().cloned().fold(f64::INFINITY, f64::min);
    Outcome {
        passed: drop >= 3.0 && spread <= 0.5,
        detail: format!("em-gs drop RSR 0->25 = {drop:.3} dB (want >= 3); zf-known spread = {spread:.3} dB (want <= 0.5)"),
    }
}

fn c5() -> Outcome {
    let rows = adaptive(SweepAxis::SnrDb, vec![6.0], config_a(4, 6.0, 505), vec![EM, GS, ML, LS], 2_000);
    let (em, gs, ml, ls) = (pick(&rows, EM, 6.0, SweepAxis::SnrDb), pick(&rows, GS, 6.0, SweepAxis::SnrDb), pick(&rows, ML, 6.0, SweepAxis::SnrDb), pick(&rows, LS, 6.0, SweepAxis::SnrDb));
    let r_em = ber(em) / ber(ml);
    let r_gs = ber(gs) / ber(ls);
    Outcome {
        passed: enough_errors(&[em, gs, ml, ls]) && r_em <= 2.0 && r_gs <= 3.0,
        detail: format!(
            "BER em-gs {:.3e} / exhaustive-ml {:.3e} = {r_em:.2} (want <= 2); biased-gs {:.3e} / exhaustive-ls {:.3e} = {r_gs:.2} (want <= 3); errors {}/{}/{}/{}",
            ber(em), ber(ml), ber(gs), ber(ls), em.bit_errors, ml.bit_errors, gs.bit_errors, ls.bit_errors
        ),
    }
}

fn c6() -> Outcome {
    let rows = adaptive(SweepAxis::RsrDb, vec![0.0, 20.0], config_a(4, 3.0, 606), vec![EM], 2_000);
    let (lo, hi) = (pick(&rows, EM, 0.0, SweepAxis::RsrDb), pick(&rows, EM, 20.0, SweepAxis::RsrDb));
    let ratio = ber(lo) / ber(hi);
    Outcome {
        passed: enough_errors(&[lo, hi]) && ratio >= 5.0,
        detail: format!(
            "BER em-gs RSR 0 {:.3e} ({} errors) / RSR 20 {:.3e} ({} errors) = {ratio:.2}, want >= 5",
            ber(lo), lo.bit_errors, ber(hi), hi.bit_errors
        ),
    }
}

/// SNR on the 1 dB grid where `series` first drops below the target BER,
/// refined by linear interpolation of log10(BER) between the bracketing
/// grid points. Every grid point runs until 200 bit errors.
fn crossing(series: Series, start: f64) -> Option<(f64, u64)> {
    let base = ScenarioConfig::new(100, 6, 16, start, 12.0, 707);
    let point = |snr: f64| {
        let r = &adaptive(SweepAxis::SnrDb, vec![snr], base.clone(), vec![series], 500)[0];
        (ber(r), r.bit_errors)
    };
    let mut snr = start.round();
    let (mut b, mut errs) = point(snr);
    let step = if b < TARGET_BER { -1.0 } else { 1.0 };
    let mut min_errs = errs;
    for _ in 0..40 {
        let next = snr + step;
        let (nb, ne) = point(next);
        min_errs = min_errs.min(ne);
        if (nb < TARGET_BER) != (b < TARGET_BER) {
            let (x0, y0, x1, y1) = if step > 0.0 { (snr, b, next, nb) } else { (next, nb, snr, b) };
            let (l0, l1, lt) = (y0.log10(), y1.log10(), TARGET_BER.log10());
            return Some((x0 + (x1 - x0) * (lt - l0) / (l1 - l0), min_errs.min(errs)));
        }
        snr = next;
        b = nb;
        errs = ne;
    }
    None
}

fn c7() -> Outcome {
    let Some((zf, zf_err)) = crossing(ZF, 2.0) else {
        return Outcome { passed: false, detail: "zf-known never crossed BER 1e-2".into() };
    };
    let Some((em, em_err)) = crossing(EM, zf.floor() + 4.0) else {
        return Outcome { passed: false, detail: "em-gs never crossed BER 1e-2".into() };
    };
    let gap = em - zf;
    Outcome {
        passed: (2.5..=5.0).contains(&gap) && zf_err.min(em_err) >= AdaptiveBer::default().min_errors,
        detail: format!("BER 1e-2 at zf-known {zf:.2} dB, em-gs {em:.2} dB, gap {gap:.3} dB (want [2.5, 5.0]); min errors/point {}", zf_err.min(em_err)),
    }
}

fn c8() -> Outcome {
    let checks = selftest::run_all(1000);
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.to_string()).collect();
    Outcome {
        passed: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} selftest checks passed", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    }
}

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));

    let mut results: Vec<(&str, Outcome, f64)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        if wanted(name) {
            let t = Instant::now();
            let o = f();
            let secs = t.elapsed().as_secs_f64();
            println!("[{}] {name}: {} ({secs:.1} s)", if o.passed { "PASS" } else { "FAIL" }, o.detail);
            results.push((name, o, secs));
        }
    };

    run("c1_em_gs_nmse_gain", &mut c1);
    let mut shared: Option<Vec<SweepRow>> = None;
    let mut rows = || shared.get_or_insert_with(em_zf_crlb_sweep).clone();
    run("c2_zf_vs_crlb_high_snr", &mut || c2(&rows()));
    run("c3_em_gs_near_crlb", &mut || c3(&rows()));
    run("c4_rsr_nmse", &mut c4);
    run("c5_exhaustive_search_ber", &mut c5);
    run("c6_rsr_ber", &mut c6);
    run("c7_large_config_snr_gap", &mut c7);
    run("c8_selftest", &mut c8);

    let failed = results.iter().filter(|r| !r.1.passed).count();
    println!("acceptance: {} criteria, {} passed, {} failed", results.len(), results.len() - failed, failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
