use num_complex::Complex64;

use super::{spectral_init, DetectionResult, DetectorConfig};
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::linalg::GramSolver;
use crate::model::{
    check_obs, ls_objective_from_field, ml_objective_from_field, AugmentedChannel, CVector,
    EffectiveChannel, Observation,
};
use crate::special::{ratio_unchecked, BesselRatioTable};

/// Shrinkage applied to each magnitude in the M-step.
#[derive(Debug, Clone, Copy)]
pub enum RatioFilter<'t> {
    /// `R(kappa)` evaluated exactly.
    Exact,
    /// `R(kappa)` from a lookup table.
    Table(&'t BesselRatioTable),
    /// `R = 1`: reduces the EM update to the biased-GS update.
    Unity,
}

impl RatioFilter<'_> {
    #[inline]
    fn apply(&self, kappa: f64) -> f64 {
        match self {
            RatioFilter::Exact => ratio_unchecked(kappa),
            RatioFilter::Table(t) => t.eval(kappa),
            RatioFilter::Unity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Objective {
    LeastSquares,
    LogLikelihood { sigma2: f64 },
}

impl Objective {
    fn eval(&self, z: &Observation, field: &CVector) -> f64 {
        match *self {
            Objective::LeastSquares => ls_objective_from_field(z.values(), field),
            Objective::LogLikelihood { sigma2 } => ml_objective_from_field(z.values(), field, sigma2),
        }
    }
}

fn unit_phase(v: Complex64) -> Complex64 {
    let m = v.norm();
    if m > 0.0 {
        v / m
    } else {
        Complex64::new(1.0, 0.0)
    }
}

struct Iterated {
    s: CVector,
    trace: Vec<f64>,
    iterations: usize,
}

/// Shared fixed-point loop:
/// `theta = angle(A^H s + b)`, `s <- (A A^H)^{-1} A (z . w . e^{i theta} - b)`
/// with `w = 1` (biased GS) or `w = R(2 z |A^H s + b| / sigma2)` (EM-GS).
fn iterate(
    z: &Observation,
    a: &EffectiveChannel,
    b: &CVector,
    s0: CVector,
    cfg: &DetectorConfig,
    shrink: Option<(RatioFilter<'_>, f64)>,
    objective: Objective,
) -> Result<Iterated> {
    let solver = GramSolver::new(a)?;
    let am = a.matrix();
    let mut s = s0;
    let mut field = am.ad_mul(&s) + b;
    let mut trace = Vec::with_capacity(cfg.t0 + 1);
    trace.push(objective.eval(z, &field));
    let mut target = CVector::zeros(b.len());
    let mut iterations = 0;

    for _ in 0..cfg.t0 {
        for (n, (t, lam)) in target.iter_mut().zip(field.iter()).enumerate() {
            let zn = z.values()[n];
            let weight = match shrink {
                None => 1.0,
                Some((filter, sigma2)) => filter.apply(2.0 * zn * lam.norm() / sigma2),
            };
            let amp = zn * weight;
            *t = unit_phase(*lam) * amp - b[n];
        }
        let next = solver.solve(&(am * &target));
        iterations += 1;
        let step = (&next - &s).norm();
        s = next;
        field = am.ad_mul(&s) + b;
        trace.push(objective.eval(z, &field));
        if let Some(tol) = cfg.convergence_tol {
            if step <= tol {
                break;
            }
        }
    }
    Ok(Iterated { s, trace, iterations })
}

fn initial_point(
    z: &Observation,
    a: &EffectiveChannel,
    b: &CVector,
    cfg: &DetectorConfig,
    s0: Option<&CVector>,
) -> Result<(CVector, bool)> {
    match s0 {
        Some(s) => {
            if s.len() != a.users() {
                return Err(Error::Dimension(format!(
                    "initial point has length {}, channel has K={}",
                    s.len(),
                    a.users()
                )));
            }
            Ok((s.clone(), true))
        }
        None => {
            let init = spectral_init(z, &AugmentedChannel::new(a, b)?, cfg)?;
            Ok((init.s0, init.converged))
        }
    }
}

/// Biased Gerchberg-Saxton detector. With `s0 = None` the spectral
/// initialiser supplies the starting point. The trace records the LS
/// objective `||z - |A^H s + b|||^2`.
pub fn biased_gs(
    z: &Observation,
    a: &EffectiveChannel,
    b: &CVector,
    cfg: &DetectorConfig,
    s0: Option<&CVector>,
    c: &Constellation,
) -> Result<DetectionResult> {
    cfg.validate()?;
    check_obs(z, a)?;
    a.check(&CVector::zeros(a.users()), b)?;
    let (start, converged) = initial_point(z, a, b, cfg, s0)?;
    let out = iterate(z, a, b, start, cfg, None, Objective::LeastSquares)?;
    Ok(DetectionResult::new(out.s, c, out.iterations, out.trace, converged))
}

/// EM-GS detector with the exact Bessel-ratio filter. The trace records the
/// log-likelihood (up to an `s`-independent constant).
pub fn em_gs(
    z: &Observation,
    a: &EffectiveChannel,
    b: &CVector,
    sigma2: f64,
    cfg: &DetectorConfig,
    s0: Option<&CVector>,
    c: &Constellation,
) -> Result<DetectionResult> {
    em_gs_with_filter(z, a, b, sigma2, cfg, s0, c, RatioFilter::Exact)
}

#[allow(clippy::too_many_arguments)]
pub fn em_gs_with_filter(
    z: &Observation,
    a: &EffectiveChannel,
    b: &CVector,
    sigma2: f64,
    cfg: &DetectorConfig,
    s0: Option<&CVector>,
    c: &Constellation,
    filter: RatioFilter<'_>,
) -> Result<DetectionResult> {
    cfg.validate()?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("noise variance must be positive, got {sigma2}")));
    }
    check_obs(z, a)?;
    a.check(&CVector::zeros(a.users()), b)?;
    let (start, converged) = initial_point(z, a, b, cfg, s0)?;
    let out = iterate(
        z,
        a,
        b,
        start,
        cfg,
        Some((filter, sigma2)),
        Objective::LogLikelihood { sigma2 },
    )?;
    Ok(DetectionResult::new(out.s, c, out.iterations, out.trace, converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward, CMatrix};
    use crate::selftest::random_scenario;
    use crate::special::bessel_ratio;

    fn scalar(a: f64, b: f64) -> (EffectiveChannel, CVector) {
        (
            EffectiveChannel::new(CMatrix::from_element(1, 1, Complex64::new(a, 0.0))).unwrap(),
            CVector::from_element(1, Complex64::new(b, 0.0)),
        )
    }

    fn qam4() -> Constellation {
        Constellation::new(4).unwrap()
    }

    #[test]
    fn scalar_gs_converges_to_one() {
        let (a, b) = scalar(1.0, 10.0);
        let z = Observation::from_vec(vec![11.0]).unwrap();
        let s0 = CVector::from_element(1, Complex64::new(0.5, 0.0));
        let cfg = DetectorConfig { t0: 5, ..Default::default() };
        let r = biased_gs(&z, &a, &b, &cfg, Some(&s0), &qam4()).unwrap();
        assert!((r.s_soft[0] - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        assert_eq!(r.objective_trace.len(), r.iterations_run + 1);
        assert!(r.objective_trace[5] < 1e-20);
    }

    #[test]
    fn scalar_em_step() {
        let (a, b) = scalar(1.0, 0.0);
        let z = Observation::from_vec(vec![2.0]).unwrap();
        let s0 = CVector::from_element(1, Complex64::new(1.0, 0.0));
        let cfg = DetectorConfig { t0: 1, ..Default::default() };
        let r = em_gs(&z, &a, &b, 1.0, &cfg, Some(&s0), &qam4()).unwrap();
        let want = 2.0 * bessel_ratio(4.0).unwrap();
        assert!((r.s_soft[0].re - want).abs() < 1e-12);
        assert!((r.s_soft[0].re - 1.727045).abs() < 1e-6);
        assert_eq!(r.s_soft[0].im, 0.0);
    }

    #[test]
    fn truth_is_a_fixed_point_without_noise() {
        for idx in 0..20 {
            let (sc, c) = random_scenario(400 + idx).unwrap();
            let w = CVector::zeros(sc.channel.antennas());
            let (z, _) = forward(&sc.channel, &sc.s_true, &sc.reference, &w).unwrap();
            let r = biased_gs(&z, &sc.channel, &sc.reference, &DetectorConfig::default(), Some(&sc.s_true), &c).unwrap();
            assert!((&r.s_soft - &sc.s_true).norm() < 1e-10 * (1.0 + sc.s_true.norm()));
            assert!(r.objective_trace.iter().all(|&v| v < 1e-18 * z.values().norm_squared()));
        }
    }

    #[test]
    fn em_reduces_to_gs_at_vanishing_noise() {
        let (sc, c) = random_scenario(17).unwrap();
        let cfg = DetectorConfig { t0: 1, ..Default::default() };
        let s0 = sc.s_true.map(|v| v * Complex64::new(0.8, 0.3));
        let gs = biased_gs(&sc.z, &sc.channel, &sc.reference, &cfg, Some(&s0), &c).unwrap();
        // kappa = 2 z |lambda| / sigma2 is far above 1e8 for every antenna
        let em = em_gs(&sc.z, &sc.channel, &sc.reference, 1e-12, &cfg, Some(&s0), &c).unwrap();
        let rel = (&em.s_soft - &gs.s_soft).norm() / gs.s_soft.norm();
        assert!(rel < 1e-6, "{rel}");
    }

    #[test]
    fn unity_filter_is_bitwise_gs() {
        let (sc, c) = random_scenario(3).unwrap();
        let cfg = DetectorConfig::default();
        let gs = biased_gs(&sc.z, &sc.channel, &sc.reference, &cfg, None, &c).unwrap();
        let em = em_gs_with_filter(&sc.z, &sc.channel, &sc.reference, sc.sigma2, &cfg, None, &c, RatioFilter::Unity)
            .unwrap();
        assert_eq!(gs.s_soft, em.s_soft);
    }

    #[test]
    fn table_filter_tracks_exact() {
        let table = BesselRatioTable::default();
        let (sc, c) = random_scenario(8).unwrap();
        let cfg = DetectorConfig::default();
        let exact = em_gs(&sc.z, &sc.channel, &sc.reference, sc.sigma2, &cfg, None, &c).unwrap();
        let approx =
            em_gs_with_filter(&sc.z, &sc.channel, &sc.reference, sc.sigma2, &cfg, None, &c, RatioFilter::Table(&table))
                .unwrap();
        assert!((&exact.s_soft - &approx.s_soft).norm() < 1e-3 * (1.0 + exact.s_soft.norm()));
    }

    #[test]
    fn early_stop_and_validation() {
        let (sc, c) = random_scenario(12).unwrap();
        let cfg = DetectorConfig {
            t0: 1000,
            convergence_tol: Some(1e-9),
            ..Default::default()
        };
        let r = biased_gs(&sc.z, &sc.channel, &sc.reference, &cfg, None, &c).unwrap();
        assert!(r.iterations_run < 1000);
        assert_eq!(r.objective_trace.len(), r.iterations_run + 1);

        let bad = DetectorConfig { t0: 0, ..Default::default() };
        assert!(biased_gs(&sc.z, &sc.channel, &sc.reference, &bad, None, &c).is_err());
        assert!(em_gs(&sc.z, &sc.channel, &sc.reference, 0.0, &DetectorConfig::default(), None, &c).is_err());
        let wrong = CVector::zeros(sc.channel.users() + 1);
        assert!(matches!(
            biased_gs(&sc.z, &sc.channel, &sc.reference, &DetectorConfig::default(), Some(&wrong), &c),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn zero_observation_gives_least_squares_point() {
        let (sc, c) = random_scenario(21).unwrap();
        let z = Observation::from_vec(vec![0.0; sc.channel.antennas()]).unwrap();
        let cfg = DetectorConfig { t0: 1, ..Default::default() };
        let r = biased_gs(&z, &sc.channel, &sc.reference, &cfg, None, &c).unwrap();
        assert!(!r.init_converged);
        let solver = GramSolver::new(&sc.channel).unwrap();
        let want = -solver.solve(&(sc.channel.matrix() * &sc.reference));
        assert!((&r.s_soft - &want).norm() < 1e-10 * (1.0 + want.norm()));
    }

    #[test]
    fn singular_channel_is_reported() {
        let a = EffectiveChannel::new(CMatrix::from_element(2, 3, Complex64::new(1.0, 0.0))).unwrap();
        let b = CVector::from_element(3, Complex64::new(1.0, 0.0));
        let z = Observation::from_vec(vec![1.0; 3]).unwrap();
        let err = biased_gs(&z, &a, &b, &DetectorConfig::default(), None, &qam4()).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }
}
