use num_complex::Complex64;

use super::DetectorConfig;
use crate::error::{Error, Result};
use crate::model::{AugmentedChannel, CMatrix, CVector, Observation};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralInit {
    pub s0: CVector,
    pub converged: bool,
    pub power_iterations: usize,
    /// The weighted covariance was identically zero (all `z_n = 0`).
    pub degenerate: bool,
}

/// Spectral initial point from the principal eigenvector of
/// `M = sum_n z_n a_bar_n a_bar_n^H`.
pub fn spectral_init(z: &Observation, aug: &AugmentedChannel, cfg: &DetectorConfig) -> Result<SpectralInit> {
    let ab = aug.matrix();
    if z.len() != ab.ncols() {
        return Err(Error::Dimension(format!(
            "observation has length {}, augmented channel has {} columns",
            z.len(),
            ab.ncols()
        )));
    }
    let dim = ab.nrows();
    let users = dim - 1;

    // A_bar diag(z) A_bar^H
    let mut weighted = ab.clone();
    for (mut col, &zn) in weighted.column_iter_mut().zip(z.values().iter()) {
        col *= Complex64::new(zn, 0.0);
    }
    let m: CMatrix = weighted * ab.adjoint();
    let scale = m.norm();
    if scale == 0.0 {
        return Ok(SpectralInit {
            s0: CVector::zeros(users),
            converged: false,
            power_iterations: 0,
            degenerate: true,
        });
    }

    let (v, converged, iterations) = power_iteration(&m, scale, cfg);
    Ok(SpectralInit {
        s0: anchor_and_scale(z, aug, &v),
        converged,
        power_iterations: iterations,
        degenerate: false,
    })
}

/// Deterministic power iteration from the normalised all-ones vector.
/// Returns the iterate with the smallest residual `||M v - (v^H M v) v||`.
fn power_iteration(m: &CMatrix, scale: f64, cfg: &DetectorConfig) -> (CVector, bool, usize) {
    let dim = m.nrows();
    let mut v = CVector::from_element(dim, Complex64::new(1.0 / (dim as f64).sqrt(), 0.0));
    let mut best = (v.clone(), f64::INFINITY);
    for it in 1..=cfg.power_iter_max {
        let w = m * &v;
        let rayleigh = v.dotc(&w);
        let residual = (&w - &v * rayleigh).norm();
        if residual < best.1 {
            best = (v.clone(), residual);
        }
        if residual <= cfg.power_iter_tol * scale {
            return (v, true, it);
        }
        let norm = w.norm();
        if norm == 0.0 {
            // start vector in the null space
            return (best.0, false, it);
        }
        v = w / Complex64::new(norm, 0.0);
    }
    (best.0, false, cfg.power_iter_max)
}

/// Fits the magnitude `r = (|v^H A_bar| z) / ||A_bar^H v||^2`, then rotates
/// `r v` so its reference (last) entry has zero phase and drops that entry.
pub fn anchor_and_scale(z: &Observation, aug: &AugmentedChannel, v: &CVector) -> CVector {
    let ab = aug.matrix();
    let proj = ab.ad_mul(v);
    let denom = proj.norm_squared();
    let users = ab.nrows() - 1;
    if denom == 0.0 {
        return CVector::zeros(users);
    }
    let numer: f64 = proj.iter().zip(z.values().iter()).map(|(p, zn)| p.norm() * zn).sum();
    let r = numer / denom;
    let last = v[users];
    let anchor = if last.norm() > 0.0 {
        (last / last.norm()).conj()
    } else {
        Complex64::new(1.0, 0.0)
    };
    v.rows(0, users).map(|x| x * anchor * r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward, EffectiveChannel};
    use crate::scenario::{generate_trial, ScenarioConfig};
    use crate::selftest::random_scenario;

    #[test]
    fn zero_observation_is_degenerate() {
        let (sc, _) = random_scenario(1).unwrap();
        let z = Observation::from_vec(vec![0.0; sc.channel.antennas()]).unwrap();
        let aug = AugmentedChannel::new(&sc.channel, &sc.reference).unwrap();
        let init = spectral_init(&z, &aug, &DetectorConfig::default()).unwrap();
        assert!(init.degenerate && !init.converged);
        assert_eq!(init.s0, CVector::zeros(sc.channel.users()));
    }

    #[test]
    fn anchoring_removes_global_phase() {
        let (sc, _) = random_scenario(2).unwrap();
        let aug = AugmentedChannel::new(&sc.channel, &sc.reference).unwrap();
        let v = CVector::from_fn(sc.channel.users() + 1, |i, _| Complex64::new(1.0 + i as f64, 0.5 - i as f64));
        let base = anchor_and_scale(&sc.z, &aug, &v);
        for phi in [0.3, 1.7, -2.9] {
            let rotated = anchor_and_scale(&sc.z, &aug, &(&v * Complex64::from_polar(1.0, phi)));
            assert!((&rotated - &base).norm() < 1e-10 * (1.0 + base.norm()));
        }
    }

    #[test]
    fn scales_linearly_with_z() {
        let (sc, _) = random_scenario(4).unwrap();
        let aug = AugmentedChannel::new(&sc.channel, &sc.reference).unwrap();
        let cfg = DetectorConfig::default();
        let base = spectral_init(&sc.z, &aug, &cfg).unwrap();
        let alpha = 3.7;
        let z2 = Observation::new(sc.z.values() * alpha).unwrap();
        let scaled = spectral_init(&z2, &aug, &cfg).unwrap();
        assert!((&scaled.s0 - &base.s0 * Complex64::new(alpha, 0.0)).norm() < 1e-10 * (1.0 + scaled.s0.norm()));
    }

    #[test]
    fn power_iteration_finds_principal_vector() {
        let m = CMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                Complex64::new([5.0, 2.0, 1.0][i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let cfg = DetectorConfig::default();
        let (v, converged, _) = power_iteration(&m, m.norm(), &cfg);
        assert!(converged);
        assert!((v[0].norm() - 1.0).abs() < 1e-9);
        let capped = DetectorConfig {
            power_iter_max: 2,
            ..Default::default()
        };
        let (_, converged, its) = power_iteration(&m, m.norm(), &capped);
        assert!(!converged);
        assert_eq!(its, 2);
    }

    #[test]
    fn noiseless_single_user_correlation() {
        let cfg = DetectorConfig::default();
        let mut good = 0;
        for trial in 0..200 {
            let sc = generate_trial(&ScenarioConfig::new(64, 1, 16, 10.0, 12.0, 31), trial).unwrap();
            let w = CVector::zeros(64);
            let (z, _) = forward(&sc.channel, &sc.s_true, &sc.reference, &w).unwrap();
            let aug = AugmentedChannel::new(&sc.channel, &sc.reference).unwrap();
            let s0 = spectral_init(&z, &aug, &cfg).unwrap().s0;
            let corr = s0.dotc(&sc.s_true).norm() / (s0.norm() * sc.s_true.norm());
            if corr >= 0.9 {
                good += 1;
            }
        }
        assert!(good >= 180, "{good} of 200");
    }

    #[test]
    fn dimension_mismatch() {
        let a = EffectiveChannel::new(CMatrix::from_element(1, 3, Complex64::new(1.0, 0.0))).unwrap();
        let aug = AugmentedChannel::new(&a, &CVector::zeros(3)).unwrap();
        let z = Observation::from_vec(vec![1.0; 2]).unwrap();
        assert!(spectral_init(&z, &aug, &DetectorConfig::default()).is_err());
    }
}
