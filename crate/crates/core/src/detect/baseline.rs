use num_complex::Complex64;

use super::{DetectionResult, DetectorConfig};
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::linalg::GramSolver;
use crate::model::{
    check_obs, ls_objective_from_field, ml_objective_from_field, CVector, EffectiveChannel, Observation,
};

/// Zero-forcing with the true complex field `y` known:
/// `s = (A A^H)^{-1} A (y - b)`.
pub fn zf_known_phase(
    y: &CVector,
    a: &EffectiveChannel,
    b: &CVector,
    c: &Constellation,
) -> Result<DetectionResult> {
    a.check(&CVector::zeros(a.users()), b)?;
    if y.len() != a.antennas() {
        return Err(Error::Dimension(format!(
            "field has length {}, channel has N={}",
            y.len(),
            a.antennas()
        )));
    }
    let solver = GramSolver::new(a)?;
    let s = solver.solve(&(a.matrix() * (y - b)));
    let residual = (y - a.matrix().ad_mul(&s) - b).norm_squared();
    Ok(DetectionResult::new(s, c, 0, vec![residual], true))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchCriterion {
    /// Minimise `||z - |A^H s + b|||^2`.
    LeastSquares,
    /// Maximise the Rician log-likelihood.
    MaximumLikelihood,
}

/// Brute force over all `|S|^K` candidates. Candidate `i` assigns user `k`
/// the point whose index is the `k`-th base-`|S|` digit of `i`, most
/// significant first; among equal objectives the lowest `i` wins.
pub fn exhaustive_search(
    z: &Observation,
    a: &EffectiveChannel,
    b: &CVector,
    sigma2: f64,
    c: &Constellation,
    criterion: SearchCriterion,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    check_obs(z, a)?;
    a.check(&CVector::zeros(a.users()), b)?;
    if criterion == SearchCriterion::MaximumLikelihood && !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("noise variance must be positive, got {sigma2}")));
    }
    let k = a.users();
    let n = a.antennas();
    let m = c.order();
    let required = (m as f64).powi(k as i32);
    if required > cfg.search_cap {
        return Err(Error::Budget {
            required,
            cap: cfg.search_cap,
        });
    }

    // contrib[(user * m + point) * n + antenna] = conj(a_{user, antenna}) * point
    let am = a.matrix();
    let mut contrib = vec![Complex64::new(0.0, 0.0); k * m * n];
    for user in 0..k {
        for p in 0..m {
            let pt = c.point(p);
            for ant in 0..n {
                contrib[(user * m + p) * n + ant] = am[(user, ant)].conj() * pt;
            }
        }
    }

    let total = required as usize;
    let mut digits = vec![0usize; k];
    let mut field = CVector::zeros(n);
    let mut best_obj = f64::NAN;
    let mut best_digits = digits.clone();
    for cand in 0..total {
        if cand > 0 {
            // odometer increment, least significant digit is the last user
            let mut pos = k;
            while pos > 0 {
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < m {
                    break;
                }
                digits[pos] = 0;
            }
        }
        field.copy_from(b);
        for (user, &d) in digits.iter().enumerate() {
            let base = (user * m + d) * n;
            for ant in 0..n {
                field[ant] += contrib[base + ant];
            }
        }
        let obj = match criterion {
            SearchCriterion::LeastSquares => -ls_objective_from_field(z.values(), &field),
            SearchCriterion::MaximumLikelihood => ml_objective_from_field(z.values(), &field, sigma2),
        };
        if cand == 0 || obj > best_obj {
            best_obj = obj;
            best_digits.copy_from_slice(&digits);
        }
    }

    let s = CVector::from_iterator(k, best_digits.iter().map(|&d| c.point(d)));
    let reported = match criterion {
        SearchCriterion::LeastSquares => -best_obj,
        SearchCriterion::MaximumLikelihood => best_obj,
    };
    Ok(DetectionResult::new(s, c, 0, vec![reported], true))
}
