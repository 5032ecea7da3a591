//! Fisher information and Cramér–Rao bound for Rician magnitude
//! observations.
//!
//! For `z_n ~ Rice(|lambda_n|, sigma^2)` with `lambda_n = a_n^H s + b_n`,
//! the Fisher matrix is `I = sum_n beta_n a_n a_n^H` with
//! `beta_n = (E[z_n^2 R^2(kappa_n)] - |lambda_n|^2) / sigma^4`,
//! `kappa_n = 2 z_n |lambda_n| / sigma^2`.
//!
//! The expectation is evaluated by adaptive quadrature in the normalised
//! variable `t = z / sigma`. Using `E[t^2] = mu^2 + 1` (`mu = |lambda| / sigma`)
//! it is computed as `1 - E[t^2 (1 - R^2(2 t mu))]`, which avoids subtracting
//! two nearly equal numbers when `mu` is large.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_condition, GramSolver, MAX_CONDITION};
use crate::model::{CMatrix, CVector, EffectiveChannel, Observation};
use crate::quadrature::{integrate, QuadOptions};
use crate::special::{i0_scaled_unchecked, ratio_unchecked};

/// Relative tolerance of the `beta` quadrature.
pub const BETA_REL_TOL: f64 = 1e-8;

/// Upper integration limit in units of `sigma` above `|lambda|`.
pub const TAIL_SIGMAS: f64 = 12.0;

/// Normalised Rician density of `t = z / sigma` with `mu = |lambda| / sigma`:
/// `2 t exp(-(t - mu)^2) e^{-2 t mu} I0(2 t mu)`.
#[inline]
pub fn rician_density_normalized(t: f64, mu: f64) -> f64 {
    let d = t - mu;
    2.0 * t * (-d * d).exp() * i0_scaled_unchecked(2.0 * t * mu)
}

fn validate(lam_abs: f64, sigma2: f64) -> Result<()> {
    if !(lam_abs >= 0.0 && lam_abs.is_finite()) {
        return Err(Error::Domain(format!("|lambda| must be finite and >= 0, got {lam_abs}")));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("sigma2 must be positive and finite, got {sigma2}")));
    }
    Ok(())
}

/// `E[f(z)]` for `z ~ Rice(|lambda|, sigma^2)`, integrating over
/// `[0, |lambda| + 12 sigma]`. `f` receives `z`.
pub fn rician_expectation<F: Fn(f64) -> f64>(lam_abs: f64, sigma2: f64, f: F, opts: &QuadOptions) -> Result<f64> {
    validate(lam_abs, sigma2)?;
    let sigma = sigma2.sqrt();
    let mu = lam_abs / sigma;
    let hi = mu + TAIL_SIGMAS;
    let r = integrate(
        |t| rician_density_normalized(t, mu) * f(t * sigma),
        0.0,
        hi,
        &breakpoints(mu),
        opts,
    )?;
    Ok(r.value)
}

fn breakpoints(mu: f64) -> Vec<f64> {
    if mu > 3.0 {
        vec![mu - 3.0, mu, mu + 3.0]
    } else {
        vec![mu.max(0.5), 3.0 + mu]
    }
}

/// `beta(|lambda|, sigma^2)`, the per-antenna Fisher weight.
pub fn beta(lam_abs: f64, sigma2: f64) -> Result<f64> {
    validate(lam_abs, sigma2)?;
    if lam_abs == 0.0 {
        return Ok(0.0);
    }
    let mu = lam_abs / sigma2.sqrt();
    let opts = QuadOptions {
        rel_tol: BETA_REL_TOL,
        abs_tol: 1e-15,
        max_intervals: 500,
    };
    let deficit = integrate(
        |t| {
            let r = ratio_unchecked(2.0 * t * mu);
            rician_density_normalized(t, mu) * t * t * (1.0 - r) * (1.0 + r)
        },
        0.0,
        mu + TAIL_SIGMAS,
        &breakpoints(mu),
        &opts,
    )
    .map_err(|e| Error::Numerical(format!("beta quadrature at |lambda|/sigma = {mu}: {e}")))?;
    Ok(((1.0 - deficit.value) / sigma2).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub info: CMatrix,
    pub betas: DVector<f64>,
}

/// `I = sum_n beta(|lambda_n|, sigma^2) a_n a_n^H` at the true symbols.
pub fn fisher(a: &EffectiveChannel, s_true: &CVector, b: &CVector, sigma2: f64) -> Result<FisherMatrix> {
    let lam = a.field(s_true, b)?;
    let betas = lam
        .iter()
        .map(|l| beta(l.norm(), sigma2))
        .collect::<Result<Vec<f64>>>()?;
    let am = a.matrix();
    let k = a.users();
    let mut info = CMatrix::zeros(k, k);
    for (n, &bn) in betas.iter().enumerate() {
        let col = am.column(n);
        for p in 0..k {
            for q in 0..k {
                info[(p, q)] += col[p] * col[q].conj() * bn;
            }
        }
    }
    Ok(FisherMatrix {
        info,
        betas: DVector::from_vec(betas),
    })
}

impl FisherMatrix {
    /// `Tr(I^{-1}) / K`.
    pub fn normalized_crlb(&self) -> Result<f64> {
        let k = self.info.nrows();
        let cond = hermitian_condition(&self.info);
        if !(cond <= MAX_CONDITION) {
            return Err(Error::Singular {
                what: "Fisher information (bound is infinite)",
                condition: cond,
            });
        }
        let inv = GramSolver::from_hermitian(self.info.clone(), "Fisher information")?.inverse();
        Ok(inv.trace().re / k as f64)
    }
}

/// Normalised CRLB `Tr(I^{-1}) / K` for one channel realisation.
pub fn normalized_crlb(a: &EffectiveChannel, s_true: &CVector, b: &CVector, sigma2: f64) -> Result<f64> {
    fisher(a, s_true, b, sigma2)?.normalized_crlb()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    /// `d log p(z; s) / d s^*`.
    pub gradient: CVector,
    /// Antennas skipped because `|lambda_n| = 0` (derivative undefined).
    pub singular_terms: usize,
}

/// Wirtinger gradient of the log-likelihood,
/// `sum_n (1/sigma^2) (z_n R(kappa_n) / |lambda_n| - 1) lambda_n a_n`.
pub fn score(z: &Observation, a: &EffectiveChannel, s: &CVector, b: &CVector, sigma2: f64) -> Result<Score> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("sigma2 must be positive and finite, got {sigma2}")));
    }
    crate::model::check_obs(z, a)?;
    let lam = a.field(s, b)?;
    let am = a.matrix();
    let mut grad = CVector::zeros(a.users());
    let mut singular_terms = 0;
    for (n, l) in lam.iter().enumerate() {
        let m = l.norm();
        if m == 0.0 {
            singular_terms += 1;
            continue;
        }
        let zn = z.values()[n];
        let kappa = 2.0 * zn * m / sigma2;
        let coef = (zn * ratio_unchecked(kappa) / m - 1.0) / sigma2;
        let w = *l * coef;
        for k in 0..a.users() {
            grad[k] += am[(k, n)] * w;
        }
    }
    Ok(Score {
        gradient: grad,
        singular_terms,
    })
}

/// `sigma^2 Tr((A A^H)^{-1}) / K`, the NMSE of zero-forcing with known phase.
pub fn linear_model_nmse(a: &EffectiveChannel, sigma2: f64) -> Result<f64> {
    let inv = GramSolver::new(a)?.inverse();
    Ok(sigma2 * inv.trace().re / a.users() as f64)
}
