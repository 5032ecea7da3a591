//! The biased phase-retrieval observation model `z = |A^H s + b + w|`,
//! its Rician likelihood and the two detection criteria.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::special;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Transmitted (or estimated) multi-user symbol vector, length K.
pub type SymbolVector = CVector;

/// Known reference field `b` at the N antennas.
pub type ReferenceVector = CVector;

/// Effective MIMO channel `A` (K x N, column `n` is `a_n`).
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel(CMatrix);

impl EffectiveChannel {
    pub fn new(a: CMatrix) -> Result<Self> {
        if a.nrows() == 0 {
            return Err(Error::Dimension("channel must have at least one user".into()));
        }
        if a.ncols() < a.nrows() {
            return Err(Error::Dimension(format!(
                "need N >= K antennas, got K={} N={}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Domain("channel has non-finite entries".into()));
        }
        Ok(Self(a))
    }

    pub fn users(&self) -> usize {
        self.0.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    /// `A^H s + b`, the noiseless complex field at each antenna.
    pub fn field(&self, s: &CVector, b: &CVector) -> Result<CVector> {
        self.check(s, b)?;
        Ok(self.0.ad_mul(s) + b)
    }

    pub(crate) fn check(&self, s: &CVector, b: &CVector) -> Result<()> {
        if s.len() != self.users() {
            return Err(Error::Dimension(format!(
                "symbol vector has length {}, channel has K={}",
                s.len(),
                self.users()
            )));
        }
        if b.len() != self.antennas() {
            return Err(Error::Dimension(format!(
                "reference vector has length {}, channel has N={}",
                b.len(),
                self.antennas()
            )));
        }
        Ok(())
    }
}

/// Measured magnitudes `z`, one per antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(DVector<f64>);

impl Observation {
    pub fn new(z: DVector<f64>) -> Result<Self> {
        if let Some(v) = z.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!("observation entries must be finite and >= 0, got {v}")));
        }
        Ok(Self(z))
    }

    pub fn from_vec(z: Vec<f64>) -> Result<Self> {
        Self::new(DVector::from_vec(z))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }
}

/// `A_bar = [A; b^H]`, so that `A_bar^H [s; 1] = A^H s + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedChannel(CMatrix);

impl AugmentedChannel {
    pub fn new(a: &EffectiveChannel, b: &CVector) -> Result<Self> {
        if b.len() != a.antennas() {
            return Err(Error::Dimension(format!(
                "reference vector has length {}, channel has N={}",
                b.len(),
                a.antennas()
            )));
        }
        let k = a.users();
        let n = a.antennas();
        let m = CMatrix::from_fn(k + 1, n, |r, c| {
            if r < k {
                a.matrix()[(r, c)]
            } else {
                b[c].conj()
            }
        });
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }
}

/// Forward model: returns `(z, y)` with `y = A^H s + b + w` and `z = |y|`.
pub fn forward(
    a: &EffectiveChannel,
    s: &CVector,
    b: &CVector,
    w: &CVector,
) -> Result<(Observation, CVector)> {
    if w.len() != a.antennas() {
        return Err(Error::Dimension(format!(
            "noise vector has length {}, channel has N={}",
            w.len(),
            a.antennas()
        )));
    }
    let y = a.field(s, b)? + w;
    let z = y.map(|v| v.norm());
    Ok((Observation(z), y))
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && !sigma2.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain(format!("noise variance must be positive, got {sigma2}")))
    }
}

/// Log-density of a Rician magnitude `z` with noncentrality `|lambda|` and
/// total complex noise variance `sigma2`. Returns `-inf` at `z = 0`.
pub fn rician_logpdf(z: f64, lam_abs: f64, sigma2: f64) -> Result<f64> {
    if !(z >= 0.0 && z.is_finite()) || !(lam_abs >= 0.0 && lam_abs.is_finite()) {
        return Err(Error::Domain(format!(
            "Rician arguments must be nonnegative and finite, got z={z}, |lambda|={lam_abs}"
        )));
    }
    check_sigma2(sigma2)?;
    if z == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let kappa = 2.0 * z * lam_abs / sigma2;
    Ok((2.0 * z / sigma2).ln() - (z * z + lam_abs * lam_abs) / sigma2
        + special::log_i0_unchecked(kappa))
}

/// Log-likelihood of `s` up to the `s`-independent term `sum ln(2 z_n / sigma2)`.
pub fn ml_objective(
    z: &Observation,
    a: &EffectiveChannel,
    s: &CVector,
    b: &CVector,
    sigma2: f64,
) -> Result<f64> {
    check_sigma2(sigma2)?;
    check_obs(z, a)?;
    let lam = a.field(s, b)?;
    Ok(ml_objective_from_field(z.values(), &lam, sigma2))
}

pub(crate) fn ml_objective_from_field(z: &DVector<f64>, lam: &CVector, sigma2: f64) -> f64 {
    z.iter()
        .zip(lam.iter())
        .map(|(&zn, l)| {
            let m = l.norm();
            -m * m / sigma2 + special::log_i0_unchecked(2.0 * zn * m / sigma2)
        })
        .sum()
}

/// `|| z - |A^H s + b| ||^2`.
pub fn ls_objective(z: &Observation, a: &EffectiveChannel, s: &CVector, b: &CVector) -> Result<f64> {
    check_obs(z, a)?;
    let lam = a.field(s, b)?;
    Ok(ls_objective_from_field(z.values(), &lam))
}

pub(crate) fn ls_objective_from_field(z: &DVector<f64>, lam: &CVector) -> f64 {
    z.iter()
        .zip(lam.iter())
        .map(|(&zn, l)| {
            let d = zn - l.norm();
            d * d
        })
        .sum()
}

pub(crate) fn check_obs(z: &Observation, a: &EffectiveChannel) -> Result<()> {
    if z.len() != a.antennas() {
        return Err(Error::Dimension(format!(
            "observation has length {}, channel has N={}",
            z.len(),
            a.antennas()
        )));
    }
    Ok(())
}

/// Projects each entry onto the nearest constellation point. Returns the hard
/// symbols, their point indices and the concatenated Gray labels.
pub fn demap(s_soft: &CVector, c: &Constellation) -> (SymbolVector, Vec<usize>, Vec<u8>) {
    let indices: Vec<usize> = s_soft.iter().map(|&v| c.nearest(v)).collect();
    let hard = CVector::from_iterator(indices.len(), indices.iter().map(|&i| c.point(i)));
    let mut bits = Vec::with_capacity(indices.len() * c.bits_per_symbol());
    for &i in &indices {
        c.push_bits(i, &mut bits);
    }
    (hard, indices, bits)
}
