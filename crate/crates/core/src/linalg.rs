//! Small dense Hermitian helpers.

use nalgebra::{Cholesky, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CMatrix, CVector, EffectiveChannel};

/// Largest condition number accepted before a Hermitian system is declared singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Condition number of a Hermitian positive semi-definite matrix, from its
/// eigenvalues. Returns infinity when the smallest eigenvalue is not positive.
pub fn hermitian_condition(m: &CMatrix) -> f64 {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eigenvalue(m: &CMatrix) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Cholesky factor of the Gram matrix `A A^H`, computed once per detection
/// and reused for every least-squares update `s = (A A^H)^{-1} A t`.
#[derive(Debug, Clone)]
pub struct GramSolver {
    chol: Cholesky<Complex64, Dyn>,
    condition: f64,
}

impl GramSolver {
    pub fn new(a: &EffectiveChannel) -> Result<Self> {
        let m = a.matrix();
        let gram = m * m.adjoint();
        Self::from_hermitian(gram, "A A^H")
    }

    pub(crate) fn from_hermitian(m: CMatrix, what: &'static str) -> Result<Self> {
        let condition = hermitian_condition(&m);
        if !(condition <= MAX_CONDITION) {
            return Err(Error::Singular { what, condition });
        }
        let chol = Cholesky::new(m).ok_or(Error::Singular { what, condition })?;
        Ok(Self { chol, condition })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `G^{-1} rhs`.
    pub fn solve(&self, rhs: &CVector) -> CVector {
        self.chol.solve(rhs)
    }

    /// `G^{-1}`.
    pub fn inverse(&self) -> CMatrix {
        self.chol.inverse()
    }
}
