//! Symbol detectors for the biased phase-retrieval model.
//!
//! * [`spectral_init`]: weighted-covariance spectral initialisation on the
//!   augmented channel, with the reference entry used as a phase anchor.
//! * [`biased_gs`]: alternating minimisation of the LS criterion.
//! * [`em_gs`]: EM with the measurement phase as latent variable; the M-step
//!   is the same regression with magnitudes shrunk by `R(kappa)`.
//! * [`zf_known_phase`]: genie zero-forcing given the complex field.
//! * [`exhaustive_search`]: brute force over `S^K` under either criterion.

mod baseline;
mod gs;
mod spectral;

pub use baseline::{exhaustive_search, zf_known_phase, SearchCriterion};
pub use gs::{biased_gs, em_gs, em_gs_with_filter, RatioFilter};
pub use spectral::{anchor_and_scale, spectral_init, SpectralInit};

use std::fmt;
use std::str::FromStr;

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::model::{demap, CVector, SymbolVector};

/// Default cap on exhaustive-search candidates.
pub const DEFAULT_SEARCH_CAP: f64 = 1e7;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// Number of GS / EM iterations `t0`.
    pub t0: usize,
    pub power_iter_max: usize,
    pub power_iter_tol: f64,
    /// Stop early once `||s^t - s^{t-1}||_2` falls to or below this value.
    pub convergence_tol: Option<f64>,
    /// Largest `|S|^K` the exhaustive search will enumerate.
    pub search_cap: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            t0: 50,
            power_iter_max: 200,
            power_iter_tol: 1e-10,
            convergence_tol: None,
            search_cap: DEFAULT_SEARCH_CAP,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t0 == 0 {
            return Err(Error::Config("t0 must be at least 1".into()));
        }
        if self.power_iter_max == 0 {
            return Err(Error::Config("power_iter_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Unconstrained estimate before demapping.
    pub s_soft: CVector,
    pub s_hard: SymbolVector,
    pub indices: Vec<usize>,
    pub bits: Vec<u8>,
    pub iterations_run: usize,
    /// Objective after initialisation and after each iteration.
    pub objective_trace: Vec<f64>,
    /// `false` when the spectral initialiser hit its iteration cap or saw an
    /// all-zero observation.
    pub init_converged: bool,
}

impl DetectionResult {
    pub(crate) fn new(
        s_soft: CVector,
        c: &Constellation,
        iterations_run: usize,
        objective_trace: Vec<f64>,
        init_converged: bool,
    ) -> Self {
        let (s_hard, indices, bits) = demap(&s_soft, c);
        Self {
            s_soft,
            s_hard,
            indices,
            bits,
            iterations_run,
            objective_trace,
            init_converged,
        }
    }
}

/// Detector names used on the command line and in CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorKind {
    BiasedGs,
    EmGs,
    ZfKnown,
    ExhaustiveLs,
    ExhaustiveMl,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::BiasedGs,
        DetectorKind::EmGs,
        DetectorKind::ZfKnown,
        DetectorKind::ExhaustiveLs,
        DetectorKind::ExhaustiveMl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::BiasedGs => "biased-gs",
            DetectorKind::EmGs => "em-gs",
            DetectorKind::ZfKnown => "zf-known",
            DetectorKind::ExhaustiveLs => "exhaustive-ls",
            DetectorKind::ExhaustiveMl => "exhaustive-ml",
        }
    }

    pub fn is_iterative(self) -> bool {
        matches!(self, DetectorKind::BiasedGs | DetectorKind::EmGs)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown detector '{s}'")))
    }
}
