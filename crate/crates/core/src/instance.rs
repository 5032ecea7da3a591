//! JSON problem instances for the `detect` subcommand.
//!
//! ```json
//! {
//!   "A": [[[re, im], ...N], ...K],
//!   "b": [[re, im], ...N],
//!   "z": [z1, ..., zN],
//!   "sigma2": 1.0,
//!   "order": 16,
//!   "s_true": [[re, im], ...K],
//!   "y": [[re, im], ...N]
//! }
//! ```
//! `sigma2`, `order`, `s_true` and `y` are optional. `y` is needed only by
//! the known-phase baseline.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CMatrix, CVector, EffectiveChannel, Observation};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(rename = "A")]
    pub a: Vec<Vec<[f64; 2]>>,
    pub b: Vec<[f64; 2]>,
    pub z: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_true: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<[f64; 2]>>,
}

fn to_vec(v: &[[f64; 2]]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|p| Complex64::new(p[0], p[1])))
}

fn from_vec(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

/// Parsed and dimension-checked instance.
#[derive(Debug, Clone)]
pub struct Problem {
    pub channel: EffectiveChannel,
    pub reference: CVector,
    pub z: Observation,
    pub sigma2: Option<f64>,
    pub order: Option<usize>,
    pub s_true: Option<CVector>,
    pub y: Option<CVector>,
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_scenario(sc: &Scenario, order: usize) -> Self {
        let a = sc.channel.matrix();
        Self {
            a: (0..a.nrows())
                .map(|k| a.row(k).iter().map(|c| [c.re, c.im]).collect())
                .collect(),
            b: from_vec(&sc.reference),
            z: sc.z.values().iter().copied().collect(),
            sigma2: Some(sc.sigma2),
            order: Some(order),
            s_true: Some(from_vec(&sc.s_true)),
            y: Some(from_vec(&sc.y_oracle)),
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        let k = self.a.len();
        let n = self.a.first().map_or(0, Vec::len);
        if k == 0 || self.a.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension("\"A\" must be a non-empty K x N array of [re, im] pairs".into()));
        }
        let mat = CMatrix::from_fn(k, n, |i, j| Complex64::new(self.a[i][j][0], self.a[i][j][1]));
        let channel = EffectiveChannel::new(mat)?;
        let check_len = |name: &str, len: usize, want: usize| {
            if len == want {
                Ok(())
            } else {
                Err(Error::Dimension(format!("\"{name}\" has length {len}, expected {want}")))
            }
        };
        check_len("b", self.b.len(), n)?;
        check_len("z", self.z.len(), n)?;
        if let Some(s) = &self.s_true {
            check_len("s_true", s.len(), k)?;
        }
        if let Some(y) = &self.y {
            check_len("y", y.len(), n)?;
        }
        Ok(Problem {
            channel,
            reference: to_vec(&self.b),
            z: Observation::from_vec(self.z.clone())?,
            sigma2: self.sigma2,
            order: self.order,
            s_true: self.s_true.as_deref().map(to_vec),
            y: self.y.as_deref().map(to_vec),
        })
    }
}
