//! Modified Bessel functions of the first kind, orders 0 and 1.
//!
//! Everything is computed in exponentially scaled form, `e^{-x} I_nu(x)`,
//! so that the ratio `R(x) = I1(x) / I0(x)` and `ln I0(x)` stay finite for
//! arguments far beyond the point where `I0` itself overflows (about 713).
//!
//! Below [`SERIES_CUTOFF`] the ascending power series is summed directly; all
//! of its terms are positive, so there is no cancellation. Above the cutoff
//! the Hankel asymptotic expansion is used; at `x = 20` its smallest term is
//! already below `1e-17`.

use crate::error::{Error, Result};

/// Crossover between the power series and the asymptotic expansion.
pub const SERIES_CUTOFF: f64 = 20.0;

/// Inputs in `[-NEGATIVE_SLACK, 0)` are treated as zero.
const NEGATIVE_SLACK: f64 = 1e-15;

fn check_arg(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("Bessel argument must be finite, got {x}")));
    }
    if x < 0.0 {
        if x >= -NEGATIVE_SLACK {
            return Ok(0.0);
        }
        return Err(Error::Domain(format!("Bessel argument must be nonnegative, got {x}")));
    }
    Ok(x)
}

/// `(I0(x), I1(x))` by the ascending series. Only sensible for moderate `x`.
fn series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let mut t0 = 1.0;
    let mut t1 = 0.5 * x;
    let mut s0 = t0;
    let mut s1 = t1;
    let mut m = 1.0;
    loop {
        t0 *= q / (m * m);
        t1 *= q / (m * (m + 1.0));
        s0 += t0;
        s1 += t1;
        if t0 <= s0 * 1e-17 && t1 <= s1 * 1e-17 {
            break;
        }
        m += 1.0;
    }
    (s0, s1)
}

/// Hankel expansion of `e^{-x} I_nu(x) * sqrt(2 pi x)` for `nu` in {0, 1}.
fn asymptotic_sum(x: f64, nu: u32) -> f64 {
    let mu = 4.0 * f64::from(nu * nu);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while k < 60.0 {
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (k * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
        k += 1.0;
    }
    sum
}

fn scaled_pair(x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (1.0, 0.0);
    }
    if x <= SERIES_CUTOFF {
        let (i0, i1) = series(x);
        let e = (-x).exp();
        (i0 * e, i1 * e)
    } else {
        let pre = 1.0 / (2.0 * std::f64::consts::PI * x).sqrt();
        (pre * asymptotic_sum(x, 0), pre * asymptotic_sum(x, 1))
    }
}

/// `e^{-x} I0(x)`, in `(0, 1]`.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    Ok(scaled_pair(check_arg(x)?).0)
}

/// `e^{-x} I1(x)`, in `[0, 1)`.
pub fn bessel_i1_scaled(x: f64) -> Result<f64> {
    Ok(scaled_pair(check_arg(x)?).1)
}

/// The Bessel-ratio filter `R(x) = I1(x) / I0(x)`.
pub fn bessel_ratio(x: f64) -> Result<f64> {
    Ok(ratio_unchecked(check_arg(x)?))
}

/// `ln I0(x)`, finite for any finite nonnegative `x`.
pub fn log_bessel_i0(x: f64) -> Result<f64> {
    let x = check_arg(x)?;
    Ok(log_i0_unchecked(x))
}

/// `R(x)` without argument validation. `x` must be finite and nonnegative.
#[inline]
pub(crate) fn ratio_unchecked(x: f64) -> f64 {
    let (i0, i1) = scaled_pair(x.max(0.0));
    i1 / i0
}

#[inline]
pub(crate) fn log_i0_unchecked(x: f64) -> f64 {
    let x = x.max(0.0);
    x + scaled_pair(x).0.ln()
}

/// `e^{-x} I0(x)` without validation.
#[inline]
pub(crate) fn i0_scaled_unchecked(x: f64) -> f64 {
    scaled_pair(x.max(0.0)).0
}

/// Tabulated `R(x)`: uniform samples with linear interpolation on
/// `[0, x_max]`, and a four-term asymptotic tail beyond.
#[derive(Debug, Clone)]
pub struct BesselRatioTable {
    step: f64,
    x_max: f64,
    samples: Vec<f64>,
}

impl BesselRatioTable {
    pub fn new(x_max: f64, step: f64) -> Result<Self> {
        if !(x_max > 0.0 && step > 0.0 && step < x_max && x_max.is_finite()) {
            return Err(Error::Config(format!(
                "invalid ratio table range x_max={x_max}, step={step}"
            )));
        }
        let len = (x_max / step).ceil() as usize + 1;
        let samples = (0..len).map(|i| ratio_unchecked(i as f64 * step)).collect();
        Ok(Self {
            step,
            x_max: (len - 1) as f64 * step,
            samples,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        if x >= self.x_max {
            let inv = 1.0 / x;
            return 1.0 - inv * (0.5 + inv * (0.125 + inv * (0.125 + inv * 25.0 / 128.0)));
        }
        let pos = x / self.step;
        let i = pos as usize;
        let frac = pos - i as f64;
        self.samples[i] + frac * (self.samples[i + 1] - self.samples[i])
    }
}

impl Default for BesselRatioTable {
    /// 5001 samples on `[0, 50]`.
    fn default() -> Self {
        Self::new(50.0, 0.01).expect("static table parameters are valid")
    }
}
