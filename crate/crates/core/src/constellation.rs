//! Square QAM constellations with per-axis Gray labelling.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A unit-average-power square QAM alphabet.
///
/// Point `p` sits at grid position `(p / m, p % m)` where `m = sqrt(order)`:
/// the first coordinate indexes the in-phase level, the second the
/// quadrature level. Its label is the Gray code of the in-phase index
/// followed by the Gray code of the quadrature index, MSB first.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    side: usize,
    bits_per_axis: usize,
    points: Vec<Complex64>,
    labels: Vec<u32>,
}

fn gray(i: usize) -> u32 {
    (i ^ (i >> 1)) as u32
}

impl Constellation {
    /// Builds 4-, 16- or 64-QAM.
    pub fn new(order: usize) -> Result<Self> {
        let side: usize = match order {
            4 => 2,
            16 => 4,
            64 => 8,
            _ => {
                return Err(Error::Config(format!(
                    "unsupported constellation order {order} (expected 4, 16 or 64)"
                )))
            }
        };
        // mean of l^2 over levels {-(m-1), .., m-1} is (m^2 - 1) / 3 per axis
        let scale = 1.0 / (2.0 * ((side * side - 1) as f64) / 3.0).sqrt();
        let level = |i: usize| (2.0 * i as f64 - (side as f64 - 1.0)) * scale;
        let bits_per_axis = side.trailing_zeros() as usize;
        let mut points = Vec::with_capacity(order);
        let mut labels = Vec::with_capacity(order);
        for re in 0..side {
            for im in 0..side {
                points.push(Complex64::new(level(re), level(im)));
                labels.push((gray(re) << bits_per_axis) | gray(im));
            }
        }
        Ok(Self {
            order,
            side,
            bits_per_axis,
            points,
            labels,
        })
    }

    /// Parses `4qam`, `16qam`, `64qam` (or the bare order).
    pub fn parse(name: &str) -> Result<Self> {
        let trimmed = name.trim().to_ascii_lowercase();
        let digits = trimmed.strip_suffix("qam").unwrap_or(&trimmed);
        let order = digits
            .trim_end_matches('-')
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("unknown modulation '{name}'")))?;
        Self::new(order)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Points per axis, `sqrt(order)`.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    /// Integer label of a point; bit `bits_per_symbol - 1` is the MSB.
    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    /// Appends the label of `index` to `out`, MSB first, one bit per byte.
    pub fn push_bits(&self, index: usize, out: &mut Vec<u8>) {
        let label = self.labels[index];
        let nbits = self.bits_per_symbol();
        out.extend((0..nbits).rev().map(|b| ((label >> b) & 1) as u8));
    }

    /// Index of the closest point; ties go to the lowest index.
    pub fn nearest(&self, value: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (value - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Short name used in CSV output and on the command line.
    pub fn name(&self) -> String {
        format!("{}qam", self.order)
    }
}
