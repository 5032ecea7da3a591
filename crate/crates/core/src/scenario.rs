//! Random trial generation: effective channel, reference field, symbols and
//! noise, parameterised by received SNR and reference-to-signal ratio (RSR).
//!
//! Each channel coefficient is the product of a real angular factor
//! `u ~ N(0, 1/3)` and a complex fading factor `h ~ CN(0, v)`, scaled so that
//! `K E|a_nk|^2 / sigma^2 = SNR` and `E|b_n|^2 = RSR * E|a_nk|^2`.
//!
//! Every trial owns four independent random streams (channel, reference,
//! symbols, noise) derived from `(seed, trial, role)`, so a trial can be
//! regenerated in isolation and the same draws are reused across sweep
//! points.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::model::{forward, CMatrix, CVector, EffectiveChannel, Observation};

/// Constants for the physically parameterised channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// Elementary charge, C.
    pub q: f64,
    /// Bohr radius, m.
    pub a0: f64,
    /// Vacuum permittivity, F/m.
    pub epsilon0: f64,
    /// Speed of light, m/s.
    pub c: f64,
    /// Principal quantum number of the Rydberg level.
    pub n_principal: f64,
    /// Carrier angular frequency, rad/s.
    pub omega: f64,
    /// Total user transmit power `P_u`, W.
    pub tx_power: f64,
    /// User-to-receiver distance `r_u`, m.
    pub user_distance: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.054_571_817e-34,
            q: 1.602_176_634e-19,
            a0: 5.292e-11,
            epsilon0: 8.854_187_812_8e-12,
            c: 299_792_458.0,
            n_principal: 52.0,
            omega: 2.0 * PI * 5e9,
            tx_power: 1.0,
            user_distance: 100.0,
        }
    }
}

impl PhysicalConstants {
    pub fn wavelength(&self) -> f64 {
        2.0 * PI * self.c / self.omega
    }

    /// Radial matrix element `r_eg = n^2 a0`.
    pub fn radial_element(&self) -> f64 {
        self.n_principal * self.n_principal * self.a0
    }

    /// Fading variance `q^2 / (eps0^2 lambda^2 r^2)` at distance `r`.
    pub fn fading_variance(&self, distance: f64) -> f64 {
        let d = self.epsilon0 * self.wavelength() * distance;
        self.q * self.q / (d * d)
    }

    /// Received SNR in closed form, `q^4 n^4 a0^2 P_u / (3 hbar^2 eps0^2 lambda^2 r_u^2 sigma^2)`.
    pub fn snr_closed_form(&self, sigma2: f64) -> f64 {
        let n4 = self.n_principal.powi(4);
        let num = self.q.powi(4) * n4 * self.a0 * self.a0 * self.tx_power;
        let den = 3.0
            * self.hbar
            * self.hbar
            * self.epsilon0
            * self.epsilon0
            * self.wavelength().powi(2)
            * self.user_distance
            * self.user_distance
            * sigma2;
        num / den
    }

    /// `K E|a_nk|^2 / sigma^2` assembled factor by factor from the generative model.
    pub fn snr_from_model(&self, users: usize, sigma2: f64) -> f64 {
        let per_user_power = self.tx_power / users as f64;
        let gain = self.radial_element() * self.q / self.hbar;
        let mean_sq = gain * gain * per_user_power * (1.0 / 3.0) * self.fading_variance(self.user_distance);
        users as f64 * mean_sq / sigma2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    /// `sigma^2 = 1`; scales back-solved from SNR and RSR.
    #[default]
    Normalized,
    /// Scales computed from [`PhysicalConstants`]; `sigma^2` and the LO
    /// distance back-solved from SNR and RSR.
    Physical,
}

impl std::str::FromStr for ChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(Self::Normalized),
            "physical" => Ok(Self::Physical),
            _ => Err(Error::Config(format!("unknown channel mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub antennas: usize,
    pub users: usize,
    pub order: usize,
    pub snr_db: f64,
    pub rsr_db: f64,
    pub seed: u64,
    pub mode: ChannelMode,
    pub constants: PhysicalConstants,
}

impl ScenarioConfig {
    pub fn new(antennas: usize, users: usize, order: usize, snr_db: f64, rsr_db: f64, seed: u64) -> Self {
        Self {
            antennas,
            users,
            order,
            snr_db,
            rsr_db,
            seed,
            mode: ChannelMode::Normalized,
            constants: PhysicalConstants::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.antennas < self.users {
            return Err(Error::Config(format!(
                "need N >= K >= 1, got N={} K={}",
                self.antennas, self.users
            )));
        }
        if !self.snr_db.is_finite() || !self.rsr_db.is_finite() {
            return Err(Error::Config("snr_db and rsr_db must be finite".into()));
        }
        Constellation::new(self.order)?;
        Ok(())
    }

    /// Per-trial amplitude scales implied by the configuration.
    pub fn scales(&self) -> Result<ChannelScales> {
        self.validate()?;
        let snr = 10f64.powf(self.snr_db / 10.0);
        let rsr = 10f64.powf(self.rsr_db / 10.0);
        let k = self.users as f64;
        let scales = match self.mode {
            ChannelMode::Normalized => {
                let user_power = snr / k;
                ChannelScales {
                    user_gain: (3.0 * user_power).sqrt(),
                    user_fading_var: 1.0,
                    ref_gain: (3.0 * rsr * user_power).sqrt(),
                    ref_fading_var: 1.0,
                    sigma2: 1.0,
                }
            }
            ChannelMode::Physical => {
                let c = &self.constants;
                let base = c.radial_element() * c.q / c.hbar;
                // P_b = P_u / K, so RSR = r_u^2 / r_b^2
                let per_user = c.tx_power / k;
                let ref_distance = c.user_distance / rsr.sqrt();
                let sigma2 = c.snr_closed_form(1.0) / snr;
                ChannelScales {
                    user_gain: base * per_user.sqrt(),
                    user_fading_var: c.fading_variance(c.user_distance),
                    ref_gain: base * per_user.sqrt(),
                    ref_fading_var: c.fading_variance(ref_distance),
                    sigma2,
                }
            }
        };
        if !(scales.sigma2 > 0.0
            && scales.user_fading_var > 0.0
            && scales.ref_fading_var > 0.0
            && scales.sigma2.is_finite())
        {
            return Err(Error::Config("derived variances must be positive and finite".into()));
        }
        Ok(scales)
    }
}

/// `a_nk = user_gain * u * h`, `h ~ CN(0, user_fading_var)`; likewise for `b_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelScales {
    pub user_gain: f64,
    pub user_fading_var: f64,
    pub ref_gain: f64,
    pub ref_fading_var: f64,
    pub sigma2: f64,
}

impl ChannelScales {
    /// `E|a_nk|^2`.
    pub fn user_power(&self) -> f64 {
        self.user_gain * self.user_gain * self.user_fading_var / 3.0
    }

    /// `E|b_n|^2`.
    pub fn reference_power(&self) -> f64 {
        self.ref_gain * self.ref_gain * self.ref_fading_var / 3.0
    }
}

/// One Monte Carlo trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub channel: EffectiveChannel,
    pub reference: CVector,
    pub sigma2: f64,
    pub s_true: CVector,
    /// Constellation indices of `s_true`.
    pub symbol_indices: Vec<usize>,
    /// `A^H s + b + w` before the magnitude is taken.
    pub y_oracle: CVector,
    pub z: Observation,
}

#[derive(Debug, Clone, Copy)]
enum StreamRole {
    Channel = 0,
    Reference = 1,
    Symbols = 2,
    Noise = 3,
}

/// The four random streams of a single trial.
#[derive(Debug, Clone)]
pub struct TrialStreams {
    pub channel: ChaCha8Rng,
    pub reference: ChaCha8Rng,
    pub symbols: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

impl TrialStreams {
    pub fn new(seed: u64, trial: u64) -> Self {
        let stream = |role: StreamRole| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((trial << 2) | role as u64);
            rng
        };
        Self {
            channel: stream(StreamRole::Channel),
            reference: stream(StreamRole::Reference),
            symbols: stream(StreamRole::Symbols),
            noise: stream(StreamRole::Noise),
        }
    }
}

fn complex_normal<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let sd = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

fn angular<R: Rng>(rng: &mut R) -> f64 {
    let x: f64 = rng.sample(StandardNormal);
    x / 3f64.sqrt()
}

/// Draws one scenario from the given streams.
pub fn generate(cfg: &ScenarioConfig, streams: &mut TrialStreams) -> Result<Scenario> {
    let scales = cfg.scales()?;
    let constellation = Constellation::new(cfg.order)?;
    let (k, n) = (cfg.users, cfg.antennas);

    // column-major over (k, n): antenna-by-antenna
    let mut a = CMatrix::zeros(k, n);
    for col in 0..n {
        for row in 0..k {
            let u = angular(&mut streams.channel);
            let h = complex_normal(&mut streams.channel, scales.user_fading_var);
            a[(row, col)] = h * (scales.user_gain * u);
        }
    }
    let b = CVector::from_fn(n, |_, _| {
        let u = angular(&mut streams.reference);
        let h = complex_normal(&mut streams.reference, scales.ref_fading_var);
        h * (scales.ref_gain * u)
    });
    let symbol_indices: Vec<usize> = (0..k)
        .map(|_| streams.symbols.random_range(0..constellation.order()))
        .collect();
    let s_true = CVector::from_iterator(k, symbol_indices.iter().map(|&i| constellation.point(i)));
    let w = CVector::from_fn(n, |_, _| complex_normal(&mut streams.noise, scales.sigma2));

    let channel = EffectiveChannel::new(a)?;
    let (z, y_oracle) = forward(&channel, &s_true, &b, &w)?;
    Ok(Scenario {
        channel,
        reference: b,
        sigma2: scales.sigma2,
        s_true,
        symbol_indices,
        y_oracle,
        z,
    })
}

/// Scenario for trial `trial` of `cfg.seed`.
pub fn generate_trial(cfg: &ScenarioConfig, trial: u64) -> Result<Scenario> {
    generate(cfg, &mut TrialStreams::new(cfg.seed, trial))
}

/// `10 log10( mean over trials and antennas of sum_k |a_nk s_k|^2 / sigma^2 )`.
pub fn empirical_snr(batch: &[Scenario]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Config("empirical SNR needs at least one scenario".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for sc in batch {
        let a = sc.channel.matrix();
        for col in 0..a.ncols() {
            let p: f64 = (0..a.nrows()).map(|row| (a[(row, col)] * sc.s_true[row]).norm_sqr()).sum();
            total += p / sc.sigma2;
            count += 1;
        }
    }
    Ok(10.0 * (total / count as f64).log10())
}

/// Noise magnitudes as a plain vector, used by tests and diagnostics.
pub fn noise_of(sc: &Scenario) -> Result<CVector> {
    let clean = sc.channel.field(&sc.s_true, &sc.reference)?;
    Ok(&sc.y_oracle - clean)
}

/// Observation magnitudes as `f64` slice helper.
pub fn magnitudes(v: &CVector) -> DVector<f64> {
    v.map(|x| x.norm())
}
