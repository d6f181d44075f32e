use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// The four equiprobable PAM4 amplitude levels.
pub const PAM4_LEVELS: [f64; 4] = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseKind {
    SuperGaussian,
    Random,
}

/// Pulse shape drawn for one 8-symbol block.
///
/// `width_t0` (the e⁻² full width) is in units of the symbol period;
/// `width_t0` and `order_n` are only meaningful for super-Gaussian blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShapeSpec {
    pub kind: PulseKind,
    pub width_t0: f64,
    pub order_n: f64,
    pub block_seed: u64,
}

impl PulseShapeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kind == PulseKind::SuperGaussian {
            if !(self.width_t0 > 0.0 && self.width_t0.is_finite()) {
                return Err(Error::validation(format!(
                    "pulse width must be positive, got {}",
                    self.width_t0
                )));
            }
            if !(1.0..=6.0).contains(&self.order_n) {
                return Err(Error::validation(format!(
                    "order must lie in [1, 6], got {}",
                    self.order_n
                )));
            }
        }
        Ok(())
    }
}

/// |Z| with Z ~ Normal(mu, sigma²).
pub fn sample_folded_normal<R: Rng + ?Sized>(mu: f64, sigma: f64, rng: &mut R) -> f64 {
    let normal = Normal::new(mu, sigma).expect("sigma must be positive and finite");
    normal.sample(rng).abs()
}

/// exp(−2·|2t/T₀|^(2n)).
#[inline]
pub fn supergaussian(t: f64, width_t0: f64, order_n: f64) -> f64 {
    (-2.0 * (2.0 * t / width_t0).abs().powf(2.0 * order_n)).exp()
}

/// One symbol of a super-Gaussian pulse, centred on the symbol slot.
///
/// `symbol_period` and `spec.width_t0` share a time unit; sample `j` sits at
/// `(j − samples_per_symbol/2)·symbol_period/samples_per_symbol`, so the
/// middle sample is the pulse peak.
pub fn supergaussian_pulse(spec: &PulseShapeSpec, symbol_period: f64, samples_per_symbol: usize) -> Result<Vec<f64>> {
    if spec.kind != PulseKind::SuperGaussian {
        return Err(Error::validation("spec is not a super-Gaussian pulse"));
    }
    spec.validate()?;
    let dt = symbol_period / samples_per_symbol as f64;
    let mid = (samples_per_symbol / 2) as f64;
    Ok((0..samples_per_symbol)
        .map(|j| supergaussian((j as f64 - mid) * dt, spec.width_t0, spec.order_n))
        .collect())
}

/// One symbol of i.i.d. folded 𝒩(0.5, 1) samples.
pub fn random_pulse<R: Rng + ?Sized>(samples_per_symbol: usize, rng: &mut R) -> Vec<f64> {
    (0..samples_per_symbol)
        .map(|_| sample_folded_normal(0.5, 1.0, rng))
        .collect()
}

/// `count` i.i.d. uniform draws from the PAM4 levels.
pub fn pam4_symbols<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<f64> {
    (0..count).map(|_| PAM4_LEVELS[rng.gen_range(0..4)]).collect()
}
