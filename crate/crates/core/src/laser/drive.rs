use super::params::LaserParams;
use super::rate::{relaxation_frequency, threshold_current};
use crate::error::{Error, Result};

/// Maps normalised waveforms onto drive current and fixes the time base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveConfig {
    /// A.
    pub bias_current: f64,
    /// A.
    pub peak_to_peak_current: f64,
    pub samples_per_symbol: usize,
    /// Symbol rate R_s, Hz.
    pub symbol_rate: f64,
}

impl DriveConfig {
    /// Default operating point: bias 3·I_th, 2·I_th peak-to-peak, 32 samples
    /// per symbol and R_s = `fraction`·f_R at the bias.
    pub fn for_fraction(params: &LaserParams, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction.is_finite()) {
            return Err(Error::validation(format!(
                "symbol-rate fraction must be positive, got {fraction}"
            )));
        }
        let i_th = threshold_current(params)?;
        let bias = 3.0 * i_th;
        let f_r = relaxation_frequency(bias, params)?;
        let cfg = DriveConfig {
            bias_current: bias,
            peak_to_peak_current: 2.0 * i_th,
            samples_per_symbol: 32,
            symbol_rate: fraction * f_r,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_to_peak_current >= 0.0 && self.bias_current.is_finite()) {
            return Err(Error::validation("drive currents must be finite and non-negative"));
        }
        if self.bias_current - self.peak_to_peak_current / 2.0 < 0.0 {
            return Err(Error::validation(format!(
                "bias {:e} A minus half of {:e} A peak-to-peak is negative",
                self.bias_current, self.peak_to_peak_current
            )));
        }
        if self.samples_per_symbol < 2 {
            return Err(Error::validation("need at least 2 samples per symbol"));
        }
        if !(self.symbol_rate > 0.0 && self.symbol_rate.is_finite()) {
            return Err(Error::validation("symbol rate must be positive"));
        }
        Ok(())
    }

    /// Sample spacing of the drive grid, s.
    pub fn sample_interval(&self) -> f64 {
        1.0 / (self.symbol_rate * self.samples_per_symbol as f64)
    }

    pub fn symbol_period(&self) -> f64 {
        1.0 / self.symbol_rate
    }
}

/// `I = bias + (x − 0.5)·peak_to_peak` for every sample of `x ∈ [0, 1]`.
pub fn drive_from_normalized(x: &[f64], cfg: &DriveConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("sample {i} = {v} lies outside [0, 1]")));
            }
            Ok(cfg.bias_current + (v - 0.5) * cfg.peak_to_peak_current)
        })
        .collect()
}
