use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default FIR length for the drive low-pass.
pub const DEFAULT_TAPS: usize = 65;

/// Symmetric windowed-sinc low-pass FIR.
#[derive(Debug, Clone, PartialEq)]
pub struct Fir {
    taps: Vec<f64>,
}

impl Fir {
    /// Hamming-windowed sinc with cutoff `cutoff` in cycles/sample, scaled to
    /// unit DC gain. `taps` must be odd so the filter has an integer delay.
    pub fn lowpass(cutoff: f64, taps: usize) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff < 0.5) {
            return Err(Error::validation(format!(
                "normalised cutoff must lie in (0, 0.5), got {cutoff}"
            )));
        }
        if taps < 3 || taps.is_multiple_of(2) {
            return Err(Error::validation(format!("tap count must be odd and >= 3, got {taps}")));
        }
        let m = (taps - 1) as f64;
        let mut h: Vec<f64> = (0..taps)
            .map(|n| {
                let x = n as f64 - m / 2.0;
                let sinc = if x == 0.0 {
                    2.0 * cutoff
                } else {
                    (2.0 * PI * cutoff * x).sin() / (PI * x)
                };
                let window = 0.54 - 0.46 * (2.0 * PI * n as f64 / m).cos();
                sinc * window
            })
            .collect();
        let dc: f64 = h.iter().sum();
        h.iter_mut().for_each(|v| *v /= dc);
        Ok(Self { taps: h })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Magnitude of the single-pass frequency response at `freq` cycles/sample.
    pub fn response(&self, freq: f64) -> f64 {
        let (re, im) = self.taps.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, h)| {
            let w = -2.0 * PI * freq * n as f64;
            (re + h * w.cos(), im + h * w.sin())
        });
        re.hypot(im)
    }

    fn causal(&self, x: &[f64]) -> Vec<f64> {
        let h = &self.taps;
        (0..x.len())
            .map(|n| h.iter().enumerate().take(n + 1).map(|(k, hk)| hk * x[n - k]).sum())
            .collect()
    }

    /// Zero-phase filtering: forward pass, time reversal, second pass, reversal.
    ///
    /// The signal is extended by replicating its edge values for one filter
    /// length on each side, so constants pass through unchanged.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return vec![];
        }
        let pad = self.taps.len() - 1;
        let first = x[0];
        let last = x[x.len() - 1];
        let mut ext = Vec::with_capacity(x.len() + 2 * pad);
        ext.extend(std::iter::repeat_n(first, pad));
        ext.extend_from_slice(x);
        ext.extend(std::iter::repeat_n(last, pad));
        let mut y = self.causal(&ext);
        y.reverse();
        let mut y = self.causal(&y);
        y.reverse();
        y[pad..pad + x.len()].to_vec()
    }
}

/// Zero-phase low-pass of `x` sampled at `sample_rate` Hz, cut off at
/// `cutoff` Hz, with the default tap count.
pub fn lowpass_filter(x: &[f64], cutoff: f64, sample_rate: f64) -> Result<Vec<f64>> {
    if !(sample_rate > 0.0 && cutoff > 0.0 && cutoff < sample_rate / 2.0) {
        return Err(Error::validation(format!(
            "cutoff {cutoff} Hz must lie in (0, {}) Hz",
            sample_rate / 2.0
        )));
    }
    Ok(Fir::lowpass(cutoff / sample_rate, DEFAULT_TAPS)?.filtfilt(x))
}

/// Rescale `x` affinely onto [0, 1].
pub fn minmax_normalize(x: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !(hi > lo) || !(hi - lo).is_finite() {
        return Err(Error::Degenerate("waveform has no range to normalise"));
    }
    let span = hi - lo;
    Ok(x.iter().map(|&v| if v == hi { 1.0 } else { (v - lo) / span }).collect())
}
