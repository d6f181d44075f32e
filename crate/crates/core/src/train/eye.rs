use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::laser::{DriveConfig, LaserParams};
use crate::models::Model;
use crate::signal::{gaussian_pam4, minmax_normalize, pam4_symbols, simulate_target, GenerationConfig};

/// Symbols folded into one eye trace.
pub const EYE_SPAN: usize = 2;
pub const DEFAULT_AMPLITUDE_BINS: usize = 128;

/// Counts of a waveform folded modulo two symbols.
///
/// Column `c` holds samples at times `t ≡ c (mod 2·samples_per_symbol)`;
/// amplitude bin `k` covers `[k/bins, (k+1)/bins)`, with the top bin closed
/// at 1. Values outside `[0, 1]` are counted in the nearest edge bin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EyeHistogram {
    pub samples_per_symbol: usize,
    pub amplitude_bins: usize,
    /// Row-major `columns × amplitude_bins`.
    pub counts: Vec<u64>,
    pub samples: u64,
}

impl EyeHistogram {
    pub fn columns(&self) -> usize {
        EYE_SPAN * self.samples_per_symbol
    }

    pub fn count(&self, column: usize, bin: usize) -> u64 {
        self.counts[column * self.amplitude_bins + bin]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Amplitude bins with at least one sample in `column`.
    pub fn occupied_bins(&self, column: usize) -> Vec<usize> {
        (0..self.amplitude_bins)
            .filter(|&b| self.count(column, b) > 0)
            .collect()
    }

    /// Columns at the centres of the two folded symbols.
    pub fn center_columns(&self) -> [usize; EYE_SPAN] {
        let half = self.samples_per_symbol / 2;
        [half, self.samples_per_symbol + half]
    }

    /// One row per amplitude bin (highest first), one column per time slot.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("amplitude_bin");
        for c in 0..self.columns() {
            let _ = write!(s, ",t{c}");
        }
        s.push('\n');
        for b in (0..self.amplitude_bins).rev() {
            let _ = write!(s, "{b}");
            for c in 0..self.columns() {
                let _ = write!(s, ",{}", self.count(c, b));
            }
            s.push('\n');
        }
        s
    }

    /// Binary 8-bit PGM, time across and amplitude up, scaled so the most
    /// populated bin is white.
    pub fn to_pgm(&self) -> Vec<u8> {
        let (w, h) = (self.columns(), self.amplitude_bins);
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1);
        let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
        for b in (0..h).rev() {
            for c in 0..w {
                let v = (self.count(c, b) as f64 * 255.0 / max as f64).round();
                out.push(v as u8);
            }
        }
        out
    }
}

/// Fold `waveform` into a two-symbol eye histogram.
pub fn eye_diagram(waveform: &[f64], samples_per_symbol: usize, amplitude_bins: usize) -> Result<EyeHistogram> {
    if samples_per_symbol == 0 || amplitude_bins == 0 {
        return Err(Error::validation(
            "samples per symbol and amplitude bins must be positive",
        ));
    }
    if waveform.is_empty() || !waveform.len().is_multiple_of(samples_per_symbol) {
        return Err(Error::validation(format!(
            "waveform of {} samples is not a whole number of {samples_per_symbol}-sample symbols",
            waveform.len()
        )));
    }
    if waveform.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("waveform contains non-finite samples"));
    }
    let columns = EYE_SPAN * samples_per_symbol;
    let mut counts = vec![0u64; columns * amplitude_bins];
    for (t, &v) in waveform.iter().enumerate() {
        let bin = ((v * amplitude_bins as f64).floor().max(0.0) as usize).min(amplitude_bins - 1);
        counts[(t % columns) * amplitude_bins + bin] += 1;
    }
    Ok(EyeHistogram {
        samples_per_symbol,
        amplitude_bins,
        counts,
        samples: waveform.len() as u64,
    })
}

/// Noiseless rectangular 4PAM: each level held for a whole symbol.
pub fn ideal_pam4(symbols: &[f64], samples_per_symbol: usize) -> Vec<f64> {
    symbols
        .iter()
        .flat_map(|&s| std::iter::repeat_n(s, samples_per_symbol))
        .collect()
}

/// Waveforms of one eye-diagram study.
#[derive(Debug, Clone, PartialEq)]
pub struct EyeStudy {
    pub symbols: Vec<f64>,
    /// Rectangular control built directly from the symbols.
    pub ideal: Vec<f64>,
    /// Gaussian-pulse drive fed to the solver and the models.
    pub input: Vec<f64>,
    /// Solver output, min-max normalised per window of one training
    /// sequence length, as the training targets are.
    pub solver: Vec<f64>,
    pub window: usize,
}

/// Drive a fresh Gaussian-pulse 4PAM sequence through the solver.
///
/// `symbols` must fill whole training-length windows.
pub fn eye_study(
    params: &LaserParams,
    fraction: f64,
    symbols: usize,
    seed: u64,
    generation: &GenerationConfig,
) -> Result<EyeStudy> {
    let window = generation.sequence_len();
    if symbols == 0 || !(symbols * generation.samples_per_symbol).is_multiple_of(window) {
        return Err(Error::validation(format!(
            "eye study needs a positive multiple of {} symbols",
            generation.symbols_per_sequence()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = pam4_symbols(symbols, &mut rng);
    let input = gaussian_pam4(&levels, generation)?;
    let mut drive = DriveConfig::for_fraction(params, fraction)?;
    drive.samples_per_symbol = generation.samples_per_symbol;
    let raw = simulate_target(&input, &drive, params, Default::default())?;
    let mut solver = Vec::with_capacity(raw.len());
    for w in raw.chunks(window) {
        solver.extend(minmax_normalize(w)?);
    }
    Ok(EyeStudy {
        window,
        ideal: ideal_pam4(&levels, generation.samples_per_symbol),
        symbols: levels,
        input,
        solver,
    })
}

/// Model output for a long waveform, predicted in consecutive windows of
/// `window` samples (the training sequence length).
pub fn predict_windows(model: &Model<f32>, input: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || !input.len().is_multiple_of(window) {
        return Err(Error::validation(format!(
            "waveform of {} samples does not split into {window}-sample windows",
            input.len()
        )));
    }
    let x: Vec<f32> = input.iter().map(|&v| v as f32).collect();
    let chunks: Vec<&[f32]> = x.chunks(window).collect();
    let mut out = Vec::with_capacity(input.len());
    for batch in chunks.chunks(super::fit::eval_batch(model.kind())) {
        for y in model.predict(batch)? {
            out.extend(y.into_iter().map(|v| v as f64));
        }
    }
    Ok(out)
}
