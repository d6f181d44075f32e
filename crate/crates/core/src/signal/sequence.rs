use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::filter::{minmax_normalize, Fir};
use super::pulses::{pam4_symbols, random_pulse, sample_folded_normal, supergaussian, PulseKind, PulseShapeSpec};
use crate::error::{Error, Result};

/// Shape of the generated drive waveforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationConfig {
    pub samples_per_symbol: usize,
    pub symbols_per_block: usize,
    pub blocks: usize,
    /// Probability that a block uses super-Gaussian rather than random pulses.
    pub super_gaussian_probability: f64,
    /// Largest accepted T₀, in symbol periods; larger draws are resampled.
    pub max_width: f64,
    pub filter_taps: usize,
    /// Low-pass cutoff as a fraction of the symbol rate.
    pub cutoff_fraction: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            samples_per_symbol: 32,
            symbols_per_block: 8,
            blocks: 4,
            super_gaussian_probability: 0.5,
            max_width: 2.0,
            filter_taps: super::filter::DEFAULT_TAPS,
            cutoff_fraction: 0.8,
        }
    }
}

impl GenerationConfig {
    pub fn sequence_len(&self) -> usize {
        self.samples_per_symbol * self.symbols_per_block * self.blocks
    }

    pub fn symbols_per_sequence(&self) -> usize {
        self.symbols_per_block * self.blocks
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_symbol < 2 || self.symbols_per_block == 0 || self.blocks == 0 {
            return Err(Error::validation("sequence geometry must be positive"));
        }
        if !(0.0..=1.0).contains(&self.super_gaussian_probability) {
            return Err(Error::validation("super-Gaussian probability must lie in [0, 1]"));
        }
        if !(self.max_width > 0.0) {
            return Err(Error::validation("maximum pulse width must be positive"));
        }
        let cutoff = self.cutoff_fraction / self.samples_per_symbol as f64;
        Fir::lowpass(cutoff, self.filter_taps).map(|_| ())
    }

    pub fn filter(&self) -> Result<Fir> {
        Fir::lowpass(self.cutoff_fraction / self.samples_per_symbol as f64, self.filter_taps)
    }
}

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed `index` of stream `stream` under `parent`.
///
/// `mix64(mix64(parent ^ mix64(stream)) + index)`: every (stream, index)
/// pair gets its own generator, so results do not depend on the order or
/// number of workers that produce them.
pub fn derive_seed(parent: u64, stream: u64, index: u64) -> u64 {
    mix64(mix64(parent ^ mix64(stream)).wrapping_add(index))
}

const BLOCK_STREAM: u64 = 0x0042_6c6f_636b;

/// One pulse-shaped block before normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub shape: PulseShapeSpec,
    pub symbols: Vec<f64>,
    pub samples: Vec<f64>,
}

/// Draw the pulse shape for a block from `rng`.
pub fn draw_shape<R: Rng>(block_seed: u64, cfg: &GenerationConfig, rng: &mut R) -> PulseShapeSpec {
    if rng.gen_bool(cfg.super_gaussian_probability) {
        let width_t0 = loop {
            let w = sample_folded_normal(0.25, 1.0, rng);
            if w > 0.0 && w <= cfg.max_width {
                break w;
            }
        };
        let order_n = Uniform::new_inclusive(1.0, 6.0).sample(rng);
        PulseShapeSpec {
            kind: PulseKind::SuperGaussian,
            width_t0,
            order_n,
            block_seed,
        }
    } else {
        PulseShapeSpec {
            kind: PulseKind::Random,
            width_t0: 0.0,
            order_n: 0.0,
            block_seed,
        }
    }
}

/// Super-Gaussian pulse train for `symbols`, summing overlapping tails and
/// truncating at the edges of the slice.
pub fn supergaussian_train(symbols: &[f64], width_t0: f64, order_n: f64, samples_per_symbol: usize) -> Vec<f64> {
    let sps = samples_per_symbol as f64;
    let len = symbols.len() * samples_per_symbol;
    // Beyond this many symbols a pulse is below 1e-30 of its peak.
    let reach = ((width_t0 / 2.0) * 34.5f64.powf(1.0 / (2.0 * order_n))).ceil() as isize + 1;
    let mut out = vec![0.0; len];
    for (k, &level) in symbols.iter().enumerate() {
        if level == 0.0 {
            continue;
        }
        let centre = k as f64 + 0.5;
        let lo = ((k as isize - reach).max(0) as usize) * samples_per_symbol;
        let hi = (((k as isize + reach + 1) as usize).min(symbols.len())) * samples_per_symbol;
        for (s, o) in out.iter_mut().enumerate().take(hi).skip(lo) {
            let t = s as f64 / sps - centre;
            *o += level * supergaussian(t, width_t0, order_n);
        }
    }
    out
}

/// Build one block from its own seed: pulse kind, shape parameters, PAM4
/// symbols and (for random pulses) the sample draws all come from it.
pub fn build_block(block_seed: u64, cfg: &GenerationConfig) -> Block {
    let mut rng = ChaCha8Rng::seed_from_u64(block_seed);
    let shape = draw_shape(block_seed, cfg, &mut rng);
    let symbols = pam4_symbols(cfg.symbols_per_block, &mut rng);
    let sps = cfg.samples_per_symbol;
    let samples = match shape.kind {
        PulseKind::SuperGaussian => supergaussian_train(&symbols, shape.width_t0, shape.order_n, sps),
        PulseKind::Random => symbols
            .iter()
            .flat_map(|&level| {
                random_pulse(sps, &mut rng)
                    .into_iter()
                    .map(move |v| v * level)
                    .collect::<Vec<_>>()
            })
            .collect(),
    };
    Block {
        shape,
        symbols,
        samples,
    }
}

pub fn block_seeds(seed: u64, cfg: &GenerationConfig) -> Vec<u64> {
    (0..cfg.blocks as u64)
        .map(|k| derive_seed(seed, BLOCK_STREAM, k))
        .collect()
}

/// A normalised drive waveform and how it was made.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveWaveform {
    pub samples: Vec<f64>,
    pub symbols: Vec<f64>,
    pub shapes: Vec<PulseShapeSpec>,
    /// Concatenated blocks before normalisation and filtering.
    pub raw: Vec<f64>,
    /// Largest excursion outside [0, 1] left by the low-pass filter.
    pub overshoot: f64,
}

/// Normalise, low-pass and renormalise a raw pulse train.
///
/// The filter overshoots [0, 1] near sharp edges; the waveform is brought
/// back onto [0, 1] by a second min-max pass rather than a clip so that the
/// input keeps a fixed, sequence-independent relation to the laser output.
/// The overshoot removed is returned alongside the samples.
pub fn condition(raw: &[f64], cfg: &GenerationConfig) -> Result<(Vec<f64>, f64)> {
    let normalised = minmax_normalize(raw)?;
    let filtered = cfg.filter()?.filtfilt(&normalised);
    let overshoot = filtered.iter().fold(0.0f64, |m, &v| m.max(-v).max(v - 1.0));
    Ok((minmax_normalize(&filtered)?, overshoot))
}

/// Assemble a sequence from explicit block seeds.
pub fn build_from_block_seeds(seeds: &[u64], cfg: &GenerationConfig) -> Result<DriveWaveform> {
    cfg.validate()?;
    let blocks: Vec<Block> = seeds.iter().map(|&s| build_block(s, cfg)).collect();
    let raw: Vec<f64> = blocks.iter().flat_map(|b| b.samples.iter().copied()).collect();
    let (samples, overshoot) = condition(&raw, cfg)?;
    Ok(DriveWaveform {
        samples,
        symbols: blocks.iter().flat_map(|b| b.symbols.iter().copied()).collect(),
        shapes: blocks.iter().map(|b| b.shape).collect(),
        raw,
        overshoot,
    })
}

/// Normalised drive waveform for one sequence seed.
///
/// The waveform is expressed in symbol periods, so it does not depend on the
/// symbol-rate fraction; the argument is validated and carried for callers
/// that record it.
pub fn build_sequence(seed: u64, symbol_rate_fraction: f64, cfg: &GenerationConfig) -> Result<DriveWaveform> {
    if !(symbol_rate_fraction > 0.0 && symbol_rate_fraction.is_finite()) {
        return Err(Error::validation("symbol-rate fraction must be positive"));
    }
    build_from_block_seeds(&block_seeds(seed, cfg), cfg)
}

/// 4PAM train of Gaussian pulses (super-Gaussian order 1) with e⁻² width of
/// one symbol, conditioned like the training inputs.
pub fn gaussian_pam4(symbols: &[f64], cfg: &GenerationConfig) -> Result<Vec<f64>> {
    let raw = supergaussian_train(symbols, 1.0, 1.0, cfg.samples_per_symbol);
    Ok(condition(&raw, cfg)?.0)
}
