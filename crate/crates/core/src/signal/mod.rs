//! Randomised 4PAM drive waveforms and input/target datasets.
//!
//! Each 1024-sample sequence is four independent 8-symbol blocks at 32
//! samples per symbol. A block picks super-Gaussian or folded-normal random
//! pulses with equal probability, modulates them with PAM4 levels, and the
//! concatenation is min-max normalised, low-passed (zero phase) and
//! normalised again onto [0, 1]. Targets come from the rate-equation solver.

mod dataset;
mod filter;
mod pulses;
mod sequence;

pub use dataset::{
    build_dataset, meta_path, read_dataset, simulate_target, write_dataset, Dataset, DatasetConfig, Role, Sequence,
    DATASET_MAGIC, DATASET_VERSION,
};
pub use filter::{lowpass_filter, minmax_normalize, Fir, DEFAULT_TAPS};
pub use pulses::{
    pam4_symbols, random_pulse, sample_folded_normal, supergaussian, supergaussian_pulse, PulseKind, PulseShapeSpec,
    PAM4_LEVELS,
};
pub use sequence::{
    block_seeds, build_block, build_from_block_seeds, build_sequence, condition, derive_seed, draw_shape,
    gaussian_pam4, supergaussian_train, Block, DriveWaveform, GenerationConfig,
};
