//! Training, evaluation and the measurements built on them.

mod bench;
mod eye;
mod fit;
mod metrics;
mod sweep;

pub use bench::{benchmark_epoch_time, solver_pass, time_runs, ModelTiming, Timing, TimingTable};
pub use eye::{
    eye_diagram, eye_study, ideal_pam4, predict_windows, EyeHistogram, EyeStudy, DEFAULT_AMPLITUDE_BINS, EYE_SPAN,
};
pub use fit::{
    eval_batch, evaluate, train, train_epoch, train_from, BestTracker, EpochPass, EpochRecord, TrainConfig,
    TrainReport, TrainRun,
};
pub use metrics::{nmse, nmse_denominator, nmse_loss, nmse_with, nrmse, NmseMode};
pub use sweep::{nondecreasing_within, sweep_symbol_rates, SweepRow, SweepTable, SWEEP_FRACTIONS};
