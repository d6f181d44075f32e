use std::fmt::Display;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dml_core::config::KeyValues;

/// Directly-modulated laser simulation and surrogate modelling.
///
/// Every flag has a `key = value` equivalent (the flag name without the
/// leading dashes) that can be supplied through `--config`; flags win.
#[derive(Parser, Debug)]
#[command(name = "dml", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Drive the laser with a normalised waveform file and write the output power.
    Simulate(SimulateArgs),
    /// Generate the train and validation datasets.
    GenerateData(GenerateArgs),
    /// Train one model and write its best checkpoint and report.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset.
    Evaluate(EvaluateArgs),
    /// Train every model at every symbol rate and tabulate NRMSE.
    Sweep(SweepArgs),
    /// Time training and inference against the solver.
    Benchmark(BenchmarkArgs),
    /// Eye-diagram histograms of the ideal input, the solver and models.
    Eye(EyeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::GenerateData(_) => "generate-data",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Sweep(_) => "sweep",
            Command::Benchmark(_) => "benchmark",
            Command::Eye(_) => "eye",
        }
    }
}

fn put<T: Display>(kv: &mut KeyValues, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        kv.set(key, v);
    }
}

fn put_path(kv: &mut KeyValues, key: &str, v: &Option<PathBuf>) {
    put(kv, key, &v.as_ref().map(|p| p.display()));
}

fn put_paths(kv: &mut KeyValues, key: &str, v: &[PathBuf]) {
    if !v.is_empty() {
        let joined: Vec<String> = v.iter().map(|p| p.display().to_string()).collect();
        kv.set(key, joined.join(","));
    }
}

#[derive(Args, Debug)]
pub struct Common {
    /// Settings file of `key = value` lines.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Laser parameter file; the bundled parameter set when absent.
    #[arg(long, value_name = "PATH")]
    pub laser_params: Option<PathBuf>,
    /// Output directory [default: dml-out].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Scale profile: desk or full [default: desk].
    #[arg(long)]
    pub profile: Option<String>,
    /// Master seed [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Record that the artifacts must be bit-reproducible from the manifest.
    #[arg(long)]
    pub deterministic: bool,
}

impl Common {
    pub fn flags(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        put_path(&mut kv, "laser-params", &self.laser_params);
        put_path(&mut kv, "out", &self.out);
        put(&mut kv, "profile", &self.profile);
        put(&mut kv, "seed", &self.seed);
        if self.deterministic {
            kv.set("deterministic", true);
        }
        kv
    }
}

/// Optimiser settings shared by the commands that train.
#[derive(Args, Debug)]
pub struct Optim {
    /// Epochs [default: 50 desk, 400 full].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Sequences per Adam step [default: 32].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Sequences per gradient tape; 0 picks a per-model value.
    #[arg(long)]
    pub micro_batch: Option<usize>,
    /// Adam learning rate at the start of the cosine schedule.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Learning rate at the end of the cosine schedule.
    #[arg(long)]
    pub final_learning_rate: Option<f64>,
    /// NMSE normalisation: variance or mean-square.
    #[arg(long)]
    pub nmse_mode: Option<String>,
    /// Stop after this many epochs without a validation improvement.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Fit Volterra kernels with Adam instead of least squares.
    #[arg(long)]
    pub volterra_gradient: bool,
    /// Training arithmetic: f32 or f64.
    #[arg(long)]
    pub precision: Option<String>,
}

impl Optim {
    fn flags(&self, kv: &mut KeyValues) {
        put(kv, "epochs", &self.epochs);
        put(kv, "batch-size", &self.batch_size);
        put(kv, "micro-batch", &self.micro_batch);
        put(kv, "learning-rate", &self.learning_rate);
        put(kv, "final-learning-rate", &self.final_learning_rate);
        put(kv, "nmse-mode", &self.nmse_mode);
        put(kv, "patience", &self.patience);
        if self.volterra_gradient {
            kv.set("volterra-gradient", true);
        }
        put(kv, "precision", &self.precision);
    }
}

/// Architecture overrides; each applies to the models that have it.
#[derive(Args, Debug)]
pub struct Arch {
    /// Volterra memory length.
    #[arg(long)]
    pub memory: Option<usize>,
    /// Volterra ridge weight.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// TDNN input window.
    #[arg(long)]
    pub window: Option<usize>,
    /// TDNN or LSTM hidden width.
    #[arg(long)]
    pub hidden_nodes: Option<usize>,
    /// TDNN hidden layers.
    #[arg(long)]
    pub hidden_layers: Option<usize>,
    /// LSTM layers.
    #[arg(long)]
    pub layers: Option<usize>,
    /// CAT embedding width.
    #[arg(long)]
    pub embedding: Option<usize>,
    /// CAT attention heads.
    #[arg(long)]
    pub heads: Option<usize>,
    /// CAT convolution window.
    #[arg(long)]
    pub conv_window: Option<usize>,
    /// CAT MLP width.
    #[arg(long)]
    pub mlp_hidden: Option<usize>,
}

impl Arch {
    fn flags(&self, kv: &mut KeyValues) {
        put(kv, "memory", &self.memory);
        put(kv, "ridge", &self.ridge);
        put(kv, "window", &self.window);
        put(kv, "hidden-nodes", &self.hidden_nodes);
        put(kv, "hidden-layers", &self.hidden_layers);
        put(kv, "layers", &self.layers);
        put(kv, "embedding", &self.embedding);
        put(kv, "heads", &self.heads);
        put(kv, "conv-window", &self.conv_window);
        put(kv, "mlp-hidden", &self.mlp_hidden);
    }
}

/// Solver tolerances.
#[derive(Args, Debug)]
pub struct Tolerance {
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
}

impl Tolerance {
    fn flags(&self, kv: &mut KeyValues) {
        put(kv, "rel-tol", &self.rel_tol);
        put(kv, "abs-tol", &self.abs_tol);
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Normalised drive samples in [0, 1], one per line.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Symbol rate as a fraction of the relaxation frequency [default: 0.5].
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Samples per symbol of the drive file [default: 32].
    #[arg(long)]
    pub samples_per_symbol: Option<usize>,
    #[command(flatten)]
    pub tol: Tolerance,
}

impl SimulateArgs {
    pub fn flags(&self) -> KeyValues {
        let mut kv = self.common.flags();
        put_path(&mut kv, "input", &self.input);
        put(&mut kv, "fraction", &self.fraction);
        put(&mut kv, "samples-per-symbol", &self.samples_per_symbol);
        self.tol.flags(&mut kv);
        kv
    }
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Symbol rate as a fraction of the relaxation frequency [default: 0.5].
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Training sequences [default: 512 desk, 8192 full].
    #[arg(long)]
    pub train_sequences: Option<usize>,
    /// Validation sequences [default: 64 desk, 128 full].
    #[arg(long)]
    pub test_sequences: Option<usize>,
    #[command(flatten)]
    pub tol: Tolerance,
}

impl GenerateArgs {
    pub fn flags(&self) -> KeyValues {
        let mut kv = self.common.flags();
        put(&mut kv, "fraction", &self.fraction);
        put(&mut kv, "train-sequences", &self.train_sequences);
        put(&mut kv, "test-sequences", &self.test_sequences);
        self.tol.flags(&mut kv);
        kv
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// volterra, tdnn, lstm or cat.
    #[arg(long)]
    pub model: Option<String>,
    /// Directory holding train.dmld and test.dmld [default: the output directory].
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub optim: Optim,
    #[command(flatten)]
    pub arch: Arch,
}

impl TrainArgs {
    pub fn flags(&self) -> KeyValues {
        let mut kv = self.common.flags();
        put(&mut kv, "model", &self.model);
        put_path(&mut kv, "data", &self.data);
        self.optim.flags(&mut kv);
        self.arch.flags(&mut kv);
        kv
    }
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Model checkpoint [default: <out>/model.dmlw].
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Dataset file [default: <out>/test.dmld].
    #[arg(long, value_name = "PATH")]
    pub dataset: Option<PathBuf>,
    /// NMSE normalisation: variance or mean-square.
    #[arg(long)]
    pub nmse_mode: Option<String>,
}

impl EvaluateArgs {
    pub fn flags(&self) -> KeyValues {
        let mut kv = self.common.flags();
        put_path(&mut kv, "checkpoint", &self.checkpoint);
        put_path(&mut kv, "dataset", &self.dataset);
        put(&mut kv, "nmse-mode", &self.nmse_mode);
        kv
    }
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated models [default: all four].
    #[arg(long)]
    pub models: Option<String>,
    /// Comma-separated symbol-rate fractions [default: 0.1,0.25,0.5,0.75,1,1.25].
    #[arg(long)]
    pub fractions: Option<String>,
    #[arg(long)]
    pub train_sequences: Option<usize>,
    #[arg(long)]
    pub test_sequences: Option<usize>,
    #[command(flatten)]
    pub tol: Tolerance,
    #[command(flatten)]
    pub optim: Optim,
    #[command(flatten)]
    pub arch: Arch,
}

impl SweepArgs {
    pub fn flags(&self) -> KeyValues {
        let mut kv = self.common.flags();
        put(&mut kv, "models", &self.models);
        put(&mut kv, "fractions", &self.fractions);
        put(&mut kv, "train-sequences", &self.train_sequences);
        put(&mut kv, "test-sequences", &self.test_sequences);
        self.tol.flags(&mut kv);
        self.optim.flags(&mut kv);
        self.arch.flags(&mut kv);
        kv
    }
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated models to initialise when no checkpoint is given.
    #[arg(long)]
    pub models: Option<String>,
    /// Trained checkpoint to time; repeatable.
    #[arg(long = "checkpoint", value_name = "PATH")]
    pub checkpoints: Vec<PathBuf>,
    /// Dataset file [default: <out>/test.dmld].
    #[arg(long, value_name = "PATH")]
    pub dataset: Option<PathBuf>,
    /// Measured repetitions after one warm-up [default: 5].
    #[arg(long)]
    pub runs: Option<usize>,
    #[command(flatten)]
    pub optim: Optim,
    #[command(flatten)]
    pub arch: Arch,
}

impl BenchmarkArgs {
    pub fn flags(&self) -> KeyValues {
        let mut kv = self.common.flags();
        put(&mut kv, "models", &self.models);
        put_paths(&mut kv, "checkpoints", &self.checkpoints);
        put_path(&mut kv, "dataset", &self.dataset);
        put(&mut kv, "runs", &self.runs);
        self.optim.flags(&mut kv);
        self.arch.flags(&mut kv);
        kv
    }
}

#[derive(Args, Debug)]
pub struct EyeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Symbol-rate fraction [default: 1].
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Symbols in the study [default: 1024].
    #[arg(long)]
    pub symbols: Option<usize>,
    /// Amplitude bins [default: 128].
    #[arg(long)]
    pub bins: Option<usize>,
    /// Trained checkpoint whose eye is drawn; repeatable.
    #[arg(long = "checkpoint", value_name = "PATH")]
    pub checkpoints: Vec<PathBuf>,
}

impl EyeArgs {
    pub fn flags(&self) -> KeyValues {
        let mut kv = self.common.flags();
        put(&mut kv, "fraction", &self.fraction);
        put(&mut kv, "symbols", &self.symbols);
        put(&mut kv, "bins", &self.bins);
        put_paths(&mut kv, "checkpoints", &self.checkpoints);
        kv
    }
}
