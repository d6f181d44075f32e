use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{nmse_loss, nmse_with, NmseMode};
use crate::autodiff::{adam_step, AdamConfig, AdamState, Real, Tape};
use crate::error::{Error, Result};
use crate::models::{volterra_regress, Model, ModelConfig, ModelKind};
use crate::signal::{derive_seed, Dataset};

const INIT_STREAM: u64 = 0x11;
const SHUFFLE_STREAM: u64 = 0x12;

/// Optimiser and schedule settings for [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Sequences per Adam step.
    pub batch_size: usize,
    /// Sequences per tape; gradients of the micro-batches of one batch are
    /// summed before the step. `0` picks a per-model default.
    pub micro_batch: usize,
    /// Initial learning rate, cosine-decayed to `final_learning_rate` over
    /// the whole run.
    pub learning_rate: f64,
    pub final_learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub nmse_mode: NmseMode,
    pub seed: u64,
    /// Fit Volterra coefficients with Adam rather than least squares.
    pub volterra_gradient: bool,
    /// Stop once this many epochs pass without a test improvement.
    pub patience: Option<usize>,
    /// Written whenever the test loss improves.
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 400,
            batch_size: 32,
            micro_batch: 0,
            learning_rate: 1e-3,
            final_learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            nmse_mode: NmseMode::Variance,
            seed: 0,
            volterra_gradient: false,
            patience: None,
            checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::validation("epochs and batch size must be positive"));
        }
        let rates = [self.learning_rate, self.final_learning_rate];
        if rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::validation("learning rates must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return Err(Error::validation("Adam betas must lie in [0, 1) and eps be positive"));
        }
        Ok(())
    }

    /// Learning rate of step `step` out of `total`.
    pub fn learning_rate_at(&self, step: usize, total: usize) -> f64 {
        let progress = if total > 1 {
            step as f64 / (total - 1) as f64
        } else {
            0.0
        };
        self.final_learning_rate + 0.5 * (self.learning_rate - self.final_learning_rate) * (1.0 + (PI * progress).cos())
    }

    /// Seed of the parameter initialisation.
    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, INIT_STREAM, 0)
    }

    fn micro_batch_for(&self, kind: ModelKind) -> usize {
        if self.micro_batch > 0 {
            return self.micro_batch.min(self.batch_size);
        }
        let default = match kind {
            ModelKind::Volterra | ModelKind::Lstm => 32,
            ModelKind::Tdnn => 4,
            ModelKind::Cat => 1,
        };
        default.min(self.batch_size)
    }
}

/// Sequences per inference call when evaluating a model of this kind.
pub fn eval_batch(kind: ModelKind) -> usize {
    match kind {
        ModelKind::Volterra => 64,
        ModelKind::Tdnn => 8,
        ModelKind::Lstm => 64,
        ModelKind::Cat => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// Counted from 1.
    pub epoch: usize,
    /// Mean per-sequence NMSE over the epoch's mini-batches, each measured
    /// before its update.
    pub train_nmse: f64,
    pub test_nmse: f64,
    pub train_seconds: f64,
    pub test_seconds: f64,
    pub learning_rate: f64,
}

/// Outcome of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub model: ModelConfig,
    pub param_count: usize,
    pub precision: &'static str,
    pub config: TrainConfig,
    pub init_seed: u64,
    pub train_master_seed: u64,
    pub test_master_seed: u64,
    pub symbol_rate_fraction: f64,
    pub train_sequences: usize,
    pub test_sequences: usize,
    pub sequence_len: usize,
    pub epochs: Vec<EpochRecord>,
    /// Epoch (from 1) with the lowest test NMSE; 0 before any epoch.
    pub best_epoch: usize,
    pub best_test_nmse: f64,
    pub best_test_nrmse: f64,
    pub early_stopped: bool,
    /// Volterra models fitted in closed form report a single epoch.
    pub closed_form: bool,
}

impl TrainReport {
    /// Structured `key = value` text followed by a per-epoch table.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "model = {}", self.model.describe());
        let _ = writeln!(s, "param_count = {}", self.param_count);
        let _ = writeln!(s, "precision = {}", self.precision);
        let _ = writeln!(s, "closed_form = {}", self.closed_form);
        let _ = writeln!(s, "symbol_rate_fraction = {}", self.symbol_rate_fraction);
        let _ = writeln!(s, "train_sequences = {}", self.train_sequences);
        let _ = writeln!(s, "test_sequences = {}", self.test_sequences);
        let _ = writeln!(s, "sequence_len = {}", self.sequence_len);
        let _ = writeln!(s, "\n[seeds]");
        let _ = writeln!(s, "train_seed = {}", c.seed);
        let _ = writeln!(s, "init_seed = {}", self.init_seed);
        let _ = writeln!(s, "train_data_seed = {}", self.train_master_seed);
        let _ = writeln!(s, "test_data_seed = {}", self.test_master_seed);
        let _ = writeln!(s, "\n[optimizer]");
        let _ = writeln!(s, "epochs = {}", c.epochs);
        let _ = writeln!(s, "batch_size = {}", c.batch_size);
        let _ = writeln!(s, "micro_batch = {}", c.micro_batch_for(self.model.kind()));
        let _ = writeln!(s, "learning_rate = {:e}", c.learning_rate);
        let _ = writeln!(s, "final_learning_rate = {:e}", c.final_learning_rate);
        let _ = writeln!(s, "beta1 = {}", c.beta1);
        let _ = writeln!(s, "beta2 = {}", c.beta2);
        let _ = writeln!(s, "adam_eps = {:e}", c.adam_eps);
        let _ = writeln!(s, "nmse_mode = {}", c.nmse_mode.name());
        let _ = writeln!(s, "\n[result]");
        let _ = writeln!(s, "epochs_run = {}", self.epochs.len());
        let _ = writeln!(s, "early_stopped = {}", self.early_stopped);
        let _ = writeln!(s, "best_epoch = {}", self.best_epoch);
        let _ = writeln!(s, "best_test_nmse = {:.9e}", self.best_test_nmse);
        let _ = writeln!(s, "best_test_nrmse = {:.9e}", self.best_test_nrmse);
        let _ = writeln!(s, "\n[epochs]");
        let _ = writeln!(s, "epoch,train_nmse,test_nmse,train_seconds,test_seconds,learning_rate");
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{:.9e},{:.9e},{:.6},{:.6},{:.6e}",
                e.epoch, e.train_nmse, e.test_nmse, e.train_seconds, e.test_seconds, e.learning_rate
            );
        }
        s
    }
}

/// Keeps the value offered at the lowest loss seen so far.
///
/// Ties keep the earlier value, and a non-finite loss never replaces one.
#[derive(Debug, Clone)]
pub struct BestTracker<M> {
    best: Option<(usize, f64, M)>,
}

impl<M> Default for BestTracker<M> {
    fn default() -> Self {
        Self { best: None }
    }
}

impl<M> BestTracker<M> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Offer epoch `epoch` with loss `loss`; `make` runs only on improvement.
    pub fn offer(&mut self, epoch: usize, loss: f64, make: impl FnOnce() -> M) -> bool {
        let improved = loss.is_finite() && self.best.as_ref().is_none_or(|(_, b, _)| loss < *b);
        if improved {
            self.best = Some((epoch, loss, make()));
        }
        improved
    }

    pub fn epoch(&self) -> Option<usize> {
        self.best.as_ref().map(|(e, _, _)| *e)
    }

    pub fn loss(&self) -> Option<f64> {
        self.best.as_ref().map(|(_, l, _)| *l)
    }

    pub fn get(&self) -> Option<&M> {
        self.best.as_ref().map(|(_, _, m)| m)
    }

    pub fn into_inner(self) -> Option<M> {
        self.best.map(|(_, _, m)| m)
    }
}

/// Mean per-sequence NMSE of `model` over `data`, with its wall time.
pub fn evaluate<T: Real>(model: &Model<T>, data: &Dataset, mode: NmseMode) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::validation("cannot evaluate on an empty dataset"));
    }
    let start = Instant::now();
    let mut total = 0.0;
    for chunk in data.sequences.chunks(eval_batch(model.kind())) {
        let inputs: Vec<&[f32]> = chunk.iter().map(|s| s.input.as_slice()).collect();
        let preds = model.predict(&inputs)?;
        for (seq, pred) in chunk.iter().zip(&preds) {
            let pred: Vec<f64> = pred.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
            total += nmse_with(&seq.target, &pred, mode)?;
        }
    }
    Ok((total / data.len() as f64, start.elapsed().as_secs_f64()))
}

/// A trained model: the parameters from the best test epoch and the report.
#[derive(Debug, Clone)]
pub struct TrainRun<T> {
    pub report: TrainReport,
    pub best: Model<T>,
}

fn check_data(train_set: &Dataset, test_set: &Dataset) -> Result<()> {
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::validation("train and test sets must be non-empty"));
    }
    if train_set.symbol_rate_fraction != test_set.symbol_rate_fraction {
        return Err(Error::validation(format!(
            "train set is at {}·f_R but test set at {}·f_R",
            train_set.symbol_rate_fraction, test_set.symbol_rate_fraction
        )));
    }
    if train_set.sequence_len != test_set.sequence_len {
        return Err(Error::validation("train and test sequences differ in length"));
    }
    Ok(())
}

fn precision_name<T: Real>() -> &'static str {
    if std::mem::size_of::<T>() == 4 {
        "f32"
    } else {
        "f64"
    }
}

/// Train a freshly initialised model on `train_set`, evaluating on
/// `test_set` after every epoch and keeping the parameters with the lowest
/// test NMSE.
///
/// Everything is single-threaded and seeded from `cfg.seed`, so a rerun
/// reproduces the per-epoch losses bit for bit. A non-finite loss or
/// gradient aborts with [`Error::Diverged`] carrying the epochs completed.
pub fn train<T: Real>(
    model: ModelConfig,
    train_set: &Dataset,
    test_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainRun<T>> {
    model.validate()?;
    let initial = Model::<T>::init(model, cfg.init_seed())?;
    train_from(initial, train_set, test_set, cfg, |_| {})
}

/// [`train`] starting from given parameters, calling `on_epoch` after
/// every epoch.
pub fn train_from<T: Real>(
    initial: Model<T>,
    train_set: &Dataset,
    test_set: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainRun<T>> {
    cfg.validate()?;
    check_data(train_set, test_set)?;
    let model = initial.config;
    let current = initial;
    let mut report = TrainReport {
        model,
        param_count: current.param_count(),
        precision: precision_name::<T>(),
        config: cfg.clone(),
        init_seed: cfg.init_seed(),
        train_master_seed: train_set.master_seed,
        test_master_seed: test_set.master_seed,
        symbol_rate_fraction: train_set.symbol_rate_fraction,
        train_sequences: train_set.len(),
        test_sequences: test_set.len(),
        sequence_len: train_set.sequence_len,
        epochs: Vec::new(),
        best_epoch: 0,
        best_test_nmse: f64::INFINITY,
        best_test_nrmse: f64::INFINITY,
        early_stopped: false,
        closed_form: false,
    };
    if let (ModelConfig::Volterra { memory, ridge, .. }, false) = (model, cfg.volterra_gradient) {
        let run = fit_volterra(current, memory, ridge, train_set, test_set, report)?;
        on_epoch(&run.report.epochs[0]);
        return Ok(run);
    }

    let mut current = current;
    let mut state = AdamState::new(&current.params);
    let mut best = BestTracker::new();
    let mut stale = 0;

    for epoch in 1..=cfg.epochs {
        let pass = match train_epoch(&mut current, &mut state, train_set, cfg, epoch) {
            Err(Error::Diverged { epoch, .. }) => return Err(diverged(epoch, report)),
            other => other?,
        };
        let (test_nmse, test_seconds) = evaluate(&current, test_set, cfg.nmse_mode)?;
        if !test_nmse.is_finite() {
            return Err(diverged(epoch, report));
        }
        report.epochs.push(EpochRecord {
            epoch,
            train_nmse: pass.mean_loss,
            test_nmse,
            train_seconds: pass.seconds,
            test_seconds,
            learning_rate: pass.learning_rate,
        });
        on_epoch(report.epochs.last().expect("just pushed"));
        if best.offer(epoch, test_nmse, || current.clone()) {
            stale = 0;
            record_best(&mut report, epoch, test_nmse);
            if let Some(path) = &cfg.checkpoint {
                current.to_checkpoint().save(path)?;
            }
        } else {
            stale += 1;
            if cfg.patience.is_some_and(|p| stale >= p) {
                report.early_stopped = true;
                break;
            }
        }
    }
    let best = best.into_inner().expect("at least one finite epoch");
    Ok(TrainRun { report, best })
}

/// One shuffled pass of mini-batch Adam over a training set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochPass {
    /// Mean per-sequence loss, each batch measured before its update.
    pub mean_loss: f64,
    /// Rate used by the epoch's last step.
    pub learning_rate: f64,
    pub seconds: f64,
}

/// Run epoch `epoch` (from 1) of the schedule described by `cfg`.
///
/// The batch order is drawn from `cfg.seed` and the epoch number alone.
/// Returns [`Error::Diverged`] without a report on a non-finite loss or
/// gradient.
pub fn train_epoch<T: Real>(
    model: &mut Model<T>,
    state: &mut AdamState<T>,
    data: &Dataset,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochPass> {
    let n = data.len();
    if n == 0 {
        return Err(Error::validation("cannot train on an empty dataset"));
    }
    let batches = n.div_ceil(cfg.batch_size);
    let total_steps = batches * cfg.epochs.max(epoch);
    let micro = cfg.micro_batch_for(model.kind());
    let len = data.sequence_len;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
        cfg.seed,
        SHUFFLE_STREAM,
        epoch as u64,
    )));
    let stop = || Error::Diverged { epoch, report: None };

    let start = Instant::now();
    let mut loss_sum = 0.0;
    let mut lr = cfg.learning_rate;
    for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
        lr = cfg.learning_rate_at((epoch - 1) * batches + b, total_steps);
        let weight = 1.0 / batch.len() as f64;
        let mut grads: Vec<Array2<T>> = model.params.values().iter().map(|v| Array2::zeros(v.dim())).collect();
        for part in batch.chunks(micro) {
            let mut tape = Tape::new();
            let bound = model.params.bind(&mut tape, true);
            let x = Array2::from_shape_fn((part.len(), len), |(r, t)| {
                T::of(data.sequences[part[r]].input[t] as f64)
            });
            let xv = tape.constant(x);
            let y = model.forward(&mut tape, &bound, xv)?;
            let targets: Vec<&[f32]> = part.iter().map(|&i| data.sequences[i].target.as_slice()).collect();
            let loss = nmse_loss(&mut tape, y, &targets, cfg.nmse_mode, weight)?;
            let value = tape.scalar(loss).to_f64().unwrap_or(f64::NAN);
            if !value.is_finite() {
                return Err(stop());
            }
            loss_sum += value * batch.len() as f64;
            let mut g = tape.backward(loss)?;
            for ((acc, &v), p) in grads.iter_mut().zip(bound.vars()).zip(model.params.values()) {
                *acc += &g.take_or_zeros(v, p.dim());
            }
        }
        let adam = AdamConfig {
            learning_rate: lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
        };
        match adam_step(&mut model.params, &grads, state, &adam) {
            Err(Error::Optimizer { .. }) => return Err(stop()),
            other => other?,
        }
    }
    Ok(EpochPass {
        mean_loss: loss_sum / n as f64,
        learning_rate: lr,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn record_best(report: &mut TrainReport, epoch: usize, test_nmse: f64) {
    report.best_epoch = epoch;
    report.best_test_nmse = test_nmse;
    report.best_test_nrmse = test_nmse.sqrt();
}

fn diverged(epoch: usize, report: TrainReport) -> Error {
    Error::Diverged {
        epoch,
        report: Some(Box::new(report)),
    }
}

fn fit_volterra<T: Real>(
    mut model: Model<T>,
    memory: usize,
    ridge: f64,
    train_set: &Dataset,
    test_set: &Dataset,
    mut report: TrainReport,
) -> Result<TrainRun<T>> {
    let start = Instant::now();
    let to64 = |v: &[f32]| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
    let inputs: Vec<Vec<f64>> = train_set.sequences.iter().map(|s| to64(&s.input)).collect();
    let targets: Vec<Vec<f64>> = train_set.sequences.iter().map(|s| to64(&s.target)).collect();
    let xs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let ys: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    let fit = volterra_regress(&xs, &ys, memory, ridge)?;
    let coeffs = model.params.get_mut("coeffs")?;
    for (dst, &c) in coeffs.iter_mut().zip(&fit.coeffs) {
        *dst = T::of(c);
    }
    let train_seconds = start.elapsed().as_secs_f64();
    let mode = report.config.nmse_mode;
    let train_nmse = if mode == NmseMode::Variance {
        fit.train_nmse
    } else {
        evaluate(&model, train_set, mode)?.0
    };
    let (test_nmse, test_seconds) = evaluate(&model, test_set, mode)?;
    report.closed_form = true;
    report.epochs.push(EpochRecord {
        epoch: 1,
        train_nmse,
        test_nmse,
        train_seconds,
        test_seconds,
        learning_rate: 0.0,
    });
    record_best(&mut report, 1, test_nmse);
    if let Some(path) = &report.config.checkpoint {
        model.to_checkpoint().save(path)?;
    }
    Ok(TrainRun { report, best: model })
}
