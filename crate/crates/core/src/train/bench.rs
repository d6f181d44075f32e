use std::fmt::Write as _;
use std::time::Instant;

use super::fit::{evaluate, train_epoch, TrainConfig};
use crate::autodiff::{AdamState, Real};
use crate::error::{Error, Result};
use crate::laser::{DriveConfig, LaserParams};
use crate::models::{volterra_regress, Model, ModelConfig, ModelKind};
use crate::signal::{simulate_target, Dataset};

/// Mean and coefficient of variation of repeated wall-time measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    /// Seconds of every measured run, warm-up excluded.
    pub runs: Vec<f64>,
}

impl Timing {
    pub fn mean(&self) -> f64 {
        self.runs.iter().sum::<f64>() / self.runs.len() as f64
    }

    /// Sample standard deviation over the mean.
    pub fn cv(&self) -> f64 {
        let n = self.runs.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        let var = self.runs.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        var.sqrt() / m
    }
}

/// Time `f` once unmeasured, then `runs` times.
pub fn time_runs(runs: usize, mut f: impl FnMut() -> Result<()>) -> Result<Timing> {
    if runs == 0 {
        return Err(Error::validation("need at least one measured run"));
    }
    f()?;
    let mut out = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        f()?;
        out.push(start.elapsed().as_secs_f64());
    }
    Ok(Timing { runs: out })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelTiming {
    pub model: ModelKind,
    /// One training epoch over the dataset.
    pub train: Timing,
    /// One inference pass over the dataset.
    pub test: Timing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingTable {
    pub samples: usize,
    /// Generating every target of the dataset with the adaptive solver.
    pub solver: Timing,
    pub models: Vec<ModelTiming>,
}

impl TimingTable {
    pub fn solver_seconds_per_sample(&self) -> f64 {
        self.solver.mean() / self.samples as f64
    }

    pub fn test_seconds_per_sample(&self, m: &ModelTiming) -> f64 {
        m.test.mean() / self.samples as f64
    }

    /// Solver time over inference time; above 1 means the surrogate is faster.
    pub fn solver_over_inference(&self, m: &ModelTiming) -> f64 {
        self.solver.mean() / m.test.mean()
    }

    pub fn solver_over_training(&self, m: &ModelTiming) -> f64 {
        self.solver.mean() / m.train.mean()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "model,train_seconds_per_epoch,train_cv,test_seconds_per_epoch,test_cv,test_seconds_per_sample,\
             solver_over_training,solver_over_inference\n",
        );
        for m in &self.models {
            let _ = writeln!(
                s,
                "{},{:.6e},{:.4},{:.6e},{:.4},{:.6e},{:.4},{:.4}",
                m.model,
                m.train.mean(),
                m.train.cv(),
                m.test.mean(),
                m.test.cv(),
                self.test_seconds_per_sample(m),
                self.solver_over_training(m),
                self.solver_over_inference(m)
            );
        }
        let _ = writeln!(
            s,
            "solver,,,{:.6e},{:.4},{:.6e},,1.0000",
            self.solver.mean(),
            self.solver.cv(),
            self.solver_seconds_per_sample()
        );
        s
    }
}

/// Wall time of one solver pass regenerating every target in `data`.
pub fn solver_pass(data: &Dataset, params: &LaserParams) -> Result<()> {
    let mut drive = DriveConfig::for_fraction(params, data.symbol_rate_fraction)?;
    drive.samples_per_symbol = data.samples_per_symbol;
    for seq in &data.sequences {
        let x: Vec<f64> = seq.input.iter().map(|&v| v as f64).collect();
        simulate_target(&x, &drive, params, data.tolerances)?;
    }
    Ok(())
}

/// Per-epoch training and inference time of each model on `data`, against
/// the time the solver needs to produce the same samples.
///
/// Each measurement runs once unmeasured and then `runs` times. Training
/// epochs continue from the given parameters on a private copy; Volterra
/// models fitted in closed form time the least-squares fit instead.
pub fn benchmark_epoch_time<T: Real>(
    models: &[Model<T>],
    data: &Dataset,
    params: &LaserParams,
    cfg: &TrainConfig,
    runs: usize,
) -> Result<TimingTable> {
    if data.is_empty() {
        return Err(Error::validation("benchmark needs a non-empty dataset"));
    }
    let solver = time_runs(runs, || solver_pass(data, params))?;
    let mut rows = Vec::with_capacity(models.len());
    for model in models {
        let train = match model.config {
            ModelConfig::Volterra { memory, ridge, .. } if !cfg.volterra_gradient => {
                let xs: Vec<Vec<f64>> = data
                    .sequences
                    .iter()
                    .map(|s| s.input.iter().map(|&v| v as f64).collect())
                    .collect();
                let ys: Vec<Vec<f64>> = data
                    .sequences
                    .iter()
                    .map(|s| s.target.iter().map(|&v| v as f64).collect())
                    .collect();
                let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
                let yr: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
                time_runs(runs, || volterra_regress(&xr, &yr, memory, ridge).map(|_| ()))?
            }
            _ => {
                let mut work = model.clone();
                let mut state = AdamState::new(&work.params);
                let mut epoch = 0;
                time_runs(runs, || {
                    epoch += 1;
                    train_epoch(&mut work, &mut state, data, cfg, epoch).map(|_| ())
                })?
            }
        };
        let test = time_runs(runs, || evaluate(model, data, cfg.nmse_mode).map(|_| ()))?;
        rows.push(ModelTiming {
            model: model.kind(),
            train,
            test,
        });
    }
    Ok(TimingTable {
        samples: data.total_samples(),
        solver,
        models: rows,
    })
}
