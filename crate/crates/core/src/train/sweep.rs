use std::fmt::Write as _;

use super::fit::{train, TrainConfig};
use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::models::{ModelConfig, ModelKind};
use crate::signal::Dataset;

/// Symbol rates of the sweep, as fractions of the relaxation frequency.
pub const SWEEP_FRACTIONS: [f64; 6] = [0.1, 0.25, 0.5, 0.75, 1.0, 1.25];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub model: ModelKind,
    pub fraction: f64,
    /// Best test NRMSE of a model trained from scratch at this rate.
    pub nrmse: f64,
}

/// NRMSE per model and symbol rate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn get(&self, model: ModelKind, fraction: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.fraction == fraction)
            .map(|r| r.nrmse)
    }

    /// NRMSE of one model in order of increasing symbol rate.
    pub fn curve(&self, model: ModelKind) -> Vec<(f64, f64)> {
        let mut c: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.model == model)
            .map(|r| (r.fraction, r.nrmse))
            .collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
        c
    }

    /// `model,fraction,nrmse` with one row per entry, models in table order.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,fraction,nrmse\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:.9e}", r.model, r.fraction, r.nrmse);
        }
        s
    }
}

/// True when every step of `values` is non-decreasing up to a drop of
/// `slack` times the preceding value.
pub fn nondecreasing_within(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] * (1.0 - slack))
}

/// Train every model from scratch at every symbol rate and tabulate the
/// best test NRMSE.
///
/// `datasets(fraction)` supplies the train and test sets of one rate; it is
/// called once per fraction. Rows are grouped by model in the order given,
/// fractions ascending within a model.
pub fn sweep_symbol_rates<T, F>(
    models: &[ModelConfig],
    fractions: &[f64],
    cfg: &TrainConfig,
    mut datasets: F,
) -> Result<SweepTable>
where
    T: Real,
    F: FnMut(f64) -> Result<(Dataset, Dataset)>,
{
    if models.is_empty() || fractions.is_empty() {
        return Err(Error::validation("sweep needs at least one model and one fraction"));
    }
    let mut grid = vec![vec![f64::NAN; fractions.len()]; models.len()];
    for (j, &fraction) in fractions.iter().enumerate() {
        let (train_set, test_set) = datasets(fraction)?;
        if train_set.symbol_rate_fraction != fraction {
            return Err(Error::validation(format!(
                "dataset for {fraction}·f_R was generated at {}·f_R",
                train_set.symbol_rate_fraction
            )));
        }
        for (i, model) in models.iter().enumerate() {
            let run = train::<T>(*model, &train_set, &test_set, cfg)?;
            grid[i][j] = run.report.best_test_nrmse;
        }
    }
    let mut rows = Vec::with_capacity(models.len() * fractions.len());
    for (i, model) in models.iter().enumerate() {
        let mut order: Vec<usize> = (0..fractions.len()).collect();
        order.sort_by(|&a, &b| fractions[a].total_cmp(&fractions[b]));
        rows.extend(order.into_iter().map(|j| SweepRow {
            model: model.kind(),
            fraction: fractions[j],
            nrmse: grid[i][j],
        }));
    }
    Ok(SweepTable { rows })
}
