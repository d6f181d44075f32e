use ndarray::Array2;

use crate::autodiff::{Real, Tape, Var};
use crate::error::{Error, Result};

/// Normaliser of the squared error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NmseMode {
    /// Σ(y − ȳ)²: a constant prediction at the reference mean scores 1.
    #[default]
    Variance,
    /// Σy².
    MeanSquare,
}

impl NmseMode {
    pub fn name(self) -> &'static str {
        match self {
            NmseMode::Variance => "variance",
            NmseMode::MeanSquare => "mean-square",
        }
    }
}

impl std::fmt::Display for NmseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NmseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variance" => Ok(NmseMode::Variance),
            "mean-square" => Ok(NmseMode::MeanSquare),
            _ => Err(Error::validation(format!("unknown NMSE mode {s:?}"))),
        }
    }
}

/// Denominator of the NMSE for one reference waveform.
pub fn nmse_denominator<T: Copy + Into<f64>>(reference: &[T], mode: NmseMode) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::validation("empty reference waveform"));
    }
    let denom = match mode {
        NmseMode::Variance => {
            let mean = reference.iter().map(|&v| v.into()).sum::<f64>() / reference.len() as f64;
            reference.iter().map(|&v| (v.into() - mean).powi(2)).sum::<f64>()
        }
        NmseMode::MeanSquare => reference.iter().map(|&v| v.into().powi(2)).sum::<f64>(),
    };
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::Degenerate("reference waveform has no energy to normalise by"));
    }
    Ok(denom)
}

/// Σ(y − ŷ)² / Σ(y − ȳ)² (or / Σy² in mean-square mode).
pub fn nmse_with<T: Copy + Into<f64>, U: Copy + Into<f64>>(
    reference: &[T],
    prediction: &[U],
    mode: NmseMode,
) -> Result<f64> {
    if reference.len() != prediction.len() {
        return Err(Error::validation(format!(
            "reference has {} samples, prediction {}",
            reference.len(),
            prediction.len()
        )));
    }
    let denom = nmse_denominator(reference, mode)?;
    let num: f64 = reference
        .iter()
        .zip(prediction)
        .map(|(&y, &p)| (y.into() - p.into()).powi(2))
        .sum();
    Ok(num / denom)
}

pub fn nmse<T: Copy + Into<f64>, U: Copy + Into<f64>>(reference: &[T], prediction: &[U]) -> Result<f64> {
    nmse_with(reference, prediction, NmseMode::Variance)
}

pub fn nrmse<T: Copy + Into<f64>, U: Copy + Into<f64>>(reference: &[T], prediction: &[U]) -> Result<f64> {
    nmse(reference, prediction).map(f64::sqrt)
}

/// Training objective on a tape: per-sequence NMSE of a `B × L` prediction,
/// summed with weight `weight` per sequence (use `1/B` for the batch mean).
pub fn nmse_loss<T: Real>(
    tape: &mut Tape<T>,
    prediction: Var,
    targets: &[&[f32]],
    mode: NmseMode,
    weight: f64,
) -> Result<Var> {
    let (b, l) = tape.shape(prediction);
    if targets.len() != b || targets.iter().any(|t| t.len() != l) {
        return Err(Error::ShapeMismatch {
            op: "nmse_loss",
            lhs: vec![b, l],
            rhs: vec![targets.len(), targets.first().map_or(0, |t| t.len())],
        });
    }
    let mut scales = Array2::zeros((b, l));
    for (s, t) in targets.iter().enumerate() {
        let w = T::of(weight / nmse_denominator(t, mode)?);
        scales.row_mut(s).fill(w);
    }
    let y = tape.constant(Array2::from_shape_fn((b, l), |(s, i)| T::of(targets[s][i] as f64)));
    let diff = tape.sub(prediction, y)?;
    let sq = tape.mul(diff, diff)?;
    let w = tape.constant(scales);
    let weighted = tape.mul(sq, w)?;
    Ok(tape.sum(weighted))
}
