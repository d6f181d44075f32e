use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Axis};

use crate::autodiff::{Bound, ParamStore, Real, Tape, Var};
use crate::error::{Error, Result};
use crate::train::nmse;

/// Default ridge weight added to the diagonal of the normal equations.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Number of second-order Volterra features for a given memory:
/// a constant, `memory` linear taps and `memory·(memory+1)/2` products.
pub fn feature_count(memory: usize) -> usize {
    1 + memory + memory * (memory + 1) / 2
}

/// Feature matrix (one row per output sample) of a single waveform.
///
/// Columns: `1`, then `x[t−i]` for `i < memory`, then `x[t−i]·x[t−j]` for
/// `i ≤ j < memory` in row-major order. Samples before the start are
/// replaced by `x[0]`.
pub fn volterra_features(x: &[f64], memory: usize) -> Array2<f64> {
    let f = feature_count(memory);
    let mut out = Array2::zeros((x.len(), f));
    let mut taps = vec![0.0; memory];
    for (t, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        for (i, tap) in taps.iter_mut().enumerate() {
            *tap = if t >= i { x[t - i] } else { x[0] };
        }
        row[0] = 1.0;
        let mut k = 1;
        for &v in &taps {
            row[k] = v;
            k += 1;
        }
        for i in 0..memory {
            for j in i..memory {
                row[k] = taps[i] * taps[j];
                k += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolterraFit {
    pub coeffs: Vec<f64>,
    /// Mean per-sequence NMSE of the fit on its own training data.
    pub train_nmse: f64,
}

/// Ridge least-squares fit of the Volterra coefficients.
///
/// Solves `(XᵀX + λI)·c = Xᵀy` with `X` stacking the feature rows of every
/// sample of every sequence.
pub fn volterra_regress(inputs: &[&[f64]], targets: &[&[f64]], memory: usize, ridge: f64) -> Result<VolterraFit> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::validation(format!(
            "need matching non-empty inputs and targets, got {} and {}",
            inputs.len(),
            targets.len()
        )));
    }
    let f = feature_count(memory);
    let mut gram = Array2::<f64>::zeros((f, f));
    let mut rhs = Array2::<f64>::zeros((f, 1));
    for (x, y) in inputs.iter().zip(targets) {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::validation("input and target lengths differ"));
        }
        let feats = volterra_features(x, memory);
        let yv = Array2::from_shape_vec((y.len(), 1), y.to_vec()).expect("column");
        gram += &feats.t().dot(&feats);
        rhs += &feats.t().dot(&yv);
    }
    let a = DMatrix::from_fn(f, f, |i, j| gram[[i, j]] + if i == j { ridge } else { 0.0 });
    let b = DVector::from_fn(f, |i, _| rhs[[i, 0]]);
    let chol = a.clone().cholesky().ok_or_else(|| Error::Numeric {
        message: "Volterra normal equations are not positive definite".into(),
        residual: f64::NAN,
    })?;
    let c = chol.solve(&b);
    let residual = (&a * &c - &b).norm() / (a.norm() * c.norm() + b.norm()).max(f64::MIN_POSITIVE);
    if !residual.is_finite() || residual > 1e-6 {
        return Err(Error::Numeric {
            message: "Volterra normal equations are rank deficient".into(),
            residual,
        });
    }
    let coeffs: Vec<f64> = c.iter().copied().collect();
    let mut total = 0.0;
    for (x, y) in inputs.iter().zip(targets) {
        total += nmse(y, &volterra_predict(&coeffs, x, memory)?)?;
    }
    Ok(VolterraFit {
        coeffs,
        train_nmse: total / inputs.len() as f64,
    })
}

/// Causal evaluation of the truncated expansion.
pub fn volterra_predict(coeffs: &[f64], x: &[f64], memory: usize) -> Result<Vec<f64>> {
    let f = feature_count(memory);
    if coeffs.len() != f {
        return Err(Error::validation(format!(
            "expected {f} coefficients, got {}",
            coeffs.len()
        )));
    }
    let mut taps = vec![0.0; memory];
    Ok((0..x.len())
        .map(|t| {
            for (i, tap) in taps.iter_mut().enumerate() {
                *tap = if t >= i { x[t - i] } else { x[0] };
            }
            let mut acc = coeffs[0];
            let mut k = 1;
            for &v in &taps {
                acc += coeffs[k] * v;
                k += 1;
            }
            for i in 0..memory {
                for j in i..memory {
                    acc += coeffs[k] * taps[i] * taps[j];
                    k += 1;
                }
            }
            acc
        })
        .collect())
}

pub(super) fn init<T: Real>(memory: usize) -> Result<ParamStore<T>> {
    let mut p = ParamStore::new();
    p.insert("coeffs", Array2::zeros((feature_count(memory), 1)))?;
    Ok(p)
}

/// Differentiable form used when the coefficients are trained by gradient.
pub(super) fn forward<T: Real>(tape: &mut Tape<T>, bound: &Bound, input: Var, memory: usize) -> Result<Var> {
    let (b, l) = tape.shape(input);
    let f = feature_count(memory);
    let mut feats = Array2::<T>::zeros((b * l, f));
    for (s, row) in tape.value(input).rows().into_iter().enumerate() {
        let x: Vec<f64> = row.iter().map(|v| v.to_f64().expect("finite")).collect();
        let fs = volterra_features(&x, memory);
        feats
            .slice_mut(ndarray::s![s * l..(s + 1) * l, ..])
            .assign(&fs.mapv(T::of));
    }
    let fv = tape.constant(feats);
    let y = tape.matmul(fv, bound.get("coeffs")?)?;
    tape.reshape(y, b, l)
}
