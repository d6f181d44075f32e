use ndarray::{Array2, Zip};

use super::params::ParamStore;
use super::tape::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub first_moment: Vec<Array2<T>>,
    pub second_moment: Vec<Array2<T>>,
    pub step_count: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(store: &ParamStore<T>) -> Self {
        let zeros: Vec<Array2<T>> = store.values().iter().map(|v| Array2::zeros(v.dim())).collect();
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
        }
    }
}

/// One bias-corrected Adam update of every tensor in `store`.
///
/// Gradients are checked before anything changes, so a non-finite gradient
/// leaves both the parameters and the state untouched.
pub fn adam_step<T: Real>(
    store: &mut ParamStore<T>,
    grads: &[Array2<T>],
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    if grads.len() != store.len() || state.first_moment.len() != store.len() {
        return Err(Error::validation(format!(
            "adam: {} parameters, {} gradients, {} moments",
            store.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    for ((name, p), g) in store.iter().zip(grads) {
        if p.dim() != g.dim() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                lhs: p.shape().to_vec(),
                rhs: g.shape().to_vec(),
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Optimizer {
                parameter: name.to_string(),
            });
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let c1 = T::one() - T::of(cfg.beta1.powi(t));
    let c2 = T::one() - T::of(cfg.beta2.powi(t));
    let lr = T::of(cfg.learning_rate);
    let eps = T::of(cfg.eps);
    for (((p, g), m), v) in store
        .values_mut()
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *p = *p - lr * mhat / (vhat.sqrt() + eps);
        });
    }
    Ok(())
}
