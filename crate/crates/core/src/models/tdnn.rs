use ndarray::Array2;
use rand::Rng;

use super::{linear, ModelConfig};
use crate::autodiff::{uniform_fan_in, Bound, ParamStore, Real, Tape, Var};
use crate::error::{Error, Result};

pub(super) fn init<T: Real, R: Rng>(window: usize, hidden: usize, layers: usize, rng: &mut R) -> Result<ParamStore<T>> {
    let mut p = ParamStore::new();
    p.insert("hidden0.w", uniform_fan_in(window, hidden, window, rng))?;
    p.insert("hidden0.b", Array2::zeros((1, hidden)))?;
    for l in 1..layers {
        p.insert(format!("hidden{l}.w"), uniform_fan_in(hidden, hidden, hidden, rng))?;
        p.insert(format!("hidden{l}.b"), Array2::zeros((1, hidden)))?;
    }
    p.insert("out.w", uniform_fan_in(hidden, 1, hidden, rng))?;
    p.insert("out.b", Array2::zeros((1, 1)))?;
    Ok(p)
}

/// Causal window of `window` samples feeding a ReLU MLP at every position.
pub fn tdnn_forward<T: Real>(tape: &mut Tape<T>, bound: &Bound, config: &ModelConfig, input: Var) -> Result<Var> {
    let &ModelConfig::Tdnn {
        window, hidden_layers, ..
    } = config
    else {
        return Err(Error::validation("tdnn_forward needs a TDNN config"));
    };
    let (b, l) = tape.shape(input);
    let column = tape.reshape(input, b * l, 1)?;
    let pre = tape.causal_conv(column, bound.get("hidden0.w")?, window, l)?;
    let pre = tape.add_row(pre, bound.get("hidden0.b")?)?;
    let mut h = tape.relu(pre);
    for i in 1..hidden_layers {
        let z = linear(
            tape,
            h,
            bound.get(&format!("hidden{i}.w"))?,
            bound.get(&format!("hidden{i}.b"))?,
        )?;
        h = tape.relu(z);
    }
    let y = linear(tape, h, bound.get("out.w")?, bound.get("out.b")?)?;
    tape.reshape(y, b, l)
}
