use ndarray::Array2;
use rand::Rng;

use super::{linear, ModelConfig};
use crate::autodiff::{uniform_fan_in, Bound, ParamStore, Real, Tape, Var};
use crate::error::{Error, Result};

pub(super) fn init<T: Real, R: Rng>(hidden: usize, layers: usize, rng: &mut R) -> Result<ParamStore<T>> {
    let mut p = ParamStore::new();
    for l in 0..layers {
        let input = if l == 0 { 1 } else { hidden };
        // Gate blocks along the columns: input, forget, cell, output.
        p.insert(
            format!("lstm{l}.w"),
            uniform_fan_in(input + hidden, 4 * hidden, input + hidden, rng),
        )?;
        p.insert(format!("lstm{l}.b"), Array2::zeros((1, 4 * hidden)))?;
    }
    p.insert("head0.w", uniform_fan_in(hidden, hidden, hidden, rng))?;
    p.insert("head0.b", Array2::zeros((1, hidden)))?;
    p.insert("head1.w", uniform_fan_in(hidden, 1, hidden, rng))?;
    p.insert("head1.b", Array2::zeros((1, 1)))?;
    Ok(p)
}

/// Hidden and cell state of every layer, as tape values of shape `B × H`.
#[derive(Debug, Clone)]
pub struct LstmState {
    pub h: Vec<Var>,
    pub c: Vec<Var>,
}

fn dims(config: &ModelConfig) -> Result<(usize, usize)> {
    match *config {
        ModelConfig::Lstm { hidden_nodes, layers } => Ok((hidden_nodes, layers)),
        _ => Err(Error::validation("LSTM forward needs an LSTM config")),
    }
}

/// Run the recurrence over a `B × L` batch from `state` (zeros if `None`).
/// Returns the `B × L` output and the final state.
pub fn lstm_run<T: Real>(
    tape: &mut Tape<T>,
    bound: &Bound,
    config: &ModelConfig,
    input: Var,
    state: Option<LstmState>,
) -> Result<(Var, LstmState)> {
    let (hidden, layers) = dims(config)?;
    let (b, l) = tape.shape(input);
    let mut state = match state {
        Some(s) => {
            if s.h.len() != layers || s.c.len() != layers {
                return Err(Error::validation("state layer count does not match the config"));
            }
            s
        }
        None => {
            let zeros: Vec<Var> = (0..layers).map(|_| tape.constant(Array2::zeros((b, hidden)))).collect();
            LstmState {
                h: zeros.clone(),
                c: zeros,
            }
        }
    };
    let weights: Vec<(Var, Var)> = (0..layers)
        .map(|i| Ok((bound.get(&format!("lstm{i}.w"))?, bound.get(&format!("lstm{i}.b"))?)))
        .collect::<Result<_>>()?;

    let mut tops = Vec::with_capacity(l);
    for t in 0..l {
        let mut x = tape.slice_cols(input, t, 1)?;
        for (layer, &(w, bias)) in weights.iter().enumerate() {
            let joined = tape.concat_cols(&[x, state.h[layer]])?;
            let z = linear(tape, joined, w, bias)?;
            let zi = tape.slice_cols(z, 0, hidden)?;
            let zf = tape.slice_cols(z, hidden, hidden)?;
            let zg = tape.slice_cols(z, 2 * hidden, hidden)?;
            let zo = tape.slice_cols(z, 3 * hidden, hidden)?;
            let i = tape.sigmoid(zi);
            let f = tape.sigmoid(zf);
            let g = tape.tanh(zg);
            let o = tape.sigmoid(zo);
            let keep = tape.mul(f, state.c[layer])?;
            let write = tape.mul(i, g)?;
            let c = tape.add(keep, write)?;
            let tc = tape.tanh(c);
            let h = tape.mul(o, tc)?;
            state.c[layer] = c;
            state.h[layer] = h;
            x = h;
        }
        tops.push(x);
    }

    // Head over all steps at once: rows are time-major (t, b).
    let stacked = tape.concat_rows(&tops)?;
    let z = linear(tape, stacked, bound.get("head0.w")?, bound.get("head0.b")?)?;
    let a = tape.relu(z);
    let y = linear(tape, a, bound.get("head1.w")?, bound.get("head1.b")?)?;
    let by_time = tape.reshape(y, l, b)?;
    Ok((tape.transpose(by_time), state))
}

/// Stacked LSTM from zero state with a ReLU MLP head per step.
pub fn lstm_forward<T: Real>(tape: &mut Tape<T>, bound: &Bound, config: &ModelConfig, input: Var) -> Result<Var> {
    lstm_run(tape, bound, config, input, None).map(|(y, _)| y)
}
