use ndarray::Array2;
use rand::Rng;

use super::attention::{conv_causal_attention, rk2_residual, AttentionWeights};
use super::{linear, ModelConfig, MAX_POSITIONS};
use crate::autodiff::{normal, uniform_fan_in, Bound, ParamStore, Real, Tape, Var};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

struct Dims {
    d: usize,
    heads: usize,
    window: usize,
    hidden: usize,
    mlp_layers: usize,
    pairs: usize,
}

fn dims(config: &ModelConfig) -> Result<Dims> {
    match *config {
        ModelConfig::Cat {
            embedding,
            heads,
            conv_window,
            mlp_hidden,
            mlp_hidden_layers,
            mlp_sublayers,
        } => Ok(Dims {
            d: embedding,
            heads,
            window: conv_window,
            hidden: mlp_hidden,
            mlp_layers: mlp_hidden_layers,
            pairs: mlp_sublayers,
        }),
        _ => Err(Error::validation("cat_forward needs a CAT config")),
    }
}

fn mlp_widths(dm: &Dims) -> Vec<(usize, usize)> {
    let mut widths = vec![(dm.d, dm.hidden)];
    widths.extend((2..dm.mlp_layers).map(|_| (dm.hidden, dm.hidden)));
    widths.push((dm.hidden, dm.d));
    widths
}

pub(super) fn init<T: Real, R: Rng>(config: &ModelConfig, rng: &mut R) -> Result<ParamStore<T>> {
    let dm = dims(config)?;
    let d = dm.d;
    let mut p = ParamStore::new();
    p.insert("embed.w", uniform_fan_in(1, d, 1, rng))?;
    p.insert("embed.b", Array2::zeros((1, d)))?;
    p.insert("lpe", normal(MAX_POSITIONS, d, 0.02, rng))?;
    for pair in 0..dm.pairs {
        let a = format!("pair{pair}.att");
        for name in ["wq", "wk"] {
            p.insert(
                format!("{a}.{name}"),
                uniform_fan_in(dm.window * d, d, dm.window * d, rng),
            )?;
            p.insert(format!("{a}.b{}", &name[1..]), Array2::zeros((1, d)))?;
        }
        for name in ["wv", "wo"] {
            p.insert(format!("{a}.{name}"), uniform_fan_in(d, d, d, rng))?;
            p.insert(format!("{a}.b{}", &name[1..]), Array2::zeros((1, d)))?;
        }
        p.insert(format!("{a}.ln.gamma"), Array2::ones((1, d)))?;
        p.insert(format!("{a}.ln.beta"), Array2::zeros((1, d)))?;
        let m = format!("pair{pair}.mlp");
        for (i, (fan_in, fan_out)) in mlp_widths(&dm).into_iter().enumerate() {
            p.insert(format!("{m}.w{i}"), uniform_fan_in(fan_in, fan_out, fan_in, rng))?;
            p.insert(format!("{m}.b{i}"), Array2::zeros((1, fan_out)))?;
        }
        p.insert(format!("{m}.ln.gamma"), Array2::ones((1, d)))?;
        p.insert(format!("{m}.ln.beta"), Array2::zeros((1, d)))?;
    }
    p.insert("out.w", uniform_fan_in(d, 1, d, rng))?;
    p.insert("out.b", Array2::zeros((1, 1)))?;
    Ok(p)
}

fn layer_norm<T: Real>(tape: &mut Tape<T>, bound: &Bound, x: Var, prefix: &str) -> Result<Var> {
    let g = bound.get(&format!("{prefix}.gamma"))?;
    let b = bound.get(&format!("{prefix}.beta"))?;
    tape.layer_norm(x, g, b, T::of(LN_EPS))
}

/// Decoder-only convolutional-attention transformer.
///
/// Scalar samples are lifted to `d` dimensions, a learned positional
/// embedding is added, and each sublayer pair applies attention then an MLP,
/// both as Heun residual steps followed by layer normalisation. A final
/// linear layer maps back to one value per position.
pub fn cat_forward<T: Real>(tape: &mut Tape<T>, bound: &Bound, config: &ModelConfig, input: Var) -> Result<Var> {
    let dm = dims(config)?;
    let (b, l) = tape.shape(input);
    if l > MAX_POSITIONS {
        return Err(Error::validation(format!(
            "input length {l} exceeds the {MAX_POSITIONS}-entry positional table"
        )));
    }
    let column = tape.reshape(input, b * l, 1)?;
    let embedded = linear(tape, column, bound.get("embed.w")?, bound.get("embed.b")?)?;
    let positions: Vec<usize> = (0..b).flat_map(|_| 0..l).collect();
    let pos = tape.gather(bound.get("lpe")?, &positions)?;
    let mut z = tape.add(embedded, pos)?;

    for pair in 0..dm.pairs {
        let a = format!("pair{pair}.att");
        let w = AttentionWeights::bind(bound, &a)?;
        z = rk2_residual(tape, z, |t, u| conv_causal_attention(t, u, &w, dm.window, dm.heads, l))?;
        z = layer_norm(tape, bound, z, &format!("{a}.ln"))?;

        let m = format!("pair{pair}.mlp");
        let layers: Vec<(Var, Var)> = (0..dm.mlp_layers)
            .map(|i| Ok((bound.get(&format!("{m}.w{i}"))?, bound.get(&format!("{m}.b{i}"))?)))
            .collect::<Result<_>>()?;
        z = rk2_residual(tape, z, |t, u| {
            let mut h = u;
            for (i, &(w, bias)) in layers.iter().enumerate() {
                h = linear(t, h, w, bias)?;
                if i + 1 < layers.len() {
                    h = t.relu(h);
                }
            }
            Ok(h)
        })?;
        z = layer_norm(tape, bound, z, &format!("{m}.ln"))?;
    }
    let y = linear(tape, z, bound.get("out.w")?, bound.get("out.b")?)?;
    tape.reshape(y, b, l)
}
