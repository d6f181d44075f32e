use crate::autodiff::{Bound, Real, Tape, Var};
use crate::error::{Error, Result};

use super::linear;

/// Tape handles for one convolutional-attention sublayer.
///
/// `wq` and `wk` are causal convolution kernels of shape
/// `(conv_window · d) × d`; `wv` and `wo` are `d × d`; biases are `1 × d`.
#[derive(Debug, Clone, Copy)]
pub struct AttentionWeights {
    pub wq: Var,
    pub bq: Var,
    pub wk: Var,
    pub bk: Var,
    pub wv: Var,
    pub bv: Var,
    pub wo: Var,
    pub bo: Var,
}

impl AttentionWeights {
    pub fn bind(bound: &Bound, prefix: &str) -> Result<Self> {
        let g = |n: &str| bound.get(&format!("{prefix}.{n}"));
        Ok(Self {
            wq: g("wq")?,
            bq: g("bq")?,
            wk: g("wk")?,
            bk: g("bk")?,
            wv: g("wv")?,
            bv: g("bv")?,
            wo: g("wo")?,
            bo: g("bo")?,
        })
    }
}

/// Multi-head attention whose queries and keys come from causal
/// convolutions over the input, with a strictly causal mask.
///
/// `x` holds `B` sequences of `segment` rows stacked vertically, each row a
/// `d`-dimensional embedding; the result has the same shape.
pub fn conv_causal_attention<T: Real>(
    tape: &mut Tape<T>,
    x: Var,
    w: &AttentionWeights,
    conv_window: usize,
    heads: usize,
    segment: usize,
) -> Result<Var> {
    let (rows, d) = tape.shape(x);
    if heads == 0 || d % heads != 0 || segment == 0 || rows % segment != 0 {
        return Err(Error::ShapeMismatch {
            op: "conv_causal_attention",
            lhs: vec![rows, d],
            rhs: vec![heads, segment],
        });
    }
    let dh = d / heads;
    let scale = T::one() / T::of(dh as f64).sqrt();

    let q = tape.causal_conv(x, w.wq, conv_window, segment)?;
    let q = tape.add_row(q, w.bq)?;
    let k = tape.causal_conv(x, w.wk, conv_window, segment)?;
    let k = tape.add_row(k, w.bk)?;
    let v = linear(tape, x, w.wv, w.bv)?;

    let mut sequences = Vec::with_capacity(rows / segment);
    for s in 0..rows / segment {
        let (qs, ks, vs) = if rows == segment {
            (q, k, v)
        } else {
            (
                tape.slice_rows(q, s * segment, segment)?,
                tape.slice_rows(k, s * segment, segment)?,
                tape.slice_rows(v, s * segment, segment)?,
            )
        };
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = tape.slice_cols(qs, h * dh, dh)?;
            let kh = tape.slice_cols(ks, h * dh, dh)?;
            let vh = tape.slice_cols(vs, h * dh, dh)?;
            let scores = tape.matmul_t(qh, kh)?;
            let attn = tape.causal_softmax(scores, scale);
            outs.push(tape.matmul(attn, vh)?);
        }
        let joined = if heads == 1 { outs[0] } else { tape.concat_cols(&outs)? };
        sequences.push(joined);
    }
    let all = if sequences.len() == 1 {
        sequences[0]
    } else {
        tape.concat_rows(&sequences)?
    };
    linear(tape, all, w.wo, w.bo)
}

/// Heun step with unit step size: `x + (F(x) + F(x + F(x)))/2`.
pub fn rk2_residual<T, F>(tape: &mut Tape<T>, x: Var, mut f: F) -> Result<Var>
where
    T: Real,
    F: FnMut(&mut Tape<T>, Var) -> Result<Var>,
{
    let f1 = f(tape, x)?;
    let mid = tape.add(x, f1)?;
    let f2 = f(tape, mid)?;
    let sum = tape.add(f1, f2)?;
    let half = tape.scale(sum, T::of(0.5));
    tape.add(x, half)
}
