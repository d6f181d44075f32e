use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::AddAssign;

use ndarray::{s, Array1, Array2, ArrayView2, Axis, LinalgScalar, ScalarOperand, Zip};
use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Floating-point element type of the engine (`f32` or `f64`).
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + AddAssign
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddRow(Var, Var),
    MulRow(Var, Var),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    /// Input, temperature, and whether columns `j > i` are masked.
    Softmax(Var, T, bool),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normalized: Array2<T>,
        inv_std: Array1<T>,
    },
    CausalConv {
        x: Var,
        w: Var,
        kernel: usize,
        segment: usize,
        cols: Array2<T>,
    },
    Gather {
        table: Var,
        rows: Vec<usize>,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    SliceRows {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Sum(Var),
    Mean(Var),
}

struct Node<T> {
    value: Array2<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Record of a forward computation, replayed in reverse by [`Tape::backward`].
///
/// Every value is a 2-D array; scalars are `1 × 1`. Nodes are appended in
/// evaluation order, so the tape is always a topologically sorted DAG.
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(op: &'static str, a: &[usize], b: &[usize]) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: a.to_vec(),
        rhs: b.to_vec(),
    }
}

/// Gradients of a scalar with respect to every node of a tape.
pub struct Gradients<T> {
    grads: Vec<Option<Array2<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Array2<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros shaped like `like` when nothing reached it.
    pub fn take_or_zeros(&mut self, v: Var, shape: (usize, usize)) -> Array2<T> {
        self.grads
            .get_mut(v.0)
            .and_then(|g| g.take())
            .unwrap_or_else(|| Array2::zeros(shape))
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Array2<T>>], v: Var, g: Array2<T>) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value[[0, 0]]
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(shape_err(op, sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.value(a) + self.value(b);
        let rg = self.rg(&[a, b]);
        Ok(self.push(v, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a) - self.value(b);
        let rg = self.rg(&[a, b]);
        Ok(self.push(v, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a) * self.value(b);
        let rg = self.rg(&[a, b]);
        Ok(self.push(v, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let v = self.value(a) * c;
        let rg = self.rg(&[a]);
        self.push(v, Op::Scale(a, c), rg)
    }

    fn row_check(&self, op: &'static str, x: Var, row: Var) -> Result<()> {
        let (xs, rs) = (self.value(x).shape(), self.value(row).shape());
        if rs[0] != 1 || rs[1] != xs[1] {
            return Err(shape_err(op, xs, rs));
        }
        Ok(())
    }

    /// `x + row`, broadcasting a `1 × n` row over every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        self.row_check("add_row", x, row)?;
        let v = self.value(x) + self.value(row);
        let rg = self.rg(&[x, row]);
        Ok(self.push(v, Op::AddRow(x, row), rg))
    }

    /// `x ⊙ row`, broadcasting a `1 × n` row.
    pub fn mul_row(&mut self, x: Var, row: Var) -> Result<Var> {
        self.row_check("mul_row", x, row)?;
        let v = self.value(x) * self.value(row);
        let rg = self.rg(&[x, row]);
        Ok(self.push(v, Op::MulRow(x, row), rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa[1] != sb[0] {
            return Err(shape_err("matmul", sa, sb));
        }
        let v = self.value(a).dot(self.value(b));
        let rg = self.rg(&[a, b]);
        Ok(self.push(v, Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa[1] != sb[1] {
            return Err(shape_err("matmul_t", sa, sb));
        }
        let v = self.value(a).dot(&self.value(b).t());
        let rg = self.rg(&[a, b]);
        Ok(self.push(v, Op::MatMulT(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().as_standard_layout().into_owned();
        let rg = self.rg(&[a]);
        self.push(v, Op::Transpose(a), rg)
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let src = self.value(a);
        if src.len() != rows * cols {
            return Err(shape_err("reshape", src.shape(), &[rows, cols]));
        }
        let flat: Vec<T> = src.iter().copied().collect();
        let v = Array2::from_shape_vec((rows, cols), flat).expect("length checked");
        let rg = self.rg(&[a]);
        Ok(self.push(v, Op::Reshape(a), rg))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| if x > T::zero() { x } else { T::zero() });
        let rg = self.rg(&[a]);
        self.push(v, Op::Relu(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| {
            if x >= T::zero() {
                T::one() / (T::one() + (-x).exp())
            } else {
                let e = x.exp();
                e / (T::one() + e)
            }
        });
        let rg = self.rg(&[a]);
        self.push(v, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.tanh());
        let rg = self.rg(&[a]);
        self.push(v, Op::Tanh(a), rg)
    }

    /// Row-wise softmax (last axis), computed with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for mut row in v.rows_mut() {
            let m = row.fold(T::neg_infinity(), |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - m).exp());
            let s = row.sum();
            row.mapv_inplace(|x| x / s);
        }
        let rg = self.rg(&[a]);
        self.push(v, Op::Softmax(a, T::one(), false), rg)
    }

    /// Row-wise softmax of `scale·a` restricted to columns `j ≤ i`; later
    /// columns get exactly zero weight. This is the strictly causal
    /// attention mask with the usual `1/√d` temperature folded in.
    pub fn causal_softmax(&mut self, a: Var, scale: T) -> Var {
        let src = self.value(a).as_standard_layout();
        let (r, c) = src.dim();
        let mut out = Array2::zeros((r, c));
        for (i, (srow, mut orow)) in src.rows().into_iter().zip(out.rows_mut()).enumerate() {
            let keep = (i + 1).min(c);
            let sv = &srow.to_slice().expect("standard layout")[..keep];
            let ov = &mut orow.as_slice_mut().expect("standard layout")[..keep];
            let m = sv.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
            let mut sum = T::zero();
            for (o, &x) in ov.iter_mut().zip(sv) {
                *o = ((x - m) * scale).exp();
                sum += *o;
            }
            let inv = T::one() / sum;
            ov.iter_mut().for_each(|o| *o = *o * inv);
        }
        let rg = self.rg(&[a]);
        self.push(out, Op::Softmax(a, scale, true), rg)
    }

    /// Row-wise layer normalisation followed by the affine map `γ ⊙ x̂ + β`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: T) -> Result<Var> {
        self.row_check("layer_norm", x, gamma)?;
        self.row_check("layer_norm", x, beta)?;
        let xv = self.value(x);
        let n = T::of(xv.ncols() as f64);
        let mut normalized = xv.clone();
        let mut inv_std = Array1::zeros(xv.nrows());
        for (mut row, r) in normalized.rows_mut().into_iter().zip(inv_std.iter_mut()) {
            let mean = row.sum() / n;
            row.mapv_inplace(|v| v - mean);
            let var = row.fold(T::zero(), |acc, &v| acc + v * v) / n;
            *r = T::one() / (var + eps).sqrt();
            let rv = *r;
            row.mapv_inplace(|v| v * rv);
        }
        let out = &normalized * self.value(gamma) + self.value(beta);
        let rg = self.rg(&[x, gamma, beta]);
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
            },
            rg,
        ))
    }

    /// Causal 1-D convolution over rows.
    ///
    /// `x` is `(segments · segment) × C`, read as independent sequences of
    /// `segment` rows; `w` is `(kernel · C) × C_out` with block `k` applied to
    /// the input `kernel − 1 − k` steps in the past. Output row `t` only sees
    /// rows `≤ t` of its own segment (left zero padding).
    pub fn causal_conv(&mut self, x: Var, w: Var, kernel: usize, segment: usize) -> Result<Var> {
        let (rows, c) = self.shape(x);
        let (wr, _) = self.shape(w);
        if kernel == 0 || segment == 0 || rows % segment != 0 || wr != kernel * c {
            return Err(shape_err(
                "causal_conv",
                &[rows, c, kernel, segment],
                self.value(w).shape(),
            ));
        }
        let xv = self.value(x).as_standard_layout();
        let xs = xv.as_slice().expect("standard layout");
        let mut cols = Array2::zeros((rows, kernel * c));
        let cs = cols.as_slice_mut().expect("fresh array");
        for r in 0..rows {
            let pos = r % segment;
            for k in 0..kernel {
                let back = kernel - 1 - k;
                if back <= pos {
                    let src = (r - back) * c;
                    let dst = r * kernel * c + k * c;
                    cs[dst..dst + c].copy_from_slice(&xs[src..src + c]);
                }
            }
        }
        let out = cols.dot(self.value(w));
        let rg = self.rg(&[x, w]);
        Ok(self.push(
            out,
            Op::CausalConv {
                x,
                w,
                kernel,
                segment,
                cols,
            },
            rg,
        ))
    }

    /// Embedding lookup: rows of `table` in the given order.
    pub fn gather(&mut self, table: Var, rows: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        if let Some(&bad) = rows.iter().find(|&&r| r >= tv.nrows()) {
            return Err(shape_err("gather", tv.shape(), &[bad]));
        }
        let v = tv.select(Axis(0), rows);
        let rg = self.rg(&[table]);
        Ok(self.push(
            v,
            Op::Gather {
                table,
                rows: rows.to_vec(),
            },
            rg,
        ))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if start + len > c {
            return Err(shape_err("slice_cols", &[r, c], &[start, len]));
        }
        let v = self.value(x).slice(s![.., start..start + len]).to_owned();
        let rg = self.rg(&[x]);
        Ok(self.push(v, Op::SliceCols { x, start }, rg))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if start + len > r {
            return Err(shape_err("slice_rows", &[r, c], &[start, len]));
        }
        let v = self.value(x).slice(s![start..start + len, ..]).to_owned();
        let rg = self.rg(&[x]);
        Ok(self.push(v, Op::SliceRows { x, start }, rg))
    }

    fn concat(&mut self, parts: &[Var], axis: Axis) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::validation("concat of zero tensors"));
        }
        let views: Vec<ArrayView2<T>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(axis, &views).map_err(|_| {
            shape_err(
                "concat",
                self.value(parts[0]).shape(),
                self.value(*parts.last().expect("non-empty")).shape(),
            )
        })?;
        let rg = self.rg(parts);
        let op = if axis == Axis(1) {
            Op::ConcatCols(parts.to_vec())
        } else {
            Op::ConcatRows(parts.to_vec())
        };
        Ok(self.push(v, op, rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        self.concat(parts, Axis(1))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        self.concat(parts, Axis(0))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        let rg = self.rg(&[a]);
        self.push(v, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).mean().unwrap_or_else(T::zero));
        let rg = self.rg(&[a]);
        self.push(v, Op::Mean(a), rg)
    }

    /// Reverse-mode sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let shape = self.value(loss).shape();
        if shape != [1, 1] {
            return Err(Error::validation(format!(
                "backward needs a scalar loss, got {shape:?}"
            )));
        }
        let mut grads: Vec<Option<Array2<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::from_elem((1, 1), T::one()));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let need = |v: &Var| self.nodes[v.0].requires_grad;
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                }
                Op::Add(a, b) => {
                    if need(a) {
                        accumulate(&mut grads, *a, g.clone());
                    }
                    if need(b) {
                        accumulate(&mut grads, *b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if need(a) {
                        accumulate(&mut grads, *a, g.clone());
                    }
                    if need(b) {
                        accumulate(&mut grads, *b, -g);
                    }
                }
                Op::Mul(a, b) => {
                    if need(a) {
                        accumulate(&mut grads, *a, &g * self.value(*b));
                    }
                    if need(b) {
                        accumulate(&mut grads, *b, &g * self.value(*a));
                    }
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g * *c),
                Op::AddRow(x, row) => {
                    if need(row) {
                        accumulate(&mut grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if need(x) {
                        accumulate(&mut grads, *x, g);
                    }
                }
                Op::MulRow(x, row) => {
                    if need(row) {
                        let gr = (&g * self.value(*x)).sum_axis(Axis(0)).insert_axis(Axis(0));
                        accumulate(&mut grads, *row, gr);
                    }
                    if need(x) {
                        accumulate(&mut grads, *x, &g * self.value(*row));
                    }
                }
                Op::MatMul(a, b) => {
                    if need(a) {
                        accumulate(&mut grads, *a, g.dot(&self.value(*b).t()));
                    }
                    if need(b) {
                        accumulate(&mut grads, *b, self.value(*a).t().dot(&g));
                    }
                }
                Op::MatMulT(a, b) => {
                    // c = a·bᵀ: da = g·b, db = gᵀ·a
                    if need(a) {
                        accumulate(&mut grads, *a, g.dot(self.value(*b)));
                    }
                    if need(b) {
                        accumulate(&mut grads, *b, g.t().dot(self.value(*a)));
                    }
                }
                Op::Transpose(a) => {
                    accumulate(&mut grads, *a, g.t().as_standard_layout().into_owned());
                }
                Op::Reshape(a) => {
                    let (r, c) = self.shape(*a);
                    let flat: Vec<T> = g.iter().copied().collect();
                    accumulate(&mut grads, *a, Array2::from_shape_vec((r, c), flat).expect("same size"));
                }
                Op::Relu(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(self.value(*a)).for_each(|d, &x| {
                        if x <= T::zero() {
                            *d = T::zero();
                        }
                    });
                    accumulate(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let mut d = g;
                    Zip::from(&mut d)
                        .and(&node.value)
                        .for_each(|d, &y| *d = *d * y * (T::one() - y));
                    accumulate(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let mut d = g;
                    Zip::from(&mut d)
                        .and(&node.value)
                        .for_each(|d, &y| *d = *d * (T::one() - y * y));
                    accumulate(&mut grads, *a, d);
                }
                Op::Softmax(a, scale, causal) => {
                    // dx = scale · y ⊙ (dy − Σ dy·y), row by row; masked
                    // entries have y = 0 and so get no gradient.
                    let y = node.value.as_standard_layout();
                    let mut d = g.as_standard_layout().into_owned();
                    let c = d.ncols();
                    for (i, (mut drow, yrow)) in d.rows_mut().into_iter().zip(y.rows()).enumerate() {
                        let keep = if *causal { (i + 1).min(c) } else { c };
                        let dv = drow.as_slice_mut().expect("standard layout");
                        let yv = yrow.to_slice().expect("standard layout");
                        let s = dv[..keep]
                            .iter()
                            .zip(&yv[..keep])
                            .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
                        for (dj, &yj) in dv[..keep].iter_mut().zip(&yv[..keep]) {
                            *dj = *scale * yj * (*dj - s);
                        }
                        dv[keep..].iter_mut().for_each(|dj| *dj = T::zero());
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    normalized,
                    inv_std,
                } => {
                    if need(beta) {
                        accumulate(&mut grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if need(gamma) {
                        let gg = (&g * normalized).sum_axis(Axis(0)).insert_axis(Axis(0));
                        accumulate(&mut grads, *gamma, gg);
                    }
                    if need(x) {
                        let n = T::of(normalized.ncols() as f64);
                        let mut dxhat = &g * self.value(*gamma);
                        for ((mut drow, xrow), &r) in
                            dxhat.rows_mut().into_iter().zip(normalized.rows()).zip(inv_std.iter())
                        {
                            let m1 = drow.sum() / n;
                            let m2 = drow
                                .iter()
                                .zip(xrow.iter())
                                .fold(T::zero(), |acc, (&d, &xh)| acc + d * xh)
                                / n;
                            Zip::from(&mut drow)
                                .and(&xrow)
                                .for_each(|d, &xh| *d = r * (*d - m1 - xh * m2));
                        }
                        accumulate(&mut grads, *x, dxhat);
                    }
                }
                Op::CausalConv {
                    x,
                    w,
                    kernel,
                    segment,
                    cols,
                } => {
                    if need(w) {
                        accumulate(&mut grads, *w, cols.t().dot(&g));
                    }
                    if need(x) {
                        let dcols = g.dot(&self.value(*w).t());
                        let dcols = dcols.as_standard_layout();
                        let ds = dcols.as_slice().expect("standard layout");
                        let (rows, c) = self.shape(*x);
                        let mut dx = Array2::zeros((rows, c));
                        let dxs = dx.as_slice_mut().expect("fresh array");
                        for r in 0..rows {
                            let pos = r % segment;
                            for k in 0..*kernel {
                                let back = kernel - 1 - k;
                                if back <= pos {
                                    let src = r * kernel * c + k * c;
                                    let dst = (r - back) * c;
                                    for (d, &v) in dxs[dst..dst + c].iter_mut().zip(&ds[src..src + c]) {
                                        *d += v;
                                    }
                                }
                            }
                        }
                        accumulate(&mut grads, *x, dx);
                    }
                }
                Op::Gather { table, rows } => {
                    let mut dt = Array2::zeros(self.shape(*table));
                    for (src, &r) in rows.iter().enumerate() {
                        let mut dst = dt.row_mut(r);
                        dst += &g.row(src);
                    }
                    accumulate(&mut grads, *table, dt);
                }
                Op::SliceCols { x, start } => {
                    let mut dx = Array2::zeros(self.shape(*x));
                    dx.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    accumulate(&mut grads, *x, dx);
                }
                Op::SliceRows { x, start } => {
                    let mut dx = Array2::zeros(self.shape(*x));
                    dx.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    accumulate(&mut grads, *x, dx);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.shape(*p).1;
                        if need(p) {
                            accumulate(&mut grads, *p, g.slice(s![.., off..off + w]).to_owned());
                        }
                        off += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let h = self.shape(*p).0;
                        if need(p) {
                            accumulate(&mut grads, *p, g.slice(s![off..off + h, ..]).to_owned());
                        }
                        off += h;
                    }
                }
                Op::Sum(a) => {
                    let gv = g[[0, 0]];
                    accumulate(&mut grads, *a, Array2::from_elem(self.shape(*a), gv));
                }
                Op::Mean(a) => {
                    let (r, c) = self.shape(*a);
                    let gv = g[[0, 0]] / T::of((r * c) as f64);
                    accumulate(&mut grads, *a, Array2::from_elem((r, c), gv));
                }
            }
        }
        Ok(Gradients { grads })
    }
}
