use ndarray::Array2;

use super::tape::{Tape, Var};
use crate::error::Result;

/// Settings for central-difference gradient checks.
///
/// The relative error of a coordinate is `|a − n| / max(|a|, |n|, floor)`,
/// so gradients much smaller than `floor` are compared absolutely. Central
/// differences of an `O(1)` loss carry roughly `1e−10` of rounding noise at
/// `eps = 1e−6`, which is what the default floor of `1e−5` absorbs.
///
/// A coordinate that disagrees at `eps` is retried at `eps/8`: if a ReLU
/// kink lies within `eps` of the point the function is not smooth on the
/// stencil, and the smaller step usually steps clear of it. Retries are
/// counted in the report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub eps: f64,
    pub floor: f64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self { eps: 1e-6, floor: 1e-5 }
    }
}

/// Location of a scalar inside a list of tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coord {
    pub tensor: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReport {
    pub max_rel_error: f64,
    pub worst: Option<Coord>,
    pub checked: usize,
    pub retried: usize,
}

/// Every coordinate of `point`.
pub fn all_coords(point: &[Array2<f64>]) -> Vec<Coord> {
    let mut out = Vec::new();
    for (tensor, a) in point.iter().enumerate() {
        for row in 0..a.nrows() {
            for col in 0..a.ncols() {
                out.push(Coord { tensor, row, col });
            }
        }
    }
    out
}

fn evaluate<F>(f: &F, point: &[Array2<f64>]) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = point.iter().map(|p| tape.constant(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    Ok(tape.scalar(out))
}

/// Reverse-mode gradient of `f` at `point`.
pub fn analytic_gradient<F>(f: &F, point: &[Array2<f64>]) -> Result<(f64, Vec<Array2<f64>>)>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = point.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let mut grads = tape.backward(out)?;
    let g = vars
        .iter()
        .zip(point)
        .map(|(&v, p)| grads.take_or_zeros(v, p.dim()))
        .collect();
    Ok((tape.scalar(out), g))
}

const RETRY_ABOVE: f64 = 1e-5;

fn central<F>(f: &F, work: &mut [Array2<f64>], c: Coord, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let x0 = work[c.tensor][[c.row, c.col]];
    work[c.tensor][[c.row, c.col]] = x0 + eps;
    let up = evaluate(f, work);
    work[c.tensor][[c.row, c.col]] = x0 - eps;
    let down = evaluate(f, work);
    work[c.tensor][[c.row, c.col]] = x0;
    Ok((up? - down?) / (2.0 * eps))
}

/// Compare a supplied gradient against central differences of `f`.
pub fn compare_gradient<F>(
    f: &F,
    point: &[Array2<f64>],
    analytic: &[Array2<f64>],
    coords: &[Coord],
    cfg: GradCheck,
) -> Result<GradReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut work = point.to_vec();
    let mut report = GradReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        retried: 0,
    };
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(cfg.floor);
    for &c in coords {
        let a = analytic[c.tensor][[c.row, c.col]];
        let mut err = rel(a, central(f, &mut work, c, cfg.eps)?);
        if err > RETRY_ABOVE {
            report.retried += 1;
            err = err.min(rel(a, central(f, &mut work, c, cfg.eps / 8.0)?));
        }
        report.checked += 1;
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = err.max(report.max_rel_error);
            report.worst = Some(c);
        }
    }
    Ok(report)
}

/// Worst relative error between reverse-mode and central-difference
/// gradients of the scalar `f` over `coords` (all coordinates if `None`).
pub fn grad_check<F>(f: F, point: &[Array2<f64>], coords: Option<&[Coord]>, cfg: GradCheck) -> Result<GradReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let (_, analytic) = analytic_gradient(&f, point)?;
    match coords {
        Some(c) => compare_gradient(&f, point, &analytic, c, cfg),
        None => compare_gradient(&f, point, &analytic, &all_coords(point), cfg),
    }
}
