//! Dormand–Prince 5(4) embedded Runge–Kutta integrator.
//!
//! Adaptive steps use the PI step-size controller from Hairer & Wanner's
//! DOPRI5, and the solution is sampled onto arbitrary output times with the
//! pair's fourth-order continuous extension. A fixed-step mode exists for
//! convergence-order studies.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// Row 7 doubles as the fifth-order weights (FSAL).
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Dense output.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Counters collected during one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Number of state components reset to zero by the non-negativity guard.
    pub clamped: usize,
}

/// Adaptive Dormand–Prince integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DormandPrince {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step; `f64::INFINITY` means unbounded.
    pub max_step: f64,
    pub max_steps: usize,
    pub safety: f64,
    /// Clamp negative components to zero after every accepted step.
    pub clamp_nonnegative: bool,
}

impl Default for DormandPrince {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            max_step: f64::INFINITY,
            max_steps: 10_000_000,
            safety: 0.9,
            clamp_nonnegative: false,
        }
    }
}

struct Stages<const D: usize> {
    k: [[f64; D]; 7],
    y_new: [f64; D],
}

#[inline]
fn combine<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

fn stages<const D: usize, F>(f: &mut F, t: f64, y: &[f64; D], k1: [f64; D], h: f64) -> Stages<D>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
{
    let k2 = f(t + C2 * h, &combine(y, h, &[(A21, &k1)]));
    let k3 = f(t + C3 * h, &combine(y, h, &[(A31, &k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &combine(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(
        t + C5 * h,
        &combine(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = f(
        t + h,
        &combine(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y_new = combine(y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = f(t + h, &y_new);
    Stages {
        k: [k1, k2, k3, k4, k5, k6, k7],
        y_new,
    }
}

fn is_finite<const D: usize>(y: &[f64; D]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Continuous extension over one accepted step `[t, t + h]`.
struct Dense<const D: usize> {
    r: [[f64; D]; 5],
}

impl<const D: usize> Dense<D> {
    fn new(y: &[f64; D], s: &Stages<D>, h: f64) -> Self {
        let mut r = [[0.0; D]; 5];
        let k = &s.k;
        for i in 0..D {
            let ydiff = s.y_new[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            r[0][i] = y[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * k[6][i] - bspl;
            r[4][i] = h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
        }
        Self { r }
    }

    fn eval(&self, theta: f64) -> [f64; D] {
        let t1 = 1.0 - theta;
        let r = &self.r;
        let mut out = [0.0; D];
        for i in 0..D {
            out[i] = r[0][i] + theta * (r[1][i] + t1 * (r[2][i] + theta * (r[3][i] + t1 * r[4][i])));
        }
        out
    }
}

impl DormandPrince {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::validation(format!(
                "tolerances must be positive (rel {}, abs {})",
                self.rel_tol, self.abs_tol
            )));
        }
        Ok(())
    }

    fn error_norm<const D: usize>(&self, y: &[f64; D], s: &Stages<D>, h: f64) -> f64 {
        let k = &s.k;
        let mut sum = 0.0;
        for i in 0..D {
            let sk = self.abs_tol + self.rel_tol * y[i].abs().max(s.y_new[i].abs());
            let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            sum += (e / sk) * (e / sk);
        }
        (sum / D as f64).sqrt()
    }

    /// Initial step guess (Hairer, Nørsett & Wanner, II.4).
    fn initial_step<const D: usize, F>(&self, f: &mut F, t: f64, y: &[f64; D], f0: &[f64; D]) -> f64
    where
        F: FnMut(f64, &[f64; D]) -> [f64; D],
    {
        let scale = |i: usize| self.abs_tol + self.rel_tol * y[i].abs();
        let norm =
            |v: &[f64; D]| (v.iter().enumerate().map(|(i, x)| (x / scale(i)).powi(2)).sum::<f64>() / D as f64).sqrt();
        let d0 = norm(y);
        let d1 = norm(f0);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }.min(self.max_step);
        let y1 = combine(y, h0, &[(1.0, f0)]);
        let f1 = f(t + h0, &y1);
        let mut diff = [0.0; D];
        for i in 0..D {
            diff[i] = f1[i] - f0[i];
        }
        let d2 = norm(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.max_step)
    }

    /// Integrate `dy/dt = f(t, y)` from `(t0, y0)` and return the solution at
    /// each of `t_out`, which must be non-decreasing and start at or after `t0`.
    pub fn integrate<const D: usize, F>(
        &self,
        mut f: F,
        t0: f64,
        y0: [f64; D],
        t_out: &[f64],
    ) -> Result<(Vec<[f64; D]>, StepStats)>
    where
        F: FnMut(f64, &[f64; D]) -> [f64; D],
    {
        self.validate()?;
        if !is_finite(&y0) || !t0.is_finite() {
            return Err(Error::InvalidState("non-finite initial condition".into()));
        }
        if t_out.windows(2).any(|w| w[1] < w[0]) || t_out.first().is_some_and(|&t| t < t0) {
            return Err(Error::validation("output times must be sorted and >= t0"));
        }
        let mut stats = StepStats::default();
        let mut out = Vec::with_capacity(t_out.len());
        let mut next = 0;
        while next < t_out.len() && t_out[next] == t0 {
            out.push(y0);
            next += 1;
        }
        let Some(&t_end) = t_out.last() else {
            return Ok((out, stats));
        };
        if next == t_out.len() {
            return Ok((out, stats));
        }

        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        stats.evaluations += 1;
        let mut h = self.initial_step(&mut f, t, &y, &k1);
        stats.evaluations += 1;

        // PI controller constants from DOPRI5.
        let beta = 0.04;
        let expo = 0.2 - 0.75 * beta;
        let (fac_min, fac_max) = (0.2, 10.0);
        let mut err_old: f64 = 1e-4;
        let mut last_rejected = false;

        while next < t_out.len() {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::Numeric {
                    message: format!("step budget of {} exhausted at t = {t:e}", self.max_steps),
                    residual: t_end - t,
                });
            }
            let remaining = t_end - t;
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            if h <= 1e-14 * t.abs().max(1e-300) || h < f64::MIN_POSITIVE {
                return Err(Error::Stiff { t, step: h });
            }

            let s = stages(&mut f, t, &y, k1, h);
            stats.evaluations += 6;
            let err = self.error_norm(&y, &s, h);
            if !err.is_finite() || !is_finite(&s.y_new) {
                if h < 1e-14 * t.abs().max(1e-300) {
                    return Err(Error::Numeric {
                        message: format!("non-finite state at t = {t:e}"),
                        residual: f64::NAN,
                    });
                }
                h *= 0.1;
                stats.rejected += 1;
                last_rejected = true;
                continue;
            }

            let fac11 = err.powf(expo);
            let mut fac = fac11 / err_old.powf(beta);
            fac = (fac / self.safety).clamp(1.0 / fac_max, 1.0 / fac_min);
            let h_new = h / fac;

            if err <= 1.0 {
                err_old = err.max(1e-4);
                stats.accepted += 1;
                let t_new = if last { t_end } else { t + h };
                let dense = Dense::new(&y, &s, h);
                while next < t_out.len() && t_out[next] <= t_new {
                    let theta = ((t_out[next] - t) / h).clamp(0.0, 1.0);
                    let mut yi = dense.eval(theta);
                    if self.clamp_nonnegative {
                        for v in yi.iter_mut() {
                            if *v < 0.0 {
                                *v = 0.0;
                            }
                        }
                    }
                    out.push(yi);
                    next += 1;
                }
                y = s.y_new;
                k1 = s.k[6];
                if self.clamp_nonnegative {
                    let mut touched = false;
                    for v in y.iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                            stats.clamped += 1;
                            touched = true;
                        }
                    }
                    if touched {
                        k1 = f(t_new, &y);
                        stats.evaluations += 1;
                    }
                }
                t = t_new;
                h = if last_rejected { h_new.min(h) } else { h_new };
                h = h.min(self.max_step);
                last_rejected = false;
            } else {
                h /= (fac11 / self.safety).min(1.0 / fac_min);
                stats.rejected += 1;
                last_rejected = true;
            }
        }
        Ok((out, stats))
    }

    /// Fixed-step integration with the fifth-order solution; returns the state
    /// after each step (the initial state excluded).
    pub fn integrate_fixed<const D: usize, F>(
        mut f: F,
        t0: f64,
        y0: [f64; D],
        h: f64,
        steps: usize,
    ) -> Result<Vec<[f64; D]>>
    where
        F: FnMut(f64, &[f64; D]) -> [f64; D],
    {
        if !(h > 0.0) {
            return Err(Error::validation("fixed step must be positive"));
        }
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let s = stages(&mut f, t, &y, k1, h);
            if !is_finite(&s.y_new) {
                return Err(Error::Numeric {
                    message: format!("non-finite state at t = {t:e}"),
                    residual: f64::NAN,
                });
            }
            y = s.y_new;
            k1 = s.k[6];
            t += h;
            out.push(y);
        }
        Ok(out)
    }
}
