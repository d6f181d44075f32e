use std::f64::consts::PI;

use super::params::{LaserParams, ELEMENTARY_CHARGE};
use crate::error::{Error, Result};

/// Carrier and photon densities, m⁻³.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateState {
    pub carrier_density: f64,
    pub photon_density: f64,
}

impl RateState {
    pub fn new(carrier_density: f64, photon_density: f64) -> Self {
        Self {
            carrier_density,
            photon_density,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.carrier_density.is_finite() && self.photon_density.is_finite()) {
            return Err(Error::InvalidState(format!("non-finite state {self:?}")));
        }
        if self.carrier_density < 0.0 || self.photon_density < 0.0 {
            return Err(Error::InvalidState(format!("negative density {self:?}")));
        }
        Ok(())
    }
}

/// Right-hand side without validation; the integrator's hot path.
#[inline]
pub(crate) fn rhs(n: f64, s: f64, current: f64, p: &LaserParams) -> (f64, f64) {
    let gain = p.group_gain * (n - p.transparency_density) / (1.0 + p.gain_compression * s);
    let dn =
        p.injection_efficiency * current / (ELEMENTARY_CHARGE * p.active_volume) - n / p.carrier_lifetime - gain * s;
    let ds = p.confinement * gain * s - s / p.photon_lifetime
        + p.confinement * p.spontaneous_fraction * n / p.carrier_lifetime;
    (dn, ds)
}

/// Time derivatives of the rate equations at `state` under drive `current` (A).
pub fn derivatives(state: RateState, current: f64, params: &LaserParams) -> Result<RateState> {
    state.check()?;
    if !current.is_finite() {
        return Err(Error::InvalidState(format!("non-finite current {current}")));
    }
    if current < 0.0 {
        return Err(Error::validation(format!("negative current {current} A")));
    }
    let (dn, ds) = rhs(state.carrier_density, state.photon_density, current, params);
    Ok(RateState::new(dn, ds))
}

/// Threshold current in the β → 0 limit, A.
pub fn threshold_current(params: &LaserParams) -> Result<f64> {
    params.validate()?;
    let i_th = ELEMENTARY_CHARGE * params.active_volume * params.threshold_density()
        / (params.injection_efficiency * params.carrier_lifetime);
    if !(i_th.is_finite() && i_th > 0.0) {
        return Err(Error::validation(format!("threshold current {i_th} is not positive")));
    }
    Ok(i_th)
}

const NEWTON_MAX_ITER: usize = 200;
const NEWTON_TOL: f64 = 1e-13;

/// Equilibrium densities under constant `current`, found by damped Newton
/// iteration on the scaled residual, started from the β = 0 closed form.
pub fn steady_state(current: f64, params: &LaserParams) -> Result<RateState> {
    params.validate()?;
    if !(current.is_finite() && current >= 0.0) {
        return Err(Error::validation(format!("current must be >= 0, got {current}")));
    }
    let p = params;
    let n_scale = p.transparency_density;
    let s_scale = p.photon_scale();
    let pump = p.injection_efficiency * current / (ELEMENTARY_CHARGE * p.active_volume);

    // Closed-form start (β = 0, ε = 0).
    let n_th = p.threshold_density();
    let (n0, s0) = if pump * p.carrier_lifetime <= n_th {
        (pump * p.carrier_lifetime, 0.0)
    } else {
        (
            n_th,
            p.confinement * p.photon_lifetime * (pump - n_th / p.carrier_lifetime),
        )
    };
    let mut x = [n0 / n_scale, s0 / s_scale];

    let residual = |x: &[f64; 2]| -> [f64; 2] {
        let (dn, ds) = rhs(x[0] * n_scale, x[1] * s_scale, current, p);
        [dn * p.carrier_lifetime / n_scale, ds * p.photon_lifetime / s_scale]
    };
    let norm = |r: &[f64; 2]| r[0].hypot(r[1]);

    let mut r = residual(&x);
    for _ in 0..NEWTON_MAX_ITER {
        if norm(&r) < NEWTON_TOL {
            break;
        }
        // Analytic Jacobian of the scaled residual.
        let n = x[0] * n_scale;
        let s = x[1] * s_scale;
        let comp = 1.0 + p.gain_compression * s;
        let g = p.group_gain * (n - p.transparency_density) / comp;
        let dg_dn = p.group_gain / comp;
        let dg_ds = -g * p.gain_compression / comp;
        let j00 = (-1.0 / p.carrier_lifetime - dg_dn * s) * p.carrier_lifetime;
        let j01 = (-(dg_ds * s + g)) * s_scale * p.carrier_lifetime / n_scale;
        let j10 = (p.confinement * dg_dn * s + p.confinement * p.spontaneous_fraction / p.carrier_lifetime)
            * n_scale
            * p.photon_lifetime
            / s_scale;
        let j11 = (p.confinement * (dg_ds * s + g) - 1.0 / p.photon_lifetime) * p.photon_lifetime;
        let det = j00 * j11 - j01 * j10;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = [(r[0] * j11 - r[1] * j01) / det, (r[1] * j00 - r[0] * j10) / det];
        let base = norm(&r);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = [x[0] - lambda * dx[0], x[1] - lambda * dx[1]];
            if trial[0] >= 0.0 && trial[1] >= 0.0 {
                let rt = residual(&trial);
                if norm(&rt) < base {
                    x = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let res = norm(&r);
    if !(res < NEWTON_TOL) {
        return Err(Error::Numeric {
            message: format!("steady state did not converge at I = {current:e} A"),
            residual: res,
        });
    }
    Ok(RateState::new(x[0] * n_scale, x[1] * s_scale))
}

/// Small-signal relaxation oscillation frequency at `bias_current`, Hz.
///
/// f_R = (1/2π)·sqrt(v_g·a·S*/τ_p / (1 + ε·S*)), with S* the steady-state
/// photon density at the bias. Every symbol-rate fraction in the toolkit is
/// relative to this value.
pub fn relaxation_frequency(bias_current: f64, params: &LaserParams) -> Result<f64> {
    let i_th = threshold_current(params)?;
    if !(bias_current > i_th) {
        return Err(Error::validation(format!(
            "bias {bias_current:e} A is not above threshold {i_th:e} A"
        )));
    }
    let s = steady_state(bias_current, params)?.photon_density;
    Ok(relaxation_frequency_at(s, params))
}

/// Relaxation frequency at a given steady-state photon density, Hz.
pub fn relaxation_frequency_at(photon_density: f64, p: &LaserParams) -> f64 {
    let w2 = p.group_gain * photon_density / p.photon_lifetime / (1.0 + p.gain_compression * photon_density);
    w2.sqrt() / (2.0 * PI)
}
