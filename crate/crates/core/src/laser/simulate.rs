use super::params::LaserParams;
use super::rate::{rhs, RateState};
use crate::error::{Error, Result};
use crate::ode::{DormandPrince, StepStats};

/// Integration tolerances, relative to the scaled state (N/N_tr, S/S_unit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverTolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
        }
    }
}

/// Densities on the drive grid plus integrator counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub carrier_density: Vec<f64>,
    /// Photon density, m⁻³. Output power is proportional to it.
    pub photon_density: Vec<f64>,
    pub stats: StepStats,
}

impl Simulation {
    pub fn power(&self) -> &[f64] {
        &self.photon_density
    }
}

/// Integrate the rate equations under an arbitrary drive `current(t)` and
/// sample the state at `times`.
pub fn integrate_with<F>(
    current: F,
    times: &[f64],
    initial: RateState,
    params: &LaserParams,
    tol: SolverTolerances,
) -> Result<Simulation>
where
    F: Fn(f64) -> f64,
{
    params.validate()?;
    let n_scale = params.transparency_density;
    let s_scale = params.photon_scale();
    let solver = DormandPrince {
        clamp_nonnegative: true,
        ..DormandPrince::new(tol.rel_tol, tol.abs_tol)
    };
    let f = |t: f64, y: &[f64; 2]| {
        let (dn, ds) = rhs(y[0] * n_scale, y[1] * s_scale, current(t), params);
        [dn / n_scale, ds / s_scale]
    };
    let y0 = [initial.carrier_density / n_scale, initial.photon_density / s_scale];
    let t0 = times.first().copied().unwrap_or(0.0);
    let (ys, stats) = solver.integrate(f, t0, y0, times)?;
    Ok(Simulation {
        carrier_density: ys.iter().map(|y| y[0] * n_scale).collect(),
        photon_density: ys.iter().map(|y| y[1] * s_scale).collect(),
        stats,
    })
}

/// Simulate the laser under a drive current sampled every `dt` seconds.
///
/// The current is linearly interpolated between samples and held after the
/// last one; the state is returned on the same grid, starting at `initial`.
pub fn solve(
    drive: &[f64],
    dt: f64,
    initial: RateState,
    params: &LaserParams,
    tol: SolverTolerances,
) -> Result<Simulation> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::validation(format!("sample interval must be positive, got {dt}")));
    }
    if let Some(i) = drive.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::validation(format!(
            "drive sample {i} = {} is not a valid current",
            drive[i]
        )));
    }
    if drive.is_empty() {
        return Ok(Simulation {
            carrier_density: vec![],
            photon_density: vec![],
            stats: StepStats::default(),
        });
    }
    let last = drive.len() - 1;
    let current = |t: f64| {
        let x = t / dt;
        if x <= 0.0 {
            return drive[0];
        }
        let i = x.floor() as usize;
        if i >= last {
            return drive[last];
        }
        let frac = x - i as f64;
        drive[i] + frac * (drive[i + 1] - drive[i])
    };
    let times: Vec<f64> = (0..drive.len()).map(|i| i as f64 * dt).collect();
    integrate_with(current, &times, initial, params, tol)
}
