//! Initial data for the finite-m problem: the damped density built from a
//! harmonic pressure and an external density, and its validation against
//! the two linear barriers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Dirichlet, Grid};
use crate::radial::annulus_profile;

/// Offset `1/ln m` subtracted from the external density.
pub fn density_offset(m: f64) -> Result<f64> {
    if !(m > std::f64::consts::E) {
        return Err(Error::Parameter(format!("initial density construction needs m > e, got {m}")));
    }
    Ok(1.0 / m.ln())
}

/// Pressure harmonic between `f` at the inner boundary and 0 at `front`,
/// zero beyond.
pub fn harmonic_pressure(grid: &Grid, f: f64, front: f64) -> Result<Vec<f64>> {
    let g = &grid.geometry;
    let prof = annulus_profile(front, 0.0, f, g.dim(), g.inner)?;
    Ok(grid.sample(|r| if r < front { prof.value(r).max(0.0) } else { 0.0 }))
}

/// `ρ0 = max(p0^{1/m}, (ρE - 1/ln m)_+)`.
pub fn prepare_initial_density(p0: &[f64], rho_e: &[f64], m: f64) -> Result<Vec<f64>> {
    let a = density_offset(m)?;
    if p0.len() != rho_e.len() {
        return Err(Error::Parameter("pressure and external density differ in length".into()));
    }
    if let Some(v) = rho_e.iter().find(|v| !(0.0..1.0).contains(*v)) {
        return Err(Error::Parameter(format!("external density {v} outside [0, 1)")));
    }
    if let Some(v) = p0.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::Parameter(format!("initial pressure {v} must be non-negative")));
    }
    Ok(p0.iter().zip(rho_e).map(|(&p, &e)| p.powf(1.0 / m).max((e - a).max(0.0))).collect())
}

/// Radii where the upper and lower barriers vanish.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierRadii {
    pub upper: f64,
    pub lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDataReport {
    pub upper_ok: bool,
    pub lower_ok: bool,
    /// Nodes where `ρ0 > φ̄^{1/m}`.
    pub upper_violations: Vec<usize>,
    /// Nodes where `ρ0 < φ̲^{1/m}`.
    pub lower_violations: Vec<usize>,
    /// `φ̲ ≥ 0` on the nodes inside its radius.
    pub lower_positive: bool,
    /// `‖Δ_h(ρ0^m) + λ ρ0‖_1`.
    pub source_l1: f64,
    /// `‖∇_h ρ0‖_1`.
    pub gradient_l1: f64,
}

impl InitialDataReport {
    pub fn passed(&self) -> bool {
        self.upper_ok && self.lower_ok && self.lower_positive
    }
}

/// Compare `ρ0` with `φ^{1/m}` for `-Δφ̄ = Λ + 1` and `-Δφ̲ = -Λ`, both
/// equal to `f^{m/(m-1)}` at the inner boundary.
pub fn validate_initial_data(
    grid: &Grid,
    rho0: &[f64],
    m: f64,
    lambda: &[f64],
    bound: f64,
    f: f64,
    radii: BarrierRadii,
) -> Result<InitialDataReport> {
    if !(m > 1.0) {
        return Err(Error::Parameter(format!("m = {m} must exceed 1")));
    }
    if rho0.len() != grid.len() || lambda.len() != grid.len() {
        return Err(Error::Parameter("field length does not match grid".into()));
    }
    let top = f.powf(m / (m - 1.0));
    let end = |r: f64| -> Result<usize> {
        let k = grid.nearest(r);
        if k < 2 || k > grid.last() {
            return Err(Error::Barrier(format!("barrier radius {r} outside the grid")));
        }
        Ok(k)
    };
    let upper = grid.dirichlet_solve(bound + 1.0, top, end(radii.upper)?)?;
    let lower_end = end(radii.lower)?;
    let lower = grid.dirichlet_solve(-bound, top, lower_end)?;
    let lower_positive = lower[..lower_end].iter().all(|&v| v >= 0.0);
    let tol = 1e-12;
    let mut upper_violations = Vec::new();
    let mut lower_violations = Vec::new();
    for i in 0..grid.len() {
        if rho0[i] > upper[i].max(0.0).powf(1.0 / m) + tol {
            upper_violations.push(i);
        }
        if rho0[i] + tol < lower[i].max(0.0).powf(1.0 / m) {
            lower_violations.push(i);
        }
    }
    let u: Vec<f64> = rho0.iter().map(|r| r.powf(m)).collect();
    let last = grid.last();
    let lap = grid.laplacian(&u, Dirichlet { inner: u[0], outer: u[last] });
    let src: Vec<f64> = (0..grid.len())
        .map(|i| if i == 0 || i == last { 0.0 } else { lap[i] + lambda[i] * rho0[i] })
        .collect();
    let gradient_l1 = (0..last)
        .map(|i| 0.5 * (grid.weight(i) + grid.weight(i + 1)) * (rho0[i + 1] - rho0[i]).abs())
        .sum();
    Ok(InitialDataReport {
        upper_ok: upper_violations.is_empty(),
        lower_ok: lower_violations.is_empty(),
        upper_violations,
        lower_violations,
        lower_positive,
        source_l1: grid.l1(&src),
        gradient_l1,
    })
}
