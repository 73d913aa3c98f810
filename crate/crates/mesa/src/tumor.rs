//! Finite-m tumor growth coupled to a nutrient, and the concave-source
//! obstacle problem for its limit pressure.
//!
//! The density is advanced explicitly on a whole-line truncation with zero
//! density at both ends. The nutrient solves
//! `(I - dt Δ_h) c_new = c + dt (-ρ H(c) + (c_B - c) Kx(p))` with `c = c_B`
//! at both ends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{solve_tridiagonal, Grid};
use crate::obstacle::{
    complementarity_residual, solve_obstacle, ConcaveSource, ObstacleProblem, ObstacleSolution, ObstacleSource,
    PsorOptions,
};
use crate::pme::{clamp_step, Exponent, SUPPORT_MARGIN};

/// Growth, consumption and exchange terms of the tumor model.
pub trait GrowthLaw: Sync {
    /// `G(p, c)`.
    fn growth(&self, p: f64, c: f64) -> f64;
    /// `∂_p G(p, c)`.
    fn growth_slope(&self, p: f64, c: f64) -> f64;
    /// `𝒢(p, c) = ∫_0^p G(q, c) dq`.
    fn growth_primitive(&self, p: f64, c: f64) -> f64;
    /// Consumption `H(c)`.
    fn consumption(&self, c: f64) -> f64;
    /// Exchange rate `Kx(p)`.
    fn exchange(&self, p: f64) -> f64;
    /// Far-field nutrient level `c_B`.
    fn c_boundary(&self) -> f64;
    /// Lower bound of `-∂_p G`.
    fn beta(&self) -> f64;
}

/// `G = αc - βp`, `H(c) = c`, `Kx = k0` (or `k0·1{p ≤ p_tol}` with the
/// exchange switched off inside the tumor).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearGrowth {
    pub alpha: f64,
    pub beta: f64,
    pub k0: f64,
    pub c_b: f64,
    pub exchange_off: bool,
    pub p_tol: f64,
}

impl Default for LinearGrowth {
    fn default() -> Self {
        LinearGrowth { alpha: 1.0, beta: 1.0, k0: 1.0, c_b: 1.0, exchange_off: false, p_tol: 1e-8 }
    }
}

impl GrowthLaw for LinearGrowth {
    #[inline]
    fn growth(&self, p: f64, c: f64) -> f64 {
        self.alpha * c - self.beta * p
    }

    #[inline]
    fn growth_slope(&self, _p: f64, _c: f64) -> f64 {
        -self.beta
    }

    #[inline]
    fn growth_primitive(&self, p: f64, c: f64) -> f64 {
        self.alpha * c * p - 0.5 * self.beta * p * p
    }

    #[inline]
    fn consumption(&self, c: f64) -> f64 {
        c
    }

    #[inline]
    fn exchange(&self, p: f64) -> f64 {
        if self.exchange_off && p > self.p_tol {
            0.0
        } else {
            self.k0
        }
    }

    fn c_boundary(&self) -> f64 {
        self.c_b
    }

    fn beta(&self) -> f64 {
        self.beta
    }
}

/// Check the structural hypotheses on a `(p, c)` lattice by finite
/// differences: `∂_p G ≤ -β`, `𝒢` concave with `𝒢(0, c) = 0`, `H ≥ 0`
/// with `H(0) = 0`, `Kx ≥ 0`.
pub fn validate_growth_law(law: &dyn GrowthLaw, p_max: f64) -> Result<()> {
    let c_b = law.c_boundary();
    let beta = law.beta();
    if !(c_b > 0.0 && c_b.is_finite()) {
        return Err(Error::Parameter(format!("c_B = {c_b} must be positive")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("β = {beta} must be positive")));
    }
    if law.consumption(0.0) != 0.0 {
        return Err(Error::Parameter("H(0) must vanish".into()));
    }
    let np = 40;
    let nc = 10;
    let dp = p_max / np as f64;
    for j in 0..=nc {
        let c = c_b * j as f64 / nc as f64;
        if law.consumption(c) < 0.0 {
            return Err(Error::Parameter(format!("H({c}) < 0")));
        }
        if law.growth_primitive(0.0, c) != 0.0 {
            return Err(Error::Parameter(format!("𝒢(0, {c}) must vanish")));
        }
        for k in 0..np {
            let p = k as f64 * dp;
            let fd = (law.growth(p + dp, c) - law.growth(p, c)) / dp;
            if fd > -beta * (1.0 - 1e-9) {
                return Err(Error::Parameter(format!("∂_p G = {fd} > -β at p = {p}, c = {c}")));
            }
            if k > 0 {
                let second = law.growth_primitive(p + dp, c) - 2.0 * law.growth_primitive(p, c)
                    + law.growth_primitive(p - dp, c);
                if second > 1e-12 * (1.0 + law.growth_primitive(p, c).abs()) {
                    return Err(Error::Parameter(format!("𝒢 not concave at p = {p}, c = {c}")));
                }
            }
            if law.exchange(p) < 0.0 {
                return Err(Error::Parameter(format!("Kx({p}) < 0")));
            }
        }
    }
    Ok(())
}

/// `p ↦ G(p, c_i)` per node, as an obstacle source.
pub struct NutrientSource<'a> {
    pub law: &'a dyn GrowthLaw,
    pub c: &'a [f64],
}

impl ConcaveSource for NutrientSource<'_> {
    fn value(&self, i: usize, p: f64) -> f64 {
        self.law.growth(p, self.c[i])
    }

    fn slope(&self, i: usize, p: f64) -> f64 {
        self.law.growth_slope(p, self.c[i])
    }

    fn primitive(&self, i: usize, p: f64) -> f64 {
        self.law.growth_primitive(p, self.c[i])
    }
}

/// Limit pressure on `mask` for the nutrient field `c`.
pub fn tumor_obstacle(
    grid: &Grid,
    mask: &[bool],
    c: &[f64],
    law: &dyn GrowthLaw,
    tol: f64,
) -> Result<ObstacleSolution> {
    let src = NutrientSource { law, c };
    let problem = ObstacleProblem { grid, mask, source: ObstacleSource::Concave(&src), inner: None };
    solve_obstacle(&problem, PsorOptions { tol, ..PsorOptions::default() })
}

/// Relative size of nutrient excursions outside `[0, c_B]` treated as
/// round-off.
pub const ROUND_OFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TumorParams {
    pub m: f64,
    pub cfl_safety: f64,
    pub max_dt: f64,
    pub t_end: f64,
    /// Hold the nutrient at `c_B`.
    pub frozen: bool,
}

impl TumorParams {
    pub fn new(m: f64, t_end: f64) -> Self {
        TumorParams { m, cfl_safety: 0.9, max_dt: 1e-3, t_end, frozen: false }
    }

    fn validate(&self) -> Result<()> {
        if !(self.m > 1.0) {
            return Err(Error::Parameter(format!("m = {} must exceed 1", self.m)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Parameter("cfl_safety must lie in (0, 1]".into()));
        }
        if !(self.max_dt > 0.0) {
            return Err(Error::Parameter("max_dt must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TumorState {
    pub t: f64,
    pub rho: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TumorStep {
    pub dt: f64,
    pub clipped: usize,
    pub c_clipped: usize,
}

/// Advances density and nutrient with reusable buffers.
pub struct TumorSolver<'a> {
    pub grid: &'a Grid,
    pub law: &'a dyn GrowthLaw,
    pub params: TumorParams,
    exp: Exponent,
    u: Vec<f64>,
    p: Vec<f64>,
}

impl<'a> TumorSolver<'a> {
    pub fn new(grid: &'a Grid, law: &'a dyn GrowthLaw, params: TumorParams) -> Result<Self> {
        params.validate()?;
        let n = grid.len();
        Ok(TumorSolver { grid, law, params, exp: Exponent::new(params.m), u: vec![0.0; n], p: vec![0.0; n] })
    }

    pub fn initial_state(&self, rho0: &[f64], c0: &[f64]) -> Result<TumorState> {
        let n = self.grid.len();
        if rho0.len() != n || c0.len() != n {
            return Err(Error::Parameter("initial data length does not match grid".into()));
        }
        if rho0.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::Parameter("initial density must be non-negative".into()));
        }
        let c_b = self.law.c_boundary();
        if c0.iter().any(|c| !(0.0..=c_b).contains(c)) {
            return Err(Error::Parameter("initial nutrient must lie in [0, c_B]".into()));
        }
        let last = self.grid.last();
        let mut rho = rho0.to_vec();
        rho[0] = 0.0;
        rho[last] = 0.0;
        let mut c = if self.params.frozen { vec![c_b; n] } else { c0.to_vec() };
        c[0] = c_b;
        c[last] = c_b;
        Ok(TumorState { t: 0.0, rho, c })
    }

    /// Step toward `target`, landing on it exactly when within reach.
    pub fn step(&mut self, state: &mut TumorState, target: f64) -> Result<TumorStep> {
        let grid = self.grid;
        let last = grid.last();
        let h = grid.h;
        let m = self.params.m;
        let lo_node = state.rho.iter().position(|&r| r > 0.0);
        let hi_node = state.rho.iter().rposition(|&r| r > 0.0);
        let (a, b) = match (lo_node, hi_node) {
            (Some(a), Some(b)) => (a, b),
            _ => (1, 0),
        };
        if a <= b && (a < SUPPORT_MARGIN || b + SUPPORT_MARGIN >= last) {
            return Err(Error::SupportMargin { node: if a < SUPPORT_MARGIN { a } else { b }, nodes: last + 1, t: state.t });
        }
        let mut dmax = 0.0f64;
        let mut rate_max = 0.0f64;
        for i in 0..=last {
            let r = state.rho[i];
            let d = self.exp.pow_m1(r);
            dmax = dmax.max(d);
            self.u[i] = d * r;
            self.p[i] = m / (m - 1.0) * d;
            if !self.params.frozen {
                let ci = state.c[i];
                let uptake = if ci > 0.0 { r * self.law.consumption(ci) / ci } else { 0.0 };
                rate_max = rate_max.max(uptake + self.law.exchange(self.p[i]));
            }
        }
        let mut dt = if dmax > 0.0 {
            self.params.cfl_safety * h * h / (2.0 * m * dmax)
        } else {
            f64::INFINITY
        };
        dt = dt.min(self.params.max_dt);
        if rate_max > 0.0 {
            dt = dt.min(self.params.cfl_safety / rate_max);
        }
        let (dt, t_new) = clamp_step(state.t, dt, target);
        let mut rep = TumorStep { dt, ..Default::default() };

        let old_rho = if self.params.frozen { Vec::new() } else { state.rho.clone() };
        if a <= b {
            for i in a.saturating_sub(1).max(1)..(b + 2).min(last) {
                let r = state.rho[i];
                let lap = grid.laplacian_at(&self.u, i);
                let next = r + dt * (lap + r * self.law.growth(self.p[i], state.c[i]));
                if !next.is_finite() {
                    return Err(Error::NonFinite { node: i, t: state.t });
                }
                if next < 0.0 {
                    rep.clipped += 1;
                    state.rho[i] = 0.0;
                } else {
                    state.rho[i] = next;
                }
            }
        }

        if !self.params.frozen {
            rep.c_clipped = self.nutrient(state, &old_rho, dt)?;
        }
        state.t = t_new;
        Ok(rep)
    }

    fn nutrient(&self, state: &mut TumorState, rho: &[f64], dt: f64) -> Result<usize> {
        let grid = self.grid;
        let last = grid.last();
        let c_b = self.law.c_boundary();
        let k = last - 1;
        let (mut sub, mut diag, mut sup, mut rhs) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        for j in 0..k {
            let i = j + 1;
            let (lo, mid, hi) = grid.stencil(i);
            sub[j] = -dt * lo;
            diag[j] = 1.0 + dt * mid;
            sup[j] = -dt * hi;
            let c = state.c[i];
            rhs[j] = c + dt * (-rho[i] * self.law.consumption(c) + (c_b - c) * self.law.exchange(self.p[i]));
        }
        rhs[0] += dt * grid.stencil(1).0 * c_b;
        rhs[k - 1] += dt * grid.stencil(last - 1).2 * c_b;
        solve_tridiagonal(&sub, &diag, &sup, &mut rhs)?;
        // round-off excursions are clamped without being counted
        let slack = ROUND_OFF * c_b;
        let mut clipped = 0;
        for j in 0..k {
            let v = rhs[j];
            if v < -slack || v > c_b + slack {
                clipped += 1;
            }
            state.c[j + 1] = v.clamp(0.0, c_b);
        }
        state.c[0] = c_b;
        state.c[last] = c_b;
        Ok(clipped)
    }

    pub fn pressure(&self, rho: &[f64]) -> Vec<f64> {
        rho.iter().map(|&r| self.exp.pressure(r)).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TumorLedger {
    pub t: f64,
    pub steps: usize,
    pub mass: f64,
    pub clipped: usize,
    pub c_clipped: usize,
    pub c_min: f64,
    pub c_max: f64,
    pub p_max: f64,
    /// `Σ |p (Δ_h p + G(p, c))| h`.
    pub complementarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TumorRun {
    pub m: f64,
    pub frames: Vec<TumorState>,
    pub ledger: Vec<TumorLedger>,
}

impl TumorRun {
    pub fn pressures(&self) -> Vec<Vec<f64>> {
        let e = Exponent::new(self.m);
        self.frames.iter().map(|s| s.rho.iter().map(|&r| e.pressure(r)).collect()).collect()
    }
}

/// `Σ |p (Δ_h p + G(p, c))| h` of one frame.
pub fn tumor_complementarity(grid: &Grid, p: &[f64], c: &[f64], law: &dyn GrowthLaw) -> f64 {
    let src = NutrientSource { law, c };
    let mask: Vec<bool> = p.iter().map(|&v| v > 0.0).collect();
    complementarity_residual(grid, p, ObstacleSource::Concave(&src), &mask)
}

pub fn run_tumor(
    grid: &Grid,
    rho0: &[f64],
    c0: &[f64],
    law: &dyn GrowthLaw,
    params: TumorParams,
    output_times: &[f64],
) -> Result<TumorRun> {
    let mut outputs: Vec<f64> = output_times.iter().copied().filter(|&t| t <= params.t_end).collect();
    outputs.sort_by(f64::total_cmp);
    outputs.dedup();
    let mut solver = TumorSolver::new(grid, law, params)?;
    let mut state = solver.initial_state(rho0, c0)?;
    let mut frames = Vec::with_capacity(outputs.len());
    let mut ledger = Vec::with_capacity(outputs.len());
    for &target in &outputs {
        let mut acc = TumorLedger::default();
        while state.t < target {
            let rep = solver.step(&mut state, target)?;
            acc.steps += 1;
            acc.clipped += rep.clipped;
            acc.c_clipped += rep.c_clipped;
        }
        let p = solver.pressure(&state.rho);
        acc.t = state.t;
        acc.mass = grid.integrate_interior(&state.rho);
        acc.c_min = state.c.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        acc.c_max = state.c.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        acc.p_max = p.iter().fold(0.0f64, |a, &v| a.max(v));
        acc.complementarity = tumor_complementarity(grid, &p, &state.c, law);
        ledger.push(acc);
        frames.push(state.clone());
    }
    Ok(TumorRun { m: params.m, frames, ledger })
}
