//! Finite-m porous medium solver: `∂t ρ = Δ(ρ^m) + r·ρ` with
//! `p = m/(m-1)·ρ^{m-1}`, explicit Euler under the diffusive CFL limit.
//!
//! The inner node carries the injection density `f^{1/(m-1)}` (or 0 for a
//! closed truncation), the outer node is held at 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::source::{earliest, BoundaryData, SourceCoefficient};

/// Cells kept free between the support and the outer node.
pub const SUPPORT_MARGIN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmeParams {
    pub m: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub max_dt: f64,
}

impl PmeParams {
    pub fn new(m: f64, t_end: f64) -> Self {
        PmeParams { m, cfl_safety: 0.9, t_end, max_dt: 1e-3 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.m > 1.0 && self.m.is_finite()) {
            return Err(Error::Parameter(format!("m must exceed 1, got {}", self.m)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Parameter(format!("cfl_safety {} not in (0, 1]", self.cfl_safety)));
        }
        if !(self.max_dt > 0.0) {
            return Err(Error::Parameter("max_dt must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmeState {
    pub t: f64,
    pub rho: Vec<f64>,
}

/// Treatment of the inner node.
#[derive(Debug, Clone, PartialEq)]
pub enum Inner {
    /// Dirichlet density `f(t)^{1/(m-1)}`.
    Injection(BoundaryData),
    /// Dirichlet 0, used for whole-line truncations.
    Closed,
}

impl Inner {
    fn density(&self, m: f64, t: f64) -> f64 {
        match self {
            Inner::Injection(f) => f.at(t).powf(1.0 / (m - 1.0)),
            Inner::Closed => 0.0,
        }
    }

    fn next_switch(&self, t: f64) -> Option<f64> {
        match self {
            Inner::Injection(f) => f.next_switch(t),
            Inner::Closed => None,
        }
    }
}

/// Per-capita growth rate multiplying ρ in the density equation.
pub trait Reaction {
    fn rate(&self, node: usize, t: f64, p: f64) -> f64;
    fn next_switch(&self, t: f64) -> Option<f64>;
}

impl Reaction for SourceCoefficient {
    #[inline]
    fn rate(&self, node: usize, t: f64, _p: f64) -> f64 {
        self.at(node, t)
    }

    fn next_switch(&self, t: f64) -> Option<f64> {
        SourceCoefficient::next_switch(self, t)
    }
}

/// Pressure-dependent rate `g(p)`, constant in space and time.
pub struct PressureRate<F: Fn(f64) -> f64>(pub F);

impl<F: Fn(f64) -> f64> Reaction for PressureRate<F> {
    #[inline]
    fn rate(&self, _node: usize, _t: f64, p: f64) -> f64 {
        (self.0)(p)
    }

    fn next_switch(&self, _t: f64) -> Option<f64> {
        None
    }
}

/// `ρ^{m-1}` with an integer fast path.
#[derive(Debug, Clone, Copy)]
pub struct Exponent {
    m: f64,
    int: Option<i32>,
}

impl Exponent {
    pub fn new(m: f64) -> Self {
        let k = m - 1.0;
        let int = (k.fract() == 0.0 && k.abs() < 1e6).then_some(k as i32);
        Exponent { m, int }
    }

    #[inline]
    pub fn pow_m1(&self, rho: f64) -> f64 {
        match self.int {
            Some(k) => rho.powi(k),
            None => rho.powf(self.m - 1.0),
        }
    }

    #[inline]
    pub fn pressure(&self, rho: f64) -> f64 {
        self.m / (self.m - 1.0) * self.pow_m1(rho)
    }
}

/// Pointwise `p = m/(m-1)·ρ^{m-1}`.
pub fn pressure_of_density(rho: &[f64], m: f64) -> Result<Vec<f64>> {
    if !(m > 1.0) {
        return Err(Error::Parameter(format!("m must exceed 1, got {m}")));
    }
    let e = Exponent::new(m);
    Ok(rho.iter().map(|&r| e.pressure(r.max(0.0))).collect())
}

/// Inverse of [`pressure_of_density`].
pub fn density_of_pressure(p: f64, m: f64) -> f64 {
    ((m - 1.0) / m * p.max(0.0)).powf(1.0 / (m - 1.0))
}

/// Mass bookkeeping accumulated between two recorded frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PmeLedger {
    pub t: f64,
    pub steps: usize,
    pub mass: f64,
    /// `∫ dt Σ w Δ_h(ρ^m) h`
    pub diffusion: f64,
    /// `∫ dt Σ w r ρ h`
    pub source: f64,
    pub flux_in: f64,
    pub flux_out: f64,
    pub clipped: usize,
    pub clip_mass: f64,
    /// Largest relative per-step defect of the mass identity.
    pub max_step_defect: f64,
}

/// What one explicit step did.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepReport {
    pub dt: f64,
    pub mass_before: f64,
    pub mass_after: f64,
    pub diffusion: f64,
    pub source: f64,
    pub flux_in: f64,
    pub flux_out: f64,
    pub clipped: usize,
    pub clip_mass: f64,
}

impl StepReport {
    /// `|Δmass - dt·(diffusion + source) - clip_mass| / mass`.
    pub fn defect(&self) -> f64 {
        let lhs = self.mass_after - self.mass_before;
        let rhs = self.dt * (self.diffusion + self.source) + self.clip_mass;
        let scale = self.mass_after.abs().max(self.mass_before.abs()).max(f64::MIN_POSITIVE);
        (lhs - rhs).abs() / scale
    }
}

pub struct PmeSolver<'a, R: Reaction> {
    pub grid: &'a Grid,
    pub params: PmeParams,
    pub reaction: &'a R,
    pub inner: Inner,
    exp: Exponent,
    u: Vec<f64>,
    d: Vec<f64>,
}

impl<'a, R: Reaction> PmeSolver<'a, R> {
    pub fn new(grid: &'a Grid, params: PmeParams, reaction: &'a R, inner: Inner) -> Result<Self> {
        params.validate()?;
        let n = grid.len();
        Ok(PmeSolver {
            grid,
            params,
            reaction,
            inner,
            exp: Exponent::new(params.m),
            u: vec![0.0; n],
            d: vec![0.0; n],
        })
    }

    /// Initial state with the inner node set from the boundary data.
    pub fn initial_state(&self, rho0: &[f64]) -> Result<PmeState> {
        if rho0.len() != self.grid.len() {
            return Err(Error::Parameter("initial density length does not match grid".into()));
        }
        if let Some(i) = rho0.iter().position(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::Parameter(format!("initial density invalid at node {i}")));
        }
        let mut rho = rho0.to_vec();
        rho[0] = self.inner.density(self.params.m, 0.0);
        let last = self.grid.last();
        rho[last] = 0.0;
        Ok(PmeState { t: 0.0, rho })
    }

    /// Index one past the last node that can change this step.
    fn reach(&self, rho: &[f64]) -> Result<usize> {
        let last = self.grid.last();
        let hi = rho[..last].iter().rposition(|&r| r > 0.0).unwrap_or(0);
        if hi + SUPPORT_MARGIN >= last {
            return Err(Error::SupportMargin { node: hi, nodes: last + 1, t: f64::NAN });
        }
        Ok(hi + 1)
    }

    /// CFL step `cfl·h²/(2·max m ρ^{m-1})`, capped by `max_dt`.
    pub fn stable_dt(&self, state: &PmeState) -> f64 {
        let dmax = state.rho.iter().fold(0.0f64, |a, &r| a.max(self.exp.pow_m1(r)));
        self.dt_for(dmax)
    }

    fn dt_for(&self, dmax: f64) -> f64 {
        let cfl = if dmax > 0.0 {
            self.params.cfl_safety * self.grid.h * self.grid.h / (2.0 * self.params.m * dmax)
        } else {
            f64::INFINITY
        };
        cfl.min(self.params.max_dt)
    }

    /// Next time the data switch after `t`.
    pub fn next_event(&self, t: f64) -> Option<f64> {
        earliest(&[self.reaction.next_switch(t), self.inner.next_switch(t)])
    }

    /// Fill the `ρ^{m-1}` and `ρ^m` buffers on the active range and return
    /// `(top, max ρ^{m-1})`; nodes `1..top` are the ones that can change.
    fn prepare(&mut self, state: &PmeState) -> Result<(usize, f64)> {
        let last = self.grid.last();
        let reach = self.reach(&state.rho).map_err(|e| match e {
            Error::SupportMargin { node, nodes, .. } => Error::SupportMargin { node, nodes, t: state.t },
            e => e,
        })?;
        let top = (reach + 1).min(last);
        let mut dmax = 0.0f64;
        for i in 0..=top {
            let r = state.rho[i];
            let d = self.exp.pow_m1(r);
            dmax = dmax.max(d);
            self.d[i] = d;
            self.u[i] = d * r;
        }
        Ok((top, dmax))
    }

    fn apply(&mut self, state: &mut PmeState, top: usize, dt: f64, t_new: f64) -> Result<StepReport> {
        let grid = self.grid;
        let last = grid.last();
        let h = grid.h;
        let mut rep = StepReport { dt, ..Default::default() };
        rep.mass_before = grid.integrate_interior(&state.rho);
        rep.flux_in = grid.weight(1) * (self.u[0] - self.u[1]) / h;
        if top >= last {
            rep.flux_out = grid.weight(last - 1) * (self.u[last] - self.u[last - 1]) / h;
        }
        let ratio = self.params.m / (self.params.m - 1.0);
        let t = state.t;
        let mut diffusion = 0.0;
        let mut source = 0.0;
        for i in 1..top.min(last) {
            let lap = grid.laplacian_at(&self.u, i);
            let r = state.rho[i];
            let growth = self.reaction.rate(i, t, ratio * self.d[i]) * r;
            let w = grid.weight(i) * h;
            diffusion += w * lap;
            source += w * growth;
            let next = r + dt * (lap + growth);
            if !next.is_finite() {
                return Err(Error::NonFinite { node: i, t });
            }
            if next < 0.0 {
                rep.clipped += 1;
                rep.clip_mass -= w * next;
                state.rho[i] = 0.0;
            } else {
                state.rho[i] = next;
            }
        }
        rep.diffusion = diffusion;
        rep.source = source;
        state.t = t_new;
        state.rho[0] = self.inner.density(self.params.m, t_new);
        state.rho[last] = 0.0;
        rep.mass_after = grid.integrate_interior(&state.rho);
        Ok(rep)
    }

    /// One explicit step of length `dt` ending exactly at `t_new`.
    pub fn advance(&mut self, state: &mut PmeState, dt: f64, t_new: f64) -> Result<StepReport> {
        let (top, _) = self.prepare(state)?;
        self.apply(state, top, dt, t_new)
    }

    /// Step to the next of: CFL limit, data switch, `target`.
    pub fn step(&mut self, state: &mut PmeState, target: f64) -> Result<StepReport> {
        let (top, dmax) = self.prepare(state)?;
        let dt = self.dt_for(dmax);
        let stop = earliest(&[Some(target), self.next_event(state.t)]).unwrap_or(target);
        let (dt, t_new) = clamp_step(state.t, dt, stop);
        self.apply(state, top, dt, t_new)
    }
}

/// Clamp a step to land exactly on `stop` when it would reach or pass it.
pub fn clamp_step(t: f64, dt: f64, stop: f64) -> (f64, f64) {
    let remaining = stop - t;
    if dt >= remaining || remaining - dt <= 1e-12 * stop.abs().max(1.0) {
        (remaining, stop)
    } else {
        (dt, t + dt)
    }
}

/// Trajectory of a finite-m run.
#[derive(Debug, Clone, PartialEq)]
pub struct PmeRun {
    pub m: f64,
    pub frames: Vec<PmeState>,
    pub ledger: Vec<PmeLedger>,
    pub steps: usize,
}

impl PmeRun {
    pub fn pressures(&self) -> Vec<Vec<f64>> {
        let e = Exponent::new(self.m);
        self.frames.iter().map(|s| s.rho.iter().map(|&r| e.pressure(r)).collect()).collect()
    }

    pub fn total_clips(&self) -> usize {
        self.ledger.iter().map(|l| l.clipped).sum()
    }

    pub fn max_step_defect(&self) -> f64 {
        self.ledger.iter().fold(0.0, |a, l| a.max(l.max_step_defect))
    }
}

fn sorted_outputs(times: &[f64], t_end: f64) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = times.iter().copied().filter(|&t| t <= t_end).collect();
    if out.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Parameter("output times must be finite and non-negative".into()));
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// Integrate from `rho0` and record the state at each of `output_times`.
pub fn run_pme<R: Reaction>(
    grid: &Grid,
    rho0: &[f64],
    params: PmeParams,
    reaction: &R,
    inner: Inner,
    output_times: &[f64],
) -> Result<PmeRun> {
    let outputs = sorted_outputs(output_times, params.t_end)?;
    let mut solver = PmeSolver::new(grid, params, reaction, inner)?;
    let mut state = solver.initial_state(rho0)?;
    let mut frames = Vec::with_capacity(outputs.len());
    let mut ledger = Vec::with_capacity(outputs.len());
    let mut acc = PmeLedger::default();
    let mut steps = 0;
    for &target in &outputs {
        while state.t < target {
            let rep = solver.step(&mut state, target)?;
            steps += 1;
            acc.steps += 1;
            acc.diffusion += rep.dt * rep.diffusion;
            acc.source += rep.dt * rep.source;
            acc.flux_in += rep.dt * rep.flux_in;
            acc.flux_out += rep.dt * rep.flux_out;
            acc.clipped += rep.clipped;
            acc.clip_mass += rep.clip_mass;
            acc.max_step_defect = acc.max_step_defect.max(rep.defect());
        }
        acc.t = state.t;
        acc.mass = grid.integrate_interior(&state.rho);
        ledger.push(acc);
        acc = PmeLedger::default();
        frames.push(state.clone());
    }
    Ok(PmeRun { m: params.m, frames, ledger, steps })
}

/// Several runs advanced with one shared step sequence, so that nodewise
/// comparisons are not polluted by differing step sizes.
pub fn run_pme_lockstep<R: Reaction>(
    grid: &Grid,
    rho0: &[Vec<f64>],
    params: PmeParams,
    reaction: &R,
    inners: &[Inner],
    output_times: &[f64],
) -> Result<Vec<Vec<PmeState>>> {
    if rho0.len() != inners.len() {
        return Err(Error::Parameter("one inner boundary per run required".into()));
    }
    let outputs = sorted_outputs(output_times, params.t_end)?;
    let mut solvers = inners
        .iter()
        .map(|inner| PmeSolver::new(grid, params, reaction, inner.clone()))
        .collect::<Result<Vec<_>>>()?;
    let mut states = solvers
        .iter()
        .zip(rho0)
        .map(|(s, r)| s.initial_state(r))
        .collect::<Result<Vec<_>>>()?;
    let mut frames = vec![Vec::new(); states.len()];
    let mut t = 0.0;
    for &target in &outputs {
        while t < target {
            let dt = solvers
                .iter()
                .zip(&states)
                .fold(f64::INFINITY, |a, (s, st)| a.min(s.stable_dt(st)));
            let events: Vec<Option<f64>> = solvers.iter().map(|s| s.next_event(t)).collect();
            let stop = earliest(&events).map_or(target, |e| e.min(target));
            let (dt, t_new) = clamp_step(t, dt, stop);
            for (s, st) in solvers.iter_mut().zip(states.iter_mut()) {
                s.advance(st, dt, t_new)?;
            }
            t = t_new;
        }
        for (f, st) in frames.iter_mut().zip(&states) {
            f.push(st.clone());
        }
    }
    Ok(frames)
}
