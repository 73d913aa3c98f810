//! Time stepping of the incompressible limit.
//!
//! Each step splits into: exponential decay/growth of the density where
//! the pressure vanishes, an obstacle solve for the pressure on the
//! saturated set, and deposition of the boundary measure `μ` on the
//! unsaturated nodes bordering the positive set, with any excess above 1
//! carried outward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::obstacle::{
    boundary_measure, complementarity_residual, optimal_omega, solve_obstacle_from, ObstacleProblem,
    ObstacleSource, PsorOptions, ACTIVE_REL_TOL,
};
use crate::pme::clamp_step;
use crate::source::{earliest, BoundaryData, SourceCoefficient};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitParams {
    pub eps_sat: f64,
    pub dt: f64,
    pub t_end: f64,
    pub obstacle_tol: f64,
    /// Relaxation factor; `None` picks the optimal one for the positive set.
    pub omega: Option<f64>,
    pub max_iter: usize,
}

impl LimitParams {
    pub fn new(dt: f64, t_end: f64) -> Self {
        LimitParams { eps_sat: 1e-6, dt, t_end, obstacle_tol: 1e-8, omega: None, max_iter: 5_000_000 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps_sat > 0.0 && self.eps_sat < 0.1) {
            return Err(Error::Parameter(format!("eps_sat {} not in (0, 0.1)", self.eps_sat)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter("dt must be positive".into()));
        }
        if !(self.obstacle_tol > 0.0) {
            return Err(Error::Parameter("obstacle tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitState {
    pub t: f64,
    pub rho: Vec<f64>,
    pub p: Vec<f64>,
    pub sat: Vec<bool>,
    /// Density each node would have without deposits: the external density.
    pub rho_ext: Vec<f64>,
}

/// Nodes with `ρ ≥ 1 - eps_sat`, plus the inner node.
pub fn saturated_set(rho: &[f64], eps_sat: f64) -> Vec<bool> {
    let mut s: Vec<bool> = rho.iter().map(|&r| r >= 1.0 - eps_sat).collect();
    if let Some(first) = s.first_mut() {
        *first = true;
    }
    s
}

/// Per-step bookkeeping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LimitStep {
    pub t: f64,
    pub dt: f64,
    pub mass_before: f64,
    pub mass_after: f64,
    /// Mass change of the decay/growth sub-step.
    pub decay: f64,
    /// Mass deposited from `μ`.
    pub deposit: f64,
    /// Mass lost when growth pushed a node above 1.
    pub cap_loss: f64,
    /// `w_1 (p_0 - p_1)/h`.
    pub flux_in: f64,
    /// `Σ w μ h`.
    pub mu_total: f64,
    pub mu_min: f64,
    /// Largest `μ` deposited on an unsaturated node.
    pub mu_max: f64,
    pub complementarity: f64,
    /// `max p (1 - ρ)`.
    pub graph: f64,
    pub p_max: f64,
    pub iterations: usize,
}

impl LimitStep {
    /// Relative defect of `Δmass = decay + deposit`.
    pub fn defect(&self) -> f64 {
        let lhs = self.mass_after - self.mass_before;
        let scale = self.mass_after.abs().max(self.mass_before.abs()).max(f64::MIN_POSITIVE);
        (lhs - self.decay - self.deposit).abs() / scale
    }
}

/// Front measurements taken after every step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FrontTrace {
    pub t: f64,
    /// Saturated front with sub-cell fill of the next node.
    pub front: f64,
    /// First node past the positive set.
    pub contact: f64,
    /// `p/h` across the last cell of the positive set.
    pub grad: f64,
    /// External density just past the saturated front.
    pub rho_e: f64,
    /// Index of the last node of the positive set.
    pub active_end: usize,
    /// Largest external density on unsaturated nodes.
    pub rho_e_max: f64,
    /// Largest deposited `μ` of the step that produced this state.
    pub mu_max: f64,
    pub dt: f64,
}

pub struct LimitSolver<'a> {
    pub grid: &'a Grid,
    pub lambda: &'a SourceCoefficient,
    pub f: &'a BoundaryData,
    pub params: LimitParams,
}

impl<'a> LimitSolver<'a> {
    pub fn new(
        grid: &'a Grid,
        lambda: &'a SourceCoefficient,
        f: &'a BoundaryData,
        params: LimitParams,
    ) -> Result<Self> {
        params.validate()?;
        Ok(LimitSolver { grid, lambda, f, params })
    }

    fn p_tol(&self, t: f64) -> f64 {
        ACTIVE_REL_TOL * self.f.at(t)
    }

    fn lambda_nodes(&self, t: f64) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.lambda.at(i, t)).collect()
    }

    fn pressure(&self, sat: &[bool], t: f64, warm: &[f64]) -> Result<(Vec<f64>, Vec<bool>, usize)> {
        let lam = self.lambda_nodes(t);
        let problem =
            ObstacleProblem { grid: self.grid, mask: sat, source: ObstacleSource::Linear(&lam), inner: Some(self.f.at(t)) };
        let support = warm.iter().filter(|&&v| v > 0.0).count();
        let n = if support > 1 { support } else { sat.iter().filter(|&&s| s).count() };
        let omega = self.params.omega.unwrap_or_else(|| optimal_omega(n.max(1)));
        let opts = PsorOptions { omega, tol: self.params.obstacle_tol, max_iter: self.params.max_iter };
        let sol = solve_obstacle_from(&problem, opts, warm)?;
        Ok((sol.p, sol.active, sol.iterations))
    }

    pub fn initial_state(&self, rho0: &[f64]) -> Result<LimitState> {
        let grid = self.grid;
        if rho0.len() != grid.len() {
            return Err(Error::Parameter("initial density length does not match grid".into()));
        }
        if let Some(i) = rho0.iter().position(|r| !(r.is_finite() && (0.0..=1.0).contains(r))) {
            return Err(Error::Parameter(format!("initial density must lie in [0, 1] (node {i})")));
        }
        let mut rho = rho0.to_vec();
        rho[0] = 1.0;
        let last = grid.last();
        rho[last] = 0.0;
        let sat = saturated_set(&rho, self.params.eps_sat);
        let (p, _, _) = self.pressure(&sat, 0.0, &vec![0.0; grid.len()])?;
        let rho_ext = rho.clone();
        Ok(LimitState { t: 0.0, rho, p, sat, rho_ext })
    }

    /// Advance `state` to `t_new`.
    pub fn step(&self, state: &mut LimitState, t_new: f64) -> Result<LimitStep> {
        let grid = self.grid;
        let last = grid.last();
        let h = grid.h;
        let eps = self.params.eps_sat;
        let t = state.t;
        let dt = t_new - t;
        let mut rep = LimitStep { t: t_new, dt, ..Default::default() };
        rep.mass_before = grid.integrate_interior(&state.rho);

        // decay / growth where the pressure vanishes
        let p_tol_old = self.p_tol(t);
        for i in 1..last {
            if state.p[i] > p_tol_old {
                continue;
            }
            let factor = self.lambda.integral(i, t, t_new).exp();
            let old = state.rho[i];
            let mut new = old * factor;
            if new > 1.0 {
                rep.cap_loss += (new - 1.0) * grid.weight(i) * h;
                new = 1.0;
            }
            if state.sat[i] && new < 1.0 - eps {
                state.rho_ext[i] = new;
            } else {
                state.rho_ext[i] = (state.rho_ext[i] * factor).min(1.0);
            }
            state.rho[i] = new;
            rep.decay += (new - old) * grid.weight(i) * h;
        }
        state.sat = saturated_set(&state.rho, eps);

        // pressure on the saturated set
        let (p, active, iters) = self.pressure(&state.sat, t_new, &state.p)?;
        rep.iterations += iters;
        let lam_new = self.lambda_nodes(t_new);
        let p_tol = self.p_tol(t_new);
        let mu = boundary_measure(grid, &p, &lam_new, p_tol);

        // deposit μ next to the positive set, then carry excess outward
        let mut touched = false;
        for i in 1..last {
            if state.sat[i] || mu[i] <= 0.0 || !(active[i - 1] || active[i + 1]) {
                continue;
            }
            rep.mu_max = rep.mu_max.max(mu[i]);
            let add = dt * mu[i];
            state.rho[i] += add;
            rep.deposit += add * grid.weight(i) * h;
            touched = true;
        }
        if touched {
            let mut carry = 0.0;
            for i in 1..last {
                if state.sat[i] {
                    continue;
                }
                let w = grid.weight(i) * h;
                state.rho[i] += carry / w;
                carry = 0.0;
                if state.rho[i] > 1.0 {
                    carry = (state.rho[i] - 1.0) * w;
                    state.rho[i] = 1.0;
                }
            }
            if carry > 0.0 {
                return Err(Error::Overshoot { t: t_new });
            }
        }
        rep.flux_in = grid.weight(1) * (p[0] - p[1]) / h;
        let sat_after = saturated_set(&state.rho, eps);
        state.t = t_new;
        if sat_after != state.sat {
            state.sat = sat_after;
            let (p2, _, iters2) = self.pressure(&state.sat, t_new, &p)?;
            rep.iterations += iters2;
            state.p = p2;
        } else {
            state.p = p;
        }

        rep.mass_after = grid.integrate_interior(&state.rho);
        rep.mu_total = grid.integrate_interior(&mu);
        let mu_final = boundary_measure(grid, &state.p, &lam_new, p_tol);
        rep.mu_min = mu_final[1..last].iter().fold(f64::INFINITY, |a, &v| a.min(v));
        rep.complementarity =
            complementarity_residual(grid, &state.p, ObstacleSource::Linear(&lam_new), &state.sat);
        rep.graph = state.p.iter().zip(&state.rho).fold(0.0f64, |a, (p, r)| a.max(p * (1.0 - r)));
        rep.p_max = state.p.iter().fold(0.0f64, |a, &v| a.max(v));
        Ok(rep)
    }

    pub fn trace(&self, state: &LimitState) -> FrontTrace {
        front_trace(self.grid, state, self.p_tol(state.t))
    }
}

/// Saturated and active front measurements of one state.
pub fn front_trace(grid: &Grid, state: &LimitState, p_tol: f64) -> FrontTrace {
    let last = grid.last();
    let h = grid.h;
    let k = state.sat.iter().position(|&s| !s).map_or(last, |j| j - 1);
    let mut front = grid.nodes[k] + 0.5 * h;
    let mut rho_e = 0.0;
    if k < last {
        rho_e = state.rho_ext[k + 1];
        let theta = if rho_e < 1.0 { (state.rho[k + 1] - rho_e) / (1.0 - rho_e) } else { 0.0 };
        front += theta.clamp(0.0, 1.0) * h;
    }
    let a = state.p.iter().position(|&v| v <= p_tol).map_or(last, |j| j.max(1) - 1);
    let contact = grid.nodes[(a + 1).min(last)];
    let grad = if a < last { (state.p[a] - state.p[a + 1]).abs() / h } else { 0.0 };
    let rho_e_max = (1..last).filter(|&i| !state.sat[i]).fold(0.0f64, |acc, i| acc.max(state.rho_ext[i]));
    FrontTrace { t: state.t, front, contact, grad, rho_e, active_end: a, rho_e_max, mu_max: 0.0, dt: 0.0 }
}

/// Ledger aggregated between recorded frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LimitLedger {
    pub t: f64,
    pub steps: usize,
    pub mass: f64,
    pub decay: f64,
    pub deposit: f64,
    pub cap_loss: f64,
    pub flux: f64,
    pub mu_total: f64,
    pub mu_min: f64,
    pub complementarity: f64,
    pub graph: f64,
    pub max_defect: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitRun {
    pub frames: Vec<LimitState>,
    pub ledger: Vec<LimitLedger>,
    pub traces: Vec<FrontTrace>,
    pub eps_sat: f64,
}

impl LimitRun {
    pub fn max_defect(&self) -> f64 {
        self.ledger.iter().fold(0.0, |a, l| a.max(l.max_defect))
    }

    pub fn min_mu(&self) -> f64 {
        self.ledger.iter().fold(f64::INFINITY, |a, l| a.min(l.mu_min))
    }

    pub fn max_graph(&self) -> f64 {
        self.ledger.iter().fold(0.0, |a, l| a.max(l.graph))
    }
}

/// Integrate the limit system and record states at `output_times`.
pub fn run_limit(
    grid: &Grid,
    rho0: &[f64],
    lambda: &SourceCoefficient,
    f: &BoundaryData,
    params: LimitParams,
    output_times: &[f64],
) -> Result<LimitRun> {
    let solver = LimitSolver::new(grid, lambda, f, params)?;
    let mut outputs: Vec<f64> = output_times.iter().copied().filter(|&t| t <= params.t_end).collect();
    outputs.sort_by(f64::total_cmp);
    outputs.dedup();
    let mut state = solver.initial_state(rho0)?;
    let mut frames = Vec::with_capacity(outputs.len());
    let mut ledger = Vec::with_capacity(outputs.len());
    let mut traces = vec![solver.trace(&state)];
    let fresh = || LimitLedger { mu_min: f64::INFINITY, ..Default::default() };
    let mut acc = fresh();
    for &target in &outputs {
        while state.t < target {
            let stop = earliest(&[Some(target), lambda.next_switch(state.t), f.next_switch(state.t)])
                .unwrap_or(target);
            let (_, t_new) = clamp_step(state.t, params.dt, stop);
            let rep = solver.step(&mut state, t_new)?;
            let mut tr = solver.trace(&state);
            tr.mu_max = rep.mu_max;
            tr.dt = rep.dt;
            traces.push(tr);
            acc.steps += 1;
            acc.decay += rep.decay;
            acc.deposit += rep.deposit;
            acc.cap_loss += rep.cap_loss;
            acc.flux += rep.dt * rep.flux_in;
            acc.mu_total += rep.dt * rep.mu_total;
            acc.mu_min = acc.mu_min.min(rep.mu_min);
            acc.complementarity = acc.complementarity.max(rep.complementarity);
            acc.graph = acc.graph.max(rep.graph);
            acc.max_defect = acc.max_defect.max(rep.defect());
            acc.iterations += rep.iterations;
        }
        acc.t = state.t;
        acc.mass = grid.integrate_interior(&state.rho);
        if acc.steps == 0 {
            acc.mu_min = boundary_measure(grid, &state.p, &solver.lambda_nodes(state.t), solver.p_tol(state.t))
                [1..grid.last()]
                .iter()
                .fold(f64::INFINITY, |a, &v| a.min(v));
            acc.graph = state.p.iter().zip(&state.rho).fold(0.0f64, |a, (p, r)| a.max(p * (1.0 - r)));
        }
        ledger.push(acc);
        acc = fresh();
        frames.push(state.clone());
    }
    Ok(LimitRun { frames, ledger, traces, eps_sat: params.eps_sat })
}

/// Intervals `(a, b)` on which the pressure at one node vanishes, and the
/// reconstructed external density at each frame time (`None` while the
/// node carries pressure).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalDensity {
    pub intervals: Vec<(f64, f64)>,
    pub series: Vec<(f64, Option<f64>)>,
}

/// Rebuild `ρE(x_node, ·)` from recorded frames: `ρ0·exp(∫_0^t λ)` on an
/// interval starting at 0 and `exp(∫_a^t λ)` on one starting at `a > 0`.
pub fn external_density(
    frames: &[LimitState],
    node: usize,
    lambda: &SourceCoefficient,
    rho0: f64,
    p_tol: f64,
) -> ExternalDensity {
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut series = Vec::with_capacity(frames.len());
    let mut open: Option<f64> = None;
    for (k, fr) in frames.iter().enumerate() {
        let zero = fr.p[node] <= p_tol;
        if zero && open.is_none() {
            open = Some(if k == 0 { 0.0 } else { fr.t });
        }
        if !zero {
            if let Some(a) = open.take() {
                intervals.push((a, fr.t));
            }
        }
        let value = open.map(|a| {
            let start = if a == 0.0 { rho0 } else { 1.0 };
            start * lambda.integral(node, a, fr.t).exp()
        });
        series.push((fr.t, value));
    }
    if let Some(a) = open {
        intervals.push((a, frames.last().map_or(a, |f| f.t)));
    }
    ExternalDensity { intervals, series }
}
