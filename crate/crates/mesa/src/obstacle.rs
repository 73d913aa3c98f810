//! Obstacle problem on a prescribed mask, solved by projected SOR.
//!
//! Find `p ≥ 0` with `p = f` at the inner node, `p = 0` off the mask and
//! `min(p, -Δ_h p - s(p)) = 0` on masked nodes, where `s` is either a
//! fixed rate per node or a decreasing function of `p`.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Relative threshold separating the positive set `{p > 0}` from round-off.
pub const ACTIVE_REL_TOL: f64 = 1e-8;

/// Pressure-dependent source `G_i(p)`, strictly decreasing in `p`.
pub trait ConcaveSource {
    fn value(&self, node: usize, p: f64) -> f64;
    /// `∂_p G_i(p)`, must be negative.
    fn slope(&self, node: usize, p: f64) -> f64;
    /// Antiderivative in `p`, vanishing at `p = 0`.
    fn primitive(&self, node: usize, p: f64) -> f64;
}

#[derive(Clone, Copy)]
pub enum ObstacleSource<'a> {
    /// `s_i(p) = λ_i`.
    Linear(&'a [f64]),
    Concave(&'a dyn ConcaveSource),
}

impl ObstacleSource<'_> {
    #[inline]
    pub fn value(&self, i: usize, p: f64) -> f64 {
        match self {
            ObstacleSource::Linear(l) => l[i],
            ObstacleSource::Concave(g) => g.value(i, p),
        }
    }

    pub fn primitive(&self, i: usize, p: f64) -> f64 {
        match self {
            ObstacleSource::Linear(l) => l[i] * p,
            ObstacleSource::Concave(g) => g.primitive(i, p),
        }
    }
}

pub struct ObstacleProblem<'a> {
    pub grid: &'a Grid,
    /// Nodes allowed to carry pressure.
    pub mask: &'a [bool],
    pub source: ObstacleSource<'a>,
    /// Dirichlet pressure at the inner node; `None` pins it to 0.
    pub inner: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsorOptions {
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PsorOptions {
    fn default() -> Self {
        PsorOptions { omega: 1.7, tol: 1e-10, max_iter: 5_000_000 }
    }
}

/// SOR factor that is optimal for the Dirichlet Laplacian on `n` nodes.
pub fn optimal_omega(n: usize) -> f64 {
    2.0 / (1.0 + (std::f64::consts::PI / (n as f64 + 1.0)).sin())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSolution {
    pub p: Vec<f64>,
    /// `p > 1e-8·f`.
    pub active: Vec<bool>,
    pub iterations: usize,
    /// Largest nodewise update of the final sweep.
    pub residual: f64,
    /// Largest nodewise complementarity violation at exit.
    pub violation: f64,
}

impl ObstacleProblem<'_> {
    fn check(&self) -> Result<()> {
        let n = self.grid.len();
        if self.mask.len() != n {
            return Err(Error::Parameter("mask length does not match grid".into()));
        }
        if let ObstacleSource::Linear(l) = self.source {
            if l.len() != n {
                return Err(Error::Parameter("source length does not match grid".into()));
            }
            if l.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parameter("non-finite source".into()));
            }
        }
        if let Some(f) = self.inner {
            if !(f >= 0.0 && f.is_finite()) {
                return Err(Error::Parameter(format!("inner pressure {f} must be finite and non-negative")));
            }
            if !self.mask[0] {
                return Err(Error::Infeasible("inner node outside the mask".into()));
            }
        }
        Ok(())
    }

    /// Scale used for the active-set threshold.
    pub fn pressure_scale(&self) -> f64 {
        self.inner.filter(|&f| f > 0.0).unwrap_or(1.0)
    }

    /// Nodewise `-Δ_h p - s(p)` at an interior node.
    #[inline]
    pub fn node_residual(&self, p: &[f64], i: usize) -> f64 {
        let (lo, mid, hi) = self.grid.stencil(i);
        mid * p[i] - lo * p[i - 1] - hi * p[i + 1] - self.source.value(i, p[i])
    }

    /// Largest of `-r_i` over masked interior nodes and `|r_i|` where
    /// `p_i > 0`.
    pub fn violation(&self, p: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for i in 1..self.grid.last() {
            if self.mask[i] {
                let r = self.node_residual(p, i);
                worst = worst.max(-r);
                if p[i] > 0.0 {
                    worst = worst.max(r.abs());
                }
            }
        }
        worst
    }

    /// Discrete energy `Σ ½|D p|² h - Σ 𝒢(p) h` (cartesian weights).
    pub fn energy(&self, p: &[f64]) -> f64 {
        let g = self.grid;
        let h = g.h;
        let mut e = 0.0;
        for i in 0..g.last() {
            let d = (p[i + 1] - p[i]) / h;
            e += 0.5 * d * d * h;
        }
        for i in 1..g.last() {
            e -= self.source.primitive(i, p[i]) * h;
        }
        e
    }
}

/// Projected SOR from a zero start.
pub fn solve_obstacle(problem: &ObstacleProblem, opts: PsorOptions) -> Result<ObstacleSolution> {
    let zero = vec![0.0; problem.grid.len()];
    solve_obstacle_from(problem, opts, &zero)
}

/// Projected SOR from `init`; off-mask and negative entries are reset.
pub fn solve_obstacle_from(
    problem: &ObstacleProblem,
    opts: PsorOptions,
    init: &[f64],
) -> Result<ObstacleSolution> {
    problem.check()?;
    if !(opts.omega > 0.0 && opts.omega < 2.0) {
        return Err(Error::Parameter(format!("omega {} not in (0, 2)", opts.omega)));
    }
    let grid = problem.grid;
    let last = grid.last();
    let mut p: Vec<f64> = init
        .iter()
        .zip(problem.mask)
        .map(|(&v, &m)| if m && v.is_finite() { v.max(0.0) } else { 0.0 })
        .collect();
    p[0] = problem.inner.unwrap_or(0.0);
    p[last] = 0.0;

    let nodes: Vec<usize> = (1..last).filter(|&i| problem.mask[i]).collect();
    let omega = opts.omega;
    let mut iterations = 0;
    let mut update = 0.0;
    loop {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: update });
        }
        iterations += 1;
        update = 0.0f64;
        for &i in &nodes {
            let (lo, mid, hi) = grid.stencil(i);
            let nb = lo * p[i - 1] + hi * p[i + 1];
            let target = match problem.source {
                ObstacleSource::Linear(l) => (nb + l[i]) / mid,
                ObstacleSource::Concave(g) => newton(g, i, mid, nb, p[i]),
            };
            let next = (p[i] + omega * (target - p[i])).max(0.0);
            update = update.max((next - p[i]).abs());
            p[i] = next;
        }
        if update < opts.tol {
            let pmax = p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let floor = 16.0 * f64::EPSILON * pmax * 2.0 / (grid.h * grid.h);
            let violation = problem.violation(&p);
            if violation <= opts.tol.max(floor) || nodes.is_empty() {
                let p_tol = ACTIVE_REL_TOL * problem.pressure_scale();
                let active = p.iter().map(|&v| v > p_tol).collect();
                return Ok(ObstacleSolution { p, active, iterations, residual: update, violation });
            }
        }
    }
}

/// Root of `mid·q - nb - G(q) = 0` by at most 5 Newton steps.
fn newton(g: &dyn ConcaveSource, i: usize, mid: f64, nb: f64, start: f64) -> f64 {
    let mut q = start;
    for _ in 0..5 {
        let phi = mid * q - nb - g.value(i, q);
        let dphi = mid - g.slope(i, q);
        let step = phi / dphi;
        q -= step;
        if step.abs() <= 1e-15 * (1.0 + q.abs()) {
            break;
        }
    }
    q
}

/// `Σ_interior w |p (Δ_h p + s(p))| h`.
pub fn complementarity_residual(grid: &Grid, p: &[f64], source: ObstacleSource, mask: &[bool]) -> f64 {
    let mut acc = 0.0;
    for i in 1..grid.last() {
        if mask[i] || p[i] != 0.0 {
            let lap = grid.laplacian_at(p, i);
            acc += grid.weight(i) * (p[i] * (lap + source.value(i, p[i]))).abs();
        }
    }
    acc * grid.h
}

/// Nodewise `μ = Δ_h p + λ·1{p > p_tol}`; 0 at the boundary nodes.
pub fn boundary_measure(grid: &Grid, p: &[f64], lambda: &[f64], p_tol: f64) -> Vec<f64> {
    let mut mu = vec![0.0; grid.len()];
    for i in 1..grid.last() {
        let ind = if p[i] > p_tol { lambda[i] } else { 0.0 };
        mu[i] = grid.laplacian_at(p, i) + ind;
    }
    mu
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Geometry};

    fn smooth_fit(cells: usize) -> (Grid, ObstacleSolution) {
        let g = build_grid(Geometry::cartesian(1.0, 10.0), cells).unwrap();
        let lam = vec![-1.0; g.len()];
        let mask = vec![true; g.len()];
        let prob = ObstacleProblem { grid: &g, mask: &mask, source: ObstacleSource::Linear(&lam), inner: Some(1.0) };
        let sol = solve_obstacle(&prob, PsorOptions::default()).unwrap();
        (g, sol)
    }

    #[test]
    fn contact_point_within_one_cell() {
        let (g, sol) = smooth_fit(360);
        let contact = g.nodes[sol.active.iter().rposition(|&a| a).unwrap() + 1];
        let r_star = 1.0 + 2f64.sqrt();
        assert!((contact - r_star).abs() <= g.h, "{contact}");
        for (x, p) in g.nodes.iter().zip(&sol.p) {
            let exact = if *x < r_star { 0.5 * (x - r_star).powi(2) } else { 0.0 };
            assert!((p - exact).abs() < 2.0 * g.h * g.h + 1e-9);
        }
        assert!(sol.residual <= 1e-10);
    }

    #[test]
    fn pinned_nodes_stay_zero() {
        let g = build_grid(Geometry::cartesian(0.0, 1.0), 40).unwrap();
        let lam = vec![3.0; g.len()];
        let mask: Vec<bool> = g.nodes.iter().map(|&x| x < 0.5).collect();
        let prob = ObstacleProblem { grid: &g, mask: &mask, source: ObstacleSource::Linear(&lam), inner: Some(1.0) };
        let sol = solve_obstacle(&prob, PsorOptions::default()).unwrap();
        for i in 0..g.len() {
            if !mask[i] {
                assert_eq!(sol.p[i], 0.0);
            }
        }
    }

    #[test]
    fn unmasked_inner_is_infeasible() {
        let g = build_grid(Geometry::cartesian(0.0, 1.0), 10).unwrap();
        let lam = vec![0.0; g.len()];
        let mask = vec![false; g.len()];
        let prob = ObstacleProblem { grid: &g, mask: &mask, source: ObstacleSource::Linear(&lam), inner: Some(1.0) };
        assert!(matches!(solve_obstacle(&prob, PsorOptions::default()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn zero_pressure_has_zero_residual() {
        let g = build_grid(Geometry::cartesian(0.0, 1.0), 10).unwrap();
        let lam = vec![-1.0; g.len()];
        let mask = vec![true; g.len()];
        let p = vec![0.0; g.len()];
        assert_eq!(complementarity_residual(&g, &p, ObstacleSource::Linear(&lam), &mask), 0.0);
    }

    #[test]
    fn measure_of_linear_profile() {
        // λ = 0 on [1, R] with full mask up to R: all flux exits at R
        let g = build_grid(Geometry::cartesian(1.0, 4.0), 300).unwrap();
        let r = 2.5;
        let mask: Vec<bool> = g.nodes.iter().map(|&x| x < r - 1e-9).collect();
        let lam = vec![0.0; g.len()];
        let prob = ObstacleProblem { grid: &g, mask: &mask, source: ObstacleSource::Linear(&lam), inner: Some(1.0) };
        let sol = solve_obstacle(&prob, PsorOptions { omega: optimal_omega(150), ..Default::default() }).unwrap();
        let mu = boundary_measure(&g, &sol.p, &lam, 1e-8);
        let k = g.nearest(r);
        let expect = 1.0 / ((r - 1.0) * g.h);
        assert!((mu[k] - expect).abs() / expect < 1e-6, "{} vs {expect}", mu[k]);
        for (i, v) in mu.iter().enumerate() {
            if i != k {
                assert!(v.abs() < 1e-5, "node {i}: {v}");
            }
        }
    }
}
