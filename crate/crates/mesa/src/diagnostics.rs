//! Checks over recorded trajectories. Every check is a pure function of
//! the frames, ledger and traces, so re-running on files read back from
//! disk gives the same report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::limit::FrontTrace;
use crate::source::SourceCoefficient;
use crate::trajectory::{trapezoid, Ledger, Trajectory};

/// Relative tolerance of the exact ledger identities.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Relative tolerance of the velocity law on advancing fronts.
pub const VELOCITY_TOL: f64 = 0.15;
/// Largest front gradient allowed on receding frames.
pub const RECEDING_GRAD_TOL: f64 = 1e-3;
/// Window, in steps, of the measured front speed.
pub const SPEED_WINDOW: usize = 10;
/// Measured speed above which a window counts as advancing.
pub const ADVANCING_SPEED: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub passed: bool,
    #[serde(with = "nullable")]
    pub value: f64,
    #[serde(with = "nullable")]
    pub threshold: f64,
    pub context: String,
}

/// Non-finite floats as JSON `null`, read back as NaN.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

impl Check {
    /// Pass when `value ≤ threshold`.
    pub fn at_most(value: f64, threshold: f64, context: impl Into<String>) -> Self {
        Check { passed: value <= threshold, value, threshold, context: context.into() }
    }

    /// Pass when `value ≥ threshold`.
    pub fn at_least(value: f64, threshold: f64, context: impl Into<String>) -> Self {
        Check { passed: value >= threshold, value, threshold, context: context.into() }
    }

    /// Reported value without a pass/fail criterion.
    pub fn report(value: f64, context: impl Into<String>) -> Self {
        Check { passed: true, value, threshold: f64::NAN, context: context.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub checks: BTreeMap<String, Check>,
}

impl DiagnosticsReport {
    pub fn insert(&mut self, name: &str, check: Check) {
        let previous = self.checks.insert(name.to_string(), check);
        assert!(previous.is_none(), "check {name} registered twice");
    }

    pub fn passed(&self) -> bool {
        self.checks.values().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|(_, c)| !c.passed).map(|(k, _)| k.clone()).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, c) in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{status} {name}: value {:e} threshold {:e} ({})", c.value, c.threshold, c.context);
        }
        let _ = writeln!(s, "{} checks, {} failed", self.checks.len(), self.failures().len());
        s
    }
}

/// Per-step ledger identity and the growth envelope
/// `mass(t) ≤ mass(0) e^{Λt} + e^{Λt} ∫_0^t flux⁺`.
pub fn mass_balance(traj: &Trajectory, bound: f64) -> Check {
    let (defect, fluxes, masses): (f64, Vec<f64>, Vec<f64>) = match &traj.ledger {
        Ledger::Pme(l) => (
            l.iter().fold(0.0, |a, r| a.max(r.max_step_defect)),
            l.iter().map(|r| r.flux_in.max(0.0)).collect(),
            l.iter().map(|r| r.mass).collect(),
        ),
        Ledger::Limit(l) => (
            l.iter().fold(0.0, |a, r| a.max(r.max_defect)),
            l.iter().map(|r| r.flux.max(0.0)).collect(),
            l.iter().map(|r| r.mass).collect(),
        ),
        Ledger::Tumor(_) => return Check::report(f64::NAN, "no per-step ledger for tumor runs"),
    };
    let times = traj.times();
    let mut influx = 0.0;
    let mut worst_envelope = f64::NEG_INFINITY;
    for (k, (&t, &mass)) in times.iter().zip(&masses).enumerate() {
        influx += fluxes[k];
        let envelope = (masses[0] + influx) * (bound * t).exp();
        worst_envelope = worst_envelope.max((mass - envelope) / envelope.max(f64::MIN_POSITIVE));
    }
    let mut c = Check::at_most(
        defect,
        IDENTITY_TOL,
        format!("largest relative per-step defect; envelope excess {worst_envelope:e}"),
    );
    c.passed &= worst_envelope <= IDENTITY_TOL;
    c
}

/// Sign and range bounds; for limit runs also `ρ ≤ 1 + ε_sat`.
pub fn bounds_report(traj: &Trajectory, eps_sat: f64) -> Check {
    let per_frame: Vec<(f64, f64, f64, f64)> = traj
        .frames
        .par_iter()
        .map(|fr| {
            let rho_min = fr.rho.iter().fold(f64::INFINITY, |a, &v| a.min(v));
            let rho_max = fr.rho.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            let p_min = fr.p.iter().fold(f64::INFINITY, |a, &v| a.min(v));
            let p_max = fr.p.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            (rho_min, rho_max, p_min, p_max)
        })
        .collect();
    let rho_min = per_frame.iter().fold(f64::INFINITY, |a, v| a.min(v.0));
    let rho_max = per_frame.iter().fold(f64::NEG_INFINITY, |a, v| a.max(v.1));
    let p_min = per_frame.iter().fold(f64::INFINITY, |a, v| a.min(v.2));
    let p_max = per_frame.iter().fold(f64::NEG_INFINITY, |a, v| a.max(v.3));
    let support: Vec<f64> = traj
        .frames
        .iter()
        .map(|fr| fr.rho.iter().rposition(|&r| r > 0.0).map_or(traj.grid.geometry.inner, |k| traj.grid.nodes[k]))
        .collect();
    let slope = fit_slope(&traj.times(), &support);
    let upper_ok = match traj.solver {
        crate::scenario::SolverKind::Limit | crate::scenario::SolverKind::RadialOracle => rho_max <= 1.0 + eps_sat,
        _ => true,
    };
    Check {
        passed: rho_min >= 0.0 && p_min >= 0.0 && upper_ok,
        value: rho_min.min(p_min),
        threshold: 0.0,
        context: format!("min(ρ, p); max ρ {rho_max}, max p {p_max}, support growth rate {slope:.4}"),
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Discrete total variation of `u` on nodes at distance ≥ `margin` from
/// both ends.
pub fn total_variation(grid: &Grid, u: &[f64], margin: f64) -> f64 {
    let lo = grid.geometry.inner + margin;
    let hi = grid.geometry.outer - margin;
    (0..grid.last())
        .filter(|&i| grid.nodes[i] >= lo && grid.nodes[i + 1] <= hi)
        .map(|i| 0.5 * (grid.weight(i) + grid.weight(i + 1)) * (u[i + 1] - u[i]).abs())
        .sum()
}

/// Largest total variation over the frames.
pub fn tv_report(traj: &Trajectory, margin: f64) -> Check {
    let tv = traj
        .frames
        .par_iter()
        .map(|fr| total_variation(&traj.grid, &fr.rho, margin))
        .reduce(|| 0.0, f64::max);
    Check::report(tv, format!("max over frames of TV(ρ) on the {margin}-interior"))
}

/// `max p (1 - ρ) ≤ ε_sat ‖p‖_∞` over all frames.
pub fn graph_relation(traj: &Trajectory, eps_sat: f64) -> Check {
    let (graph, pmax) = traj
        .frames
        .iter()
        .map(|fr| {
            let g = fr.p.iter().zip(&fr.rho).fold(0.0f64, |a, (p, r)| a.max(p * (1.0 - r)));
            let pm = fr.p.iter().fold(0.0f64, |a, &v| a.max(v));
            (g, pm)
        })
        .fold((0.0f64, 0.0f64), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Check::at_most(graph, eps_sat * pmax, "max p(1 - ρ)")
}

/// Nodewise ordering of two runs on the same grid and frame times.
pub fn ordering_test(lower: &Trajectory, upper: &Trajectory, tol: f64) -> Check {
    if lower.frames.len() != upper.frames.len() {
        return Check { passed: false, value: f64::INFINITY, threshold: tol, context: "frame counts differ".into() };
    }
    let worst = lower
        .frames
        .par_iter()
        .zip(upper.frames.par_iter())
        .map(|(a, b)| {
            let rho = a.rho.iter().zip(&b.rho).fold(f64::NEG_INFINITY, |m, (x, y)| m.max(x - y));
            let p = a.p.iter().zip(&b.p).fold(f64::NEG_INFINITY, |m, (x, y)| m.max(x - y));
            rho.max(p)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Check::at_most(worst, tol, "max over frames and nodes of lower - upper (ρ and p)")
}

/// Measured front speed over `SPEED_WINDOW` steps against the law
/// `|∇p| / (1 - ρE)`. Returns the advancing and the receding checks.
pub fn velocity_law_check(traces: &[FrontTrace], receding_tol: f64) -> (Check, Check) {
    let w = SPEED_WINDOW;
    let mut worst = 0.0f64;
    let mut advancing = 0;
    let mut receding = 0;
    let mut grad_max = 0.0f64;
    let mut multi = 0;
    for k in 0..traces.len().saturating_sub(w) {
        let win = &traces[k..=k + w];
        if win.iter().any(|q| q.rho_e >= 1.0) {
            multi += 1;
            continue;
        }
        let (a, b) = (&win[0], &win[w]);
        let v = (b.front - a.front) / (b.t - a.t);
        if v > ADVANCING_SPEED {
            let law = win.iter().map(|q| q.grad / (1.0 - q.rho_e)).sum::<f64>() / (w + 1) as f64;
            worst = worst.max((v - law).abs() / law.abs().max(f64::MIN_POSITIVE));
            advancing += 1;
        } else if v < 0.0 {
            grad_max = grad_max.max(b.grad);
            receding += 1;
        }
    }
    let note = if multi > 0 { format!("; {multi} windows skipped") } else { String::new() };
    let adv = Check::at_most(worst, VELOCITY_TOL, format!("{advancing} advancing windows{note}"));
    let rec = Check::at_most(grad_max, receding_tol, format!("{receding} receding windows"));
    (adv, rec)
}

/// Per-step growth of the positive set bounded by
/// `⌈max μ dt / (1 - max ρE) / h⌉ + 1` cells.
pub fn no_jump_check(traces: &[FrontTrace], h: f64) -> Check {
    let mut worst = f64::NEG_INFINITY;
    for w in traces.windows(2) {
        let moved = w[1].active_end as f64 - w[0].active_end as f64;
        let room = (1.0 - w[1].rho_e_max).max(f64::MIN_POSITIVE);
        let allowed = (w[1].mu_max * w[1].dt / room / h).ceil() + 1.0;
        worst = worst.max(moved - allowed);
    }
    Check::at_most(worst.max(0.0), 0.0, "largest excess of active-set growth over the flux bound, in cells")
}

/// For λ non-decreasing in time and characteristic initial data: ρ and p
/// nodewise non-decreasing over the frames, and
/// `ρ = χ_Σ + ρ0 exp(∫λ)` off `Σ` within `ε_sat`, the partially filled
/// front cell excluded.
pub fn monotone_checks(traj: &Trajectory, lambda: &SourceCoefficient, eps_sat: f64) -> (Check, Check) {
    let mut decrease = 0.0f64;
    for w in traj.frames.windows(2) {
        for i in 0..traj.grid.len() {
            decrease = decrease.max(w[0].rho[i] - w[1].rho[i]).max(w[0].p[i] - w[1].p[i]);
        }
    }
    let rho0 = &traj.frames[0].rho;
    let mut worst = 0.0f64;
    for fr in &traj.frames {
        let front_cell = fr.rho.iter().position(|&r| r < 1.0 - eps_sat);
        for i in 1..traj.grid.last() {
            if fr.rho[i] >= 1.0 - eps_sat || Some(i) == front_cell {
                continue;
            }
            let expected = rho0[i] * lambda.integral(i, 0.0, fr.t).exp();
            worst = worst.max((fr.rho[i] - expected).abs());
        }
    }
    (
        Check::at_most(decrease, eps_sat, "largest decrease of ρ or p between frames"),
        Check::at_most(worst, eps_sat, "largest deviation from χ_Σ + ρ0 exp(∫λ) off Σ"),
    )
}

/// Whether λ is non-decreasing in time at every node.
pub fn lambda_nondecreasing(lambda: &SourceCoefficient, nodes: usize) -> bool {
    let stages = lambda.stages();
    stages.windows(2).all(|w| (0..nodes).all(|i| w[1].value.at(i) >= w[0].value.at(i)))
}

/// Gap between the measured front and the radial reference on frames
/// away from λ switches.
pub fn oracle_gap(traj: &Trajectory, switches: &[f64], eps_sat: f64) -> Option<Check> {
    let oracle = traj.oracle.as_ref()?;
    let mut worst = 0.0f64;
    let mut used = 0;
    let fronts = frame_fronts(traj, eps_sat);
    for (fr, front) in traj.frames.iter().zip(fronts) {
        if switches.contains(&fr.t) {
            continue;
        }
        worst = worst.max((front - oracle.radius_at(fr.t)).abs());
        used += 1;
    }
    Some(Check::at_most(worst, 2.0 * traj.grid.h, format!("max |front - R(t)| over {used} frames")))
}

/// Saturated front of each frame with the sub-cell fill of the next node.
pub fn frame_fronts(traj: &Trajectory, eps_sat: f64) -> Vec<f64> {
    let g = &traj.grid;
    let last = g.last();
    traj.frames
        .iter()
        .map(|fr| {
            let ext = fr.rho_ext.as_deref();
            let k = fr.rho.iter().position(|&r| r < 1.0 - eps_sat).map_or(last, |j| j.max(1) - 1);
            let mut front = g.nodes[k] + 0.5 * g.h;
            if k < last {
                let e = ext.map_or(0.0, |e| e[k + 1]);
                let theta = if e < 1.0 { (fr.rho[k + 1] - e) / (1.0 - e) } else { 0.0 };
                front += theta.clamp(0.0, 1.0) * g.h;
            }
            front
        })
        .collect()
}

/// One row of the m-convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub m: f64,
    /// `‖ρ_m - ρ_∞‖_{L¹(Q_T)}`.
    pub rho_l1: f64,
    /// `‖p_m - p_∞‖_{L¹(Q_T)}`.
    pub p_l1: f64,
    /// `‖p_m (1 - ρ_m)‖_{L¹(Q_T)}`.
    pub graph_l1: f64,
    pub p_max: f64,
    pub tv_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Observed order of `rho_l1` in `m` between consecutive rows.
    pub rates: Vec<f64>,
    pub checks: DiagnosticsReport,
}

/// Compare finite-m runs with a limit run recorded at the same times.
pub fn m_convergence_study(runs: &[Trajectory], limit: &Trajectory, tv_margin: f64) -> ConvergenceStudy {
    let mut rows: Vec<ConvergenceRow> = runs
        .par_iter()
        .map(|run| {
            let diff = |sel: fn(&crate::trajectory::Frame) -> &Vec<f64>| {
                let norms: Vec<f64> = run
                    .frames
                    .iter()
                    .zip(&limit.frames)
                    .map(|(a, b)| {
                        let d: Vec<f64> = sel(a).iter().zip(sel(b)).map(|(x, y)| x - y).collect();
                        run.grid.l1(&d)
                    })
                    .collect();
                trapezoid(&run.times(), &norms)
            };
            let graph = run.space_time_l1(|_, fr| fr.p.iter().zip(&fr.rho).map(|(p, r)| p * (1.0 - r)).collect());
            ConvergenceRow {
                m: run.m.unwrap_or(f64::NAN),
                rho_l1: diff(|f| &f.rho),
                p_l1: diff(|f| &f.p),
                graph_l1: graph,
                p_max: run.frames.iter().flat_map(|f| f.p.iter()).fold(0.0f64, |a, &v| a.max(v)),
                tv_max: run.frames.iter().map(|f| total_variation(&run.grid, &f.rho, tv_margin)).fold(0.0, f64::max),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.m.total_cmp(&b.m));
    let rates: Vec<f64> =
        rows.windows(2).map(|w| (w[0].rho_l1 / w[1].rho_l1).ln() / (w[1].m / w[0].m).ln()).collect();
    let mut checks = DiagnosticsReport::default();
    let frames_match = runs.iter().all(|r| r.times() == limit.times());
    checks.insert(
        "frame_alignment",
        Check { passed: frames_match, value: runs.len() as f64, threshold: f64::NAN, context: "finite-m and limit frame times agree".into() },
    );
    if rows.len() > 1 {
        let strictly = |f: fn(&ConvergenceRow) -> f64| -> (bool, f64) {
            let ok = rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
            let worst = rows.windows(2).map(|w| f(&w[1]) / f(&w[0])).fold(0.0, f64::max);
            (ok, worst)
        };
        let (ok, worst) = strictly(|r| r.rho_l1);
        checks.insert("rho_l1_decreasing", Check { passed: ok, value: worst, threshold: 1.0, context: "largest ratio of consecutive ‖ρ_m - ρ_∞‖".into() });
        let (ok, worst) = strictly(|r| r.graph_l1);
        checks.insert("graph_l1_decreasing", Check { passed: ok, value: worst, threshold: 1.0, context: "largest ratio of consecutive ‖p_m(1 - ρ_m)‖".into() });
        let (ok, worst) = strictly(|r| r.p_l1);
        checks.insert("p_l1_decreasing", Check { passed: ok, value: worst, threshold: 1.0, context: "largest ratio of consecutive ‖p_m - p_∞‖".into() });
        let coarse = rows[0].p_max;
        let pm = rows.iter().map(|r| r.p_max).fold(0.0, f64::max);
        checks.insert("pressure_bound_uniform", Check::at_most(pm, coarse * (1.0 + IDENTITY_TOL), "max p over the sweep against the coarsest m"));
        let tv_lo = rows.iter().map(|r| r.tv_max).fold(f64::INFINITY, f64::min);
        let tv_hi = rows.iter().map(|r| r.tv_max).fold(0.0, f64::max);
        checks.insert("tv_bounded", Check::at_most(tv_hi / tv_lo, 2.0, "ratio of largest to smallest TV across the sweep"));
    }
    ConvergenceStudy { rows, rates, checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Geometry};

    #[test]
    fn tv_of_step_and_bump() {
        let g = build_grid(Geometry::cartesian(0.0, 4.0), 400).unwrap();
        let step = g.sample(|x| if (1.0..3.0).contains(&x) { 1.0 } else { 0.0 });
        assert!((total_variation(&g, &step, 0.5) - 2.0).abs() < 1e-12);
        let bump = g.sample(|x| (1.0 - (x - 2.0).powi(2)).max(0.0) * 0.7);
        assert!((total_variation(&g, &bump, 0.5) - 1.4).abs() < 1e-12);
    }

    #[test]
    fn slope_fit() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        assert!((fit_slope(&x, &y) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn report_rejects_duplicates() {
        let mut r = DiagnosticsReport::default();
        r.insert("a", Check::report(1.0, ""));
        let dup = std::panic::catch_unwind(move || {
            let mut r = r;
            r.insert("a", Check::report(1.0, ""));
        });
        assert!(dup.is_err());
    }
}
