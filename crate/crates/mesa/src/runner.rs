//! Orchestration: run a scenario, pick the diagnostics that apply to it,
//! write run directories, sweep the exponent, compare with the radial
//! reference and re-verify written runs.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    bounds_report, frame_fronts, graph_relation, lambda_nondecreasing, m_convergence_study, mass_balance,
    monotone_checks, no_jump_check, oracle_gap, tv_report, velocity_law_check, Check, ConvergenceStudy,
    DiagnosticsReport, RECEDING_GRAD_TOL,
};
use crate::error::{Error, Result};
use crate::initial::validate_initial_data;
use crate::io::{
    gnuplot_script, read_manifest, read_trajectory, versions, write_json, write_report, write_trajectory,
    DiagnosticsSummary, Manifest, GNUPLOT_FILE, MANIFEST_FILE, REPORT_JSON, REPORT_TEXT,
};
use crate::limit::{run_limit, LimitParams};
use crate::pme::{run_pme, Inner, PmeParams};
use crate::radial::{integrate_radial, RadialSetup};
use crate::scenario::{ScenarioConfig, Setup, SolverKind};
use crate::source::SourceCoefficient;
use crate::trajectory::{Ledger, Trajectory};
use crate::tumor::{run_tumor, validate_growth_law, GrowthLaw, TumorParams};

/// Pressure level defining the measured support in the Figure-1 checks.
pub const SUPPORT_LEVEL: f64 = 1e-3;

/// Thread pool capped by `MESA_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("MESA_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("MESA_THREADS={v:?} is not a positive integer")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}

fn limit_params(cfg: &ScenarioConfig) -> LimitParams {
    let tol = cfg.tolerances;
    let mut p = LimitParams::new(tol.limit_dt, cfg.t_end);
    p.eps_sat = tol.eps_sat;
    p.obstacle_tol = tol.obstacle_tol;
    p.omega = tol.omega;
    p
}

fn radial_setup(cfg: &ScenarioConfig, setup: &Setup) -> RadialSetup {
    RadialSetup {
        n: cfg.geometry.dim(),
        inner: cfg.geometry.inner,
        f: setup.f.at(0.0),
        lambda: setup.lambda.clone(),
    }
}

/// Run the configured solver and record its trajectory.
pub fn execute(cfg: &ScenarioConfig) -> Result<Trajectory> {
    let setup = cfg.setup()?;
    let grid = &setup.grid;
    let rho0 = cfg.initial_density(grid, &setup.f)?;
    let tol = cfg.tolerances;
    match cfg.solver {
        SolverKind::Pme => {
            let m = cfg.m.ok_or_else(|| Error::Config("m missing".into()))?;
            let params = PmeParams { m, cfl_safety: tol.cfl_safety, t_end: cfg.t_end, max_dt: tol.max_dt };
            let run = run_pme(grid, &rho0, params, &setup.lambda, Inner::Injection(setup.f.clone()), &setup.outputs)?;
            Ok(Trajectory::from_pme(grid, &run))
        }
        SolverKind::Limit | SolverKind::RadialOracle => {
            let run = run_limit(grid, &rho0, &setup.lambda, &setup.f, limit_params(cfg), &setup.outputs)?;
            let mut traj = Trajectory::from_limit(grid, &run, &setup.f);
            if cfg.solver == SolverKind::RadialOracle {
                let r0 = cfg
                    .initial_front()
                    .ok_or_else(|| Error::Config("radial oracle needs front initial data".into()))?;
                let ext = cfg.external_profile();
                let rho_e = move |r: f64| ext.at(r);
                traj.oracle = Some(integrate_radial(&radial_setup(cfg, &setup), r0, &rho_e, cfg.t_end)?);
            }
            Ok(traj)
        }
        SolverKind::Tumor => {
            let m = cfg.m.ok_or_else(|| Error::Config("m missing".into()))?;
            let spec = cfg.tumor.ok_or_else(|| Error::Config("tumor section missing".into()))?;
            let law = spec.law;
            let c0 = vec![spec.nutrient.unwrap_or(law.c_boundary()); grid.len()];
            let params =
                TumorParams { m, cfl_safety: tol.cfl_safety, max_dt: tol.max_dt, t_end: cfg.t_end, frozen: spec.frozen };
            let run = run_tumor(grid, &rho0, &c0, &law, params, &setup.outputs)?;
            Ok(Trajectory::from_tumor(grid, &run))
        }
    }
}

/// Largest positive part of λ over stages and nodes.
pub fn lambda_sup(lambda: &SourceCoefficient, nodes: usize) -> f64 {
    lambda.stages().iter().flat_map(|s| (0..nodes).map(move |i| s.value.at(i))).fold(0.0, f64::max)
}

/// Rightmost node with `p > level`, as a position; the inner radius when
/// there is none.
pub fn support_series(traj: &Trajectory, level: f64) -> Vec<f64> {
    traj.frames
        .iter()
        .map(|fr| fr.p.iter().rposition(|&v| v > level).map_or(traj.grid.geometry.inner, |k| traj.grid.nodes[k]))
        .collect()
}

/// Qualitative Figure-1 checks on a finite-m run with λ = -1, -5, -1
/// switching at 0.75 and 1: support growth before the first switch, a
/// drop across it, decay of the freed density at rate -5 on (0.8, 0.95)
/// and renewed growth on (1.05, 1.8).
pub fn figure1_checks(traj: &Trajectory) -> Vec<(&'static str, Check)> {
    let times = traj.times();
    let support = support_series(traj, SUPPORT_LEVEL);
    let tol = 1e-12;
    let largest_drop = |a: f64, b: f64| -> f64 {
        let idx: Vec<usize> = (0..times.len()).filter(|&k| times[k] > a && times[k] < b).collect();
        idx.windows(2).map(|w| support[w[0]] - support[w[1]]).fold(0.0, f64::max)
    };
    let at = |t: f64| times.iter().position(|&s| (s - t).abs() < 1e-9);
    let mut out = Vec::new();
    out.push((
        "figure1_support_grows_early",
        Check::at_most(largest_drop(0.0, 0.75), tol, "largest decrease of the support of {p > 1e-3} on (0, 0.75)"),
    ));
    let before = times.iter().rposition(|&t| t <= 0.75 + 1e-9);
    let after = at(0.80);
    let (drop_check, node) = match (before, after) {
        (Some(b), Some(a)) => {
            let c = Check::at_least(
                support[b] - support[a],
                traj.grid.h,
                format!("support at 0.75 ({}) minus support at 0.80 ({})", support[b], support[a]),
            );
            let mid = traj.grid.nearest(0.5 * (support[a] + support[b]));
            (c, Some(mid))
        }
        _ => (Check { passed: false, value: f64::NAN, threshold: traj.grid.h, context: "frames at 0.75 and 0.80 missing".into() }, None),
    };
    out.push(("figure1_support_drops", drop_check));
    let rate = node.and_then(|i| {
        let (t, y): (Vec<f64>, Vec<f64>) = traj
            .frames
            .iter()
            .filter(|fr| fr.t > 0.8 + 1e-9 && fr.t < 0.95 - 1e-9 && fr.rho[i] > 0.0)
            .map(|fr| (fr.t, fr.rho[i].ln()))
            .unzip();
        (t.len() > 2).then(|| (crate::diagnostics::fit_slope(&t, &y), traj.grid.nodes[i]))
    });
    out.push((
        "figure1_decay_rate",
        match rate {
            Some((r, x)) => Check::at_most((r + 5.0).abs() / 5.0, 0.05, format!("fitted rate {r:.5} of ln ρ at x = {x} on (0.8, 0.95)")),
            None => Check { passed: false, value: f64::NAN, threshold: 0.05, context: "no desaturated node".into() },
        },
    ));
    out.push((
        "figure1_support_grows_late",
        Check::at_most(largest_drop(1.05, 1.8 + 1e-9), tol, "largest decrease of the support of {p > 1e-3} on (1.05, 1.8)"),
    ));
    out
}

/// Whether the initial pressure support covers every saturated interior
/// node, so that the initial state is its own pressure support.
fn support_is_saturated_set(traj: &Trajectory, eps_sat: f64) -> bool {
    let fr = &traj.frames[0];
    let Some(active) = &fr.active else { return false };
    (1..traj.grid.last()).all(|i| (fr.rho[i] >= 1.0 - eps_sat) == active[i])
}

/// Checks applicable to `traj` given the configuration that produced it.
pub fn diagnose(traj: &Trajectory, cfg: &ScenarioConfig) -> Result<DiagnosticsReport> {
    let setup = cfg.setup()?;
    let grid = &traj.grid;
    let n = grid.len();
    let eps = cfg.tolerances.eps_sat;
    let mut r = DiagnosticsReport::default();
    r.insert("mass_balance", mass_balance(traj, lambda_sup(&setup.lambda, n)));
    r.insert("bounds", bounds_report(traj, eps));
    let margin = 0.1 * (grid.geometry.outer - grid.geometry.inner);
    r.insert("total_variation", tv_report(traj, margin));
    match &traj.ledger {
        Ledger::Pme(l) => {
            let clips: usize = l.iter().map(|x| x.clipped).sum();
            r.insert("clips", Check::at_most(clips as f64, 0.0, "negative densities clipped"));
            if let (Some(radii), Some(m)) = (cfg.barriers, traj.m) {
                let lam0: Vec<f64> = (0..n).map(|i| setup.lambda.at(i, 0.0)).collect();
                let rep = validate_initial_data(
                    grid,
                    &traj.frames[0].rho,
                    m,
                    &lam0,
                    setup.lambda.bound(),
                    setup.f.at(0.0),
                    radii,
                )?;
                let bad = rep.upper_violations.len() + rep.lower_violations.len();
                r.insert(
                    "initial_data",
                    Check {
                        passed: rep.passed(),
                        value: bad as f64,
                        threshold: 0.0,
                        context: format!(
                            "barrier violations; lower barrier non-negative {}; source L1 {:e}; gradient L1 {:e}",
                            rep.lower_positive, rep.source_l1, rep.gradient_l1
                        ),
                    },
                );
            }
            if cfg.name == "figure1" {
                for (name, c) in figure1_checks(traj) {
                    r.insert(name, c);
                }
            }
        }
        Ledger::Limit(l) => {
            r.insert("graph_relation", graph_relation(traj, eps));
            let mu_min = l.iter().fold(f64::INFINITY, |a, x| a.min(x.mu_min));
            r.insert("boundary_measure", Check::at_least(mu_min, -cfg.tolerances.obstacle_tol, "min μ over steps"));
            let comp = l.iter().fold(0.0f64, |a, x| a.max(x.complementarity));
            r.insert("complementarity", Check::report(comp, "max complementarity residual of the pressure solves"));
            if traj.traces.len() > 1 {
                let lam_max = setup.lambda.bound();
                let (adv, rec) = velocity_law_check(&traj.traces, RECEDING_GRAD_TOL.max(lam_max * grid.h));
                r.insert("velocity_advancing", adv);
                r.insert("velocity_receding", rec);
                r.insert("no_jump", no_jump_check(&traj.traces, grid.h));
            }
            let characteristic = cfg.external_profile().value == 0.0;
            if lambda_nondecreasing(&setup.lambda, n) && characteristic && support_is_saturated_set(traj, eps) {
                let (mono, repr) = monotone_checks(traj, &setup.lambda, eps);
                r.insert("monotone_in_time", mono);
                r.insert("representation", repr);
            }
            if let Some(c) = oracle_gap(traj, &setup.lambda.switch_times(), eps) {
                r.insert("oracle_gap", c);
            }
        }
        Ledger::Tumor(l) => {
            let spec = cfg.tumor.unwrap_or_default();
            let c_b = spec.law.c_boundary();
            let c_min = l.iter().fold(f64::INFINITY, |a, x| a.min(x.c_min));
            let c_max = l.iter().fold(f64::NEG_INFINITY, |a, x| a.max(x.c_max));
            let clipped: usize = l.iter().map(|x| x.c_clipped + x.clipped).sum();
            r.insert(
                "nutrient_bounds",
                Check {
                    passed: c_min >= 0.0 && c_max <= c_b && clipped == 0,
                    value: clipped as f64,
                    threshold: 0.0,
                    context: format!("clips; nutrient range [{c_min}, {c_max}] against [0, {c_b}]"),
                },
            );
            let p_max = l.iter().fold(0.0f64, |a, x| a.max(x.p_max));
            r.insert(
                "growth_law",
                Check {
                    passed: validate_growth_law(&spec.law, p_max.max(1.0)).is_ok(),
                    value: p_max,
                    threshold: f64::NAN,
                    context: "structural hypotheses on [0, max p]".into(),
                },
            );
            let comp = l.iter().skip(1).fold(0.0f64, |a, x| a.max(x.complementarity));
            r.insert("complementarity", Check::report(comp, "max over frames after the first of ∫|p(Δp + G)|"));
        }
    }
    Ok(r)
}

/// Result of [`run_to_dir`].
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub report: DiagnosticsReport,
    pub manifest: Manifest,
}

/// Run, diagnose and write a complete run directory.
pub fn run_to_dir(cfg: &ScenarioConfig, out: &Path, gnuplot: bool) -> Result<RunOutcome> {
    let pool = thread_pool()?;
    let threads = pool.current_num_threads();
    pool.install(|| {
        let start = Instant::now();
        let traj = execute(cfg)?;
        let wall_time_s = start.elapsed().as_secs_f64();
        let report = diagnose(&traj, cfg)?;
        fs::create_dir_all(out)?;
        let mut files = write_trajectory(out, &traj)?;
        write_report(out, &report)?;
        files.extend([REPORT_JSON.to_string(), REPORT_TEXT.to_string()]);
        if gnuplot {
            fs::write(out.join(GNUPLOT_FILE), gnuplot_script(&traj, &cfg.name))?;
            files.push(GNUPLOT_FILE.to_string());
        }
        files.push(MANIFEST_FILE.to_string());
        let manifest = Manifest {
            config: cfg.clone(),
            versions: versions(),
            wall_time_s,
            threads,
            diagnostics: DiagnosticsSummary::from(&report),
            files,
        };
        write_json(&out.join(MANIFEST_FILE), &manifest)?;
        Ok(RunOutcome { trajectory: traj, report, manifest })
    })
}

/// Result of [`verify_dir`].
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub report: DiagnosticsReport,
    /// The recomputed report serializes identically to `report.json`.
    pub matches_stored: bool,
}

/// Re-read a run directory and recompute its diagnostics.
pub fn verify_dir(out: &Path) -> Result<Verification> {
    let manifest = read_manifest(out)?;
    let cfg = manifest.config;
    let traj = read_trajectory(out, cfg.solver, cfg.m)?;
    let report = thread_pool()?.install(|| diagnose(&traj, &cfg))?;
    let stored = fs::read_to_string(out.join(REPORT_JSON)).ok();
    let fresh = serde_json::to_string_pretty(&report)?;
    let matches_stored = stored.as_deref().map(str::trim_end) == Some(fresh.as_str());
    Ok(Verification { report, matches_stored })
}

/// Result of [`sweep_m`].
pub struct SweepOutcome {
    pub study: ConvergenceStudy,
    pub runs: Vec<RunOutcome>,
    pub limit: RunOutcome,
}

/// Run `cfg` at each exponent of `ms` and once in the limit, into
/// `out/m_<m>/` and `out/limit/`, and write the convergence table.
pub fn sweep_m(cfg: &ScenarioConfig, ms: &[f64], out: &Path) -> Result<SweepOutcome> {
    if ms.is_empty() {
        return Err(Error::Config("empty m list".into()));
    }
    let mut finite = Vec::with_capacity(ms.len());
    for &m in ms {
        let mut c = cfg.clone();
        c.solver = SolverKind::Pme;
        c.m = Some(m);
        c.name = format!("{}-m{m}", cfg.name);
        c.validate()?;
        finite.push(c);
    }
    let mut lim = cfg.clone();
    lim.solver = SolverKind::Limit;
    lim.m = None;
    lim.barriers = None;
    lim.name = format!("{}-limit", cfg.name);
    lim.validate()?;

    fs::create_dir_all(out)?;
    let pool = thread_pool()?;
    let (limit, runs) = pool.install(|| {
        rayon::join(
            || run_to_dir(&lim, &out.join("limit"), false),
            || {
                finite
                    .par_iter()
                    .map(|c| run_to_dir(c, &out.join(format!("m_{}", c.m.unwrap_or_default())), false))
                    .collect::<Result<Vec<_>>>()
            },
        )
    });
    let (limit, runs) = (limit?, runs?);
    let trajs: Vec<Trajectory> = runs.iter().map(|r| r.trajectory.clone()).collect();
    let margin = 0.1 * (cfg.geometry.outer - cfg.geometry.inner);
    let study = pool.install(|| m_convergence_study(&trajs, &limit.trajectory, margin));
    write_json(&out.join("convergence.json"), &study)?;
    let mut w = csv::Writer::from_path(out.join("convergence.csv"))?;
    for row in &study.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    write_report(out, &study.checks)?;
    Ok(SweepOutcome { study, runs, limit })
}

/// Front of the limit solver against the radial reference at each frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub h: f64,
    pub max_gap: f64,
    pub threshold: f64,
    pub passed: bool,
    /// `(t, front, R(t))` per frame; frames at λ switches carry `None`
    /// for the reference since the radius jumps there.
    pub rows: Vec<(f64, f64, Option<f64>)>,
    pub t_star: Option<f64>,
}

/// Run the limit solver and the radial reference on the same scenario.
pub fn oracle_compare(cfg: &ScenarioConfig) -> Result<OracleComparison> {
    let mut c = cfg.clone();
    c.solver = SolverKind::RadialOracle;
    c.m = None;
    c.validate()?;
    let traj = execute(&c)?;
    let setup = c.setup()?;
    let switches = setup.lambda.switch_times();
    let oracle = traj.oracle.as_ref().expect("radial oracle run records the reference");
    let fronts = frame_fronts(&traj, c.tolerances.eps_sat);
    let rows: Vec<(f64, f64, Option<f64>)> = traj
        .frames
        .iter()
        .zip(&fronts)
        .map(|(fr, &x)| (fr.t, x, (!switches.contains(&fr.t)).then(|| oracle.radius_at(fr.t))))
        .collect();
    let max_gap = rows.iter().filter_map(|&(_, x, r)| r.map(|r| (x - r).abs())).fold(0.0, f64::max);
    let h = traj.grid.h;
    Ok(OracleComparison { h, max_gap, threshold: 2.0 * h, passed: max_gap <= 2.0 * h, rows, t_star: oracle.t_star })
}

