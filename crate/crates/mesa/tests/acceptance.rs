//! End-to-end acceptance: eight criteria, one PASS/FAIL line each.
//!
//! cargo test --release --test acceptance -- --nocapture

use std::path::Path;

use mesa::diagnostics::{frame_fronts, ordering_test, velocity_law_check, RECEDING_GRAD_TOL};
use mesa::grid::{build_grid, Geometry};
use mesa::io::{read_manifest, read_trajectory};
use mesa::limit::{run_limit, LimitParams};
use mesa::obstacle::{complementarity_residual, solve_obstacle, ObstacleProblem, ObstacleSource, PsorOptions};
use mesa::pme::{run_pme, Inner, PmeParams, PressureRate};
use mesa::runner::{diagnose, execute, figure1_checks, oracle_compare, run_to_dir, sweep_m, SweepOutcome};
use mesa::scenario::{preset, ScenarioConfig, PRESETS};
use mesa::source::BoundaryData;
use mesa::trajectory::Trajectory;
use mesa::tumor::{run_tumor, GrowthLaw, LinearGrowth, TumorParams};

type Outcome = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn figure1_reproduction(sweep: &SweepOutcome) -> Outcome {
    let run = sweep.runs.iter().find(|r| r.trajectory.m == Some(40.0)).ok_or("no m = 40 run")?;
    let traj = &run.trajectory;
    let mut ok = traj.grid.h <= 1.0 / 200.0 + 1e-15;
    let mut notes = vec![format!("h = {}", traj.grid.h)];
    for (name, c) in figure1_checks(traj) {
        ok &= c.passed;
        notes.push(format!("{name} {}", if c.passed { "ok" } else { "failed" }));
        if name == "figure1_decay_rate" || name == "figure1_support_drops" {
            notes.push(c.context);
        }
    }
    Ok((ok, notes.join("; ")))
}

fn smooth_fit() -> Outcome {
    let grid = build_grid(Geometry::cartesian(1.0, 10.0), 720).map_err(err)?;
    let lambda = vec![-1.0; grid.len()];
    let mask = vec![true; grid.len()];
    let problem = ObstacleProblem { grid: &grid, mask: &mask, source: ObstacleSource::Linear(&lambda), inner: Some(1.0) };
    let sol = solve_obstacle(&problem, PsorOptions { tol: 1e-10, ..PsorOptions::default() }).map_err(err)?;
    let last = sol.active.iter().rposition(|&a| a).ok_or("empty active set")?;
    let contact = grid.nodes[last + 1];
    let target = 1.0 + 2f64.sqrt();
    let comp = complementarity_residual(&grid, &sol.p, ObstacleSource::Linear(&lambda), &mask);
    let ok = (contact - target).abs() <= grid.h && sol.residual <= 1e-10 && comp <= 1e-8;
    Ok((ok, format!("contact {contact} vs {target:.6} (h = {}), PSOR residual {:.2e}, complementarity {comp:.2e}", grid.h, sol.residual)))
}

fn radial_agreement() -> Outcome {
    let cfg = preset("radial-hs").map_err(err)?;
    let traj = execute(&cfg).map_err(err)?;
    let h = traj.grid.h;
    let fronts = frame_fronts(&traj, cfg.tolerances.eps_sat);
    let closed = traj
        .times()
        .iter()
        .zip(&fronts)
        .map(|(t, x)| (x - (1.0 + (0.25 + 2.0 * t).sqrt())).abs())
        .fold(0.0, f64::max);
    let ode = oracle_compare(&cfg).map_err(err)?;

    let rec = preset("recession").map_err(err)?;
    let rtraj = execute(&rec).map_err(err)?;
    let target = 1.0 + (2.0f64 / 5.0).sqrt();
    let after: Vec<f64> = rtraj
        .times()
        .iter()
        .zip(frame_fronts(&rtraj, rec.tolerances.eps_sat))
        .filter(|(t, _)| **t > 0.75)
        .map(|(_, x)| (x - target).abs())
        .collect();
    let rec_gap = after.iter().copied().fold(0.0, f64::max);
    let ok = closed <= 2.0 * h && ode.passed && !after.is_empty() && rec_gap <= 2.0 * rtraj.grid.h;
    Ok((
        ok,
        format!(
            "closed-form gap {closed:.2e}, ODE gap {:.2e}, recession gap {rec_gap:.2e} over {} frames (2h = {:.2e})",
            ode.max_gap,
            after.len(),
            2.0 * h
        ),
    ))
}

fn m_convergence(sweep: &SweepOutcome) -> Outcome {
    let c = &sweep.study.checks.checks;
    let rho = c.get("rho_l1_decreasing").ok_or("no ρ column check")?;
    let graph = c.get("graph_l1_decreasing").ok_or("no graph check")?;
    let column: Vec<String> = sweep.study.rows.iter().map(|r| format!("m={} {:.4e}", r.m, r.rho_l1)).collect();
    let graphs: Vec<String> = sweep.study.rows.iter().map(|r| format!("{:.3e}", r.graph_l1)).collect();
    Ok((rho.passed && graph.passed, format!("‖ρ_m - ρ_∞‖: {}; ‖p(1-ρ)‖: {}", column.join(", "), graphs.join(", "))))
}

fn limit_pair(cfg: &ScenarioConfig, rho0: &[f64], f: &BoundaryData) -> Result<Trajectory, String> {
    let setup = cfg.setup().map_err(err)?;
    let mut params = LimitParams::new(cfg.tolerances.limit_dt, cfg.t_end);
    params.obstacle_tol = cfg.tolerances.obstacle_tol;
    let run = run_limit(&setup.grid, rho0, &setup.lambda, f, params, &setup.outputs).map_err(err)?;
    Ok(Trajectory::from_limit(&setup.grid, &run, f))
}

fn structural_suite(sweep: &SweepOutcome) -> Outcome {
    let mut failed = Vec::new();
    let mut monotone_runs = 0;
    let mut checked = 0;
    for name in PRESETS.iter().filter(|n| **n != "figure1") {
        let cfg = preset(name).map_err(err)?;
        let traj = execute(&cfg).map_err(err)?;
        let report = diagnose(&traj, &cfg).map_err(err)?;
        checked += report.checks.len();
        monotone_runs += usize::from(report.checks.contains_key("representation"));
        failed.extend(report.failures().into_iter().map(|f| format!("{name}:{f}")));
    }
    for run in sweep.runs.iter().chain(std::iter::once(&sweep.limit)) {
        checked += run.report.checks.len();
        failed.extend(run.report.failures().into_iter().map(|f| format!("{}:{f}", run.manifest.config.name)));
    }

    let cfg = preset("figure1-limit").map_err(err)?;
    let setup = cfg.setup().map_err(err)?;
    let rho0 = cfg.initial_density(&setup.grid, &setup.f).map_err(err)?;
    let lifted: Vec<f64> = rho0.iter().map(|&r| if r > 0.0 { (r + 0.1).min(1.0) } else { 0.0 }).collect();
    let tol = 2.0 * cfg.tolerances.eps_sat;
    let base = limit_pair(&cfg, &rho0, &setup.f)?;
    let lifted_run = limit_pair(&cfg, &lifted, &setup.f)?;
    let pushed = limit_pair(&cfg, &rho0, &BoundaryData::constant(1.2).map_err(err)?)?;
    let by_data = ordering_test(&base, &lifted_run, tol);
    let by_f = base
        .frames
        .iter()
        .zip(&pushed.frames)
        .flat_map(|(a, b)| a.rho.iter().zip(&b.rho).map(|(x, y)| x - y))
        .fold(f64::NEG_INFINITY, f64::max);
    if !by_data.passed {
        failed.push(format!("ordering by data ({:e})", by_data.value));
    }
    if by_f > tol {
        failed.push(format!("ordering by injection ({by_f:e})"));
    }
    if monotone_runs == 0 {
        failed.push("no monotone scenario checked".into());
    }
    Ok((
        failed.is_empty(),
        format!("{checked} checks over {} runs, {monotone_runs} monotone scenarios, 2 ordered pairs; failures {failed:?}", PRESETS.len() - 1 + sweep.runs.len() + 1),
    ))
}

fn velocity_law() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for name in ["radial-hs", "hs-decay"] {
        let cfg = preset(name).map_err(err)?;
        let traj = execute(&cfg).map_err(err)?;
        let (adv, _) = velocity_law_check(&traj.traces, RECEDING_GRAD_TOL);
        ok &= adv.passed && !adv.context.starts_with("0 ");
        notes.push(format!("{name} worst relative error {:.3} ({})", adv.value, adv.context));
    }
    let cfg = preset("shrink").map_err(err)?;
    let traj = execute(&cfg).map_err(err)?;
    let (_, rec) = velocity_law_check(&traj.traces, RECEDING_GRAD_TOL);
    ok &= rec.passed && !rec.context.starts_with("0 ");
    notes.push(format!("receding |∇p| max {:.2e} ({})", rec.value, rec.context));
    Ok((ok, notes.join("; ")))
}

fn tumor() -> Outcome {
    let grid = build_grid(Geometry::cartesian(-2.5, 2.5), 500).map_err(err)?;
    let law = LinearGrowth::default();
    let rho0 = grid.sample(|x| if x.abs() < 0.5 { 0.9 } else { 0.0 });
    let c0 = vec![law.c_b; grid.len()];
    let outs: Vec<f64> = (0..=10).map(|k| 0.05 * k as f64).collect();
    let mut comps = Vec::new();
    let mut range_ok = true;
    for m in [10.0, 20.0, 40.0] {
        let run = run_tumor(&grid, &rho0, &c0, &law, TumorParams::new(m, 0.5), &outs).map_err(err)?;
        range_ok &= run.ledger.iter().all(|l| l.c_clipped == 0 && l.clipped == 0 && l.c_min >= 0.0 && l.c_max <= law.c_b);
        comps.push(run.ledger[1..].iter().map(|l| l.complementarity).sum::<f64>() / (run.ledger.len() - 1) as f64);
    }
    let decreasing = comps.windows(2).all(|w| w[1] < w[0]);

    let m = 20.0;
    let frozen = run_tumor(&grid, &rho0, &c0, &law, TumorParams { frozen: true, ..TumorParams::new(m, 0.5) }, &outs)
        .map_err(err)?;
    let rate = PressureRate(|p: f64| law.growth(p, law.c_boundary()));
    let pme = run_pme(&grid, &rho0, PmeParams::new(m, 0.5), &rate, Inner::Closed, &outs).map_err(err)?;
    let gap = frozen
        .frames
        .iter()
        .zip(&pme.frames)
        .map(|(a, b)| grid.l1(&a.rho.iter().zip(&b.rho).map(|(x, y)| x - y).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    Ok((
        range_ok && decreasing && gap <= 1e-6,
        format!("nutrient in range without clips: {range_ok}; mean ∫|p(Δp+G)| over m = 10, 20, 40: {:?}; frozen vs PME max L1 gap {gap:.1e}", comps.iter().map(|c| format!("{c:.3e}")).collect::<Vec<_>>()),
    ))
}

fn rerun_matches(dir: &Path) -> Result<bool, String> {
    let manifest = read_manifest(dir).map_err(err)?;
    let stored = read_trajectory(dir, manifest.config.solver, manifest.config.m).map_err(err)?;
    let again = execute(&manifest.config).map_err(err)?;
    let same_frames = stored.frames.len() == again.frames.len()
        && stored.frames.iter().zip(&again.frames).all(|(a, b)| {
            a.t.to_bits() == b.t.to_bits()
                && a.rho.iter().zip(&b.rho).all(|(x, y)| x.to_bits() == y.to_bits())
                && a.p.iter().zip(&b.p).all(|(x, y)| x.to_bits() == y.to_bits())
        });
    let (a, b) = (diagnose(&stored, &manifest.config).map_err(err)?, diagnose(&again, &manifest.config).map_err(err)?);
    let same_report = a.checks.len() == b.checks.len()
        && a.checks.iter().zip(&b.checks).all(|((ka, ca), (kb, cb))| {
            ka == kb
                && ca.passed == cb.passed
                && ca.value.to_bits() == cb.value.to_bits()
                && ca.threshold.to_bits() == cb.threshold.to_bits()
                && ca.context == cb.context
        });
    Ok(same_frames && same_report)
}

fn determinism(root: &Path, sweep_dir: &Path) -> Outcome {
    let mut dirs = vec![sweep_dir.join("m_10"), sweep_dir.join("limit")];
    for name in ["hs-decay", "recession", "shrink", "tumor"] {
        let dir = root.join(name);
        run_to_dir(&preset(name).map_err(err)?, &dir, false).map_err(err)?;
        dirs.push(dir);
    }
    let mut bad = Vec::new();
    for d in &dirs {
        if !rerun_matches(d)? {
            bad.push(d.file_name().unwrap().to_string_lossy().to_string());
        }
    }
    Ok((bad.is_empty(), format!("{} manifests re-run; mismatches {bad:?}", dirs.len())))
}

#[test]
fn acceptance() {
    let root = tempfile::tempdir().unwrap();
    let sweep_dir = root.path().join("sweep");
    let sweep = sweep_m(&preset("figure1").unwrap(), &[10.0, 20.0, 40.0, 80.0], &sweep_dir).expect("m sweep runs");

    let results: Vec<(&str, Outcome)> = vec![
        ("1 figure-1 reproduction", figure1_reproduction(&sweep)),
        ("2 obstacle smooth fit", smooth_fit()),
        ("3 radial oracle agreement", radial_agreement()),
        ("4 m-convergence", m_convergence(&sweep)),
        ("5 structural invariants", structural_suite(&sweep)),
        ("6 velocity law", velocity_law()),
        ("7 tumor module", tumor()),
        ("8 determinism", determinism(root.path(), &sweep_dir)),
    ];
    let mut all = true;
    for (name, outcome) in &results {
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (*ok, detail.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= ok;
        println!("{} criterion {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
    assert!(all, "acceptance criteria failed");
}
