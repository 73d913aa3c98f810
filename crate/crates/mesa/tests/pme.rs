use mesa::diagnostics::total_variation;
use mesa::grid::{build_grid, Geometry};
use mesa::pme::{run_pme, run_pme_lockstep, Inner, PmeParams};
use mesa::source::{BoundaryData, SourceCoefficient};

/// Barenblatt profile for m = 2 in one dimension, shifted so that it starts
/// at t = 1: ρ = t^{-1/3} (1 - x²/(12 t^{2/3}))_+.
fn barenblatt(x: f64, t: f64) -> f64 {
    t.powf(-1.0 / 3.0) * (1.0 - x * x / (12.0 * t.powf(2.0 / 3.0))).max(0.0)
}

#[test]
fn barenblatt_profile_and_edge_law() {
    let g = build_grid(Geometry::cartesian(-6.0, 6.0), 1200).unwrap();
    let rho0 = g.sample(|x| barenblatt(x, 1.0));
    let zero = SourceCoefficient::constant(0.0);
    let params = PmeParams::new(2.0, 1.0);
    let run = run_pme(&g, &rho0, params, &zero, Inner::Closed, &[0.25, 0.5, 1.0]).unwrap();
    for fr in &run.frames {
        let t = 1.0 + fr.t;
        let exact = g.sample(|x| barenblatt(x, t));
        let err: Vec<f64> = fr.rho.iter().zip(&exact).map(|(a, b)| a - b).collect();
        let rel = g.l1(&err) / g.l1(&exact);
        assert!(rel < 2e-3, "t = {t}: relative L1 error {rel}");

        let edge = 12f64.sqrt() * t.powf(1.0 / 3.0);
        let right = g.nodes[fr.rho.iter().rposition(|&r| r > 1e-3).unwrap()];
        assert!((right - edge).abs() <= 2.0 * g.h, "t = {t}: edge {right} against {edge}");

        let peak = fr.rho.iter().fold(0.0f64, |a, &v| a.max(v));
        let tv = total_variation(&g, &fr.rho, 0.5);
        assert!((tv - 2.0 * peak).abs() < 1e-9, "TV {tv} against 2 max ρ {}", 2.0 * peak);
    }
    let mass0 = g.integrate_interior(&rho0);
    let mass1 = run.ledger.last().unwrap().mass;
    assert!((mass1 - mass0).abs() <= 1e-12 * mass0);
}

#[test]
fn mass_decays_at_the_sink_rate_without_influx() {
    let g = build_grid(Geometry::cartesian(-3.0, 3.0), 300).unwrap();
    let rho0 = g.sample(|x| 0.8 * (1.0 - x * x).max(0.0));
    let sink = SourceCoefficient::constant(-1.0);
    let outs: Vec<f64> = (0..=10).map(|k| 0.05 * k as f64).collect();
    let run = run_pme(&g, &rho0, PmeParams::new(3.0, 0.5), &sink, Inner::Closed, &outs).unwrap();
    let mass0 = run.ledger[0].mass;
    for l in &run.ledger {
        assert!(l.mass <= mass0 * (-l.t * (1.0 - 1e-6)).exp() * (1.0 + 1e-12), "t = {}", l.t);
        assert!(l.max_step_defect <= 1e-10);
    }
    assert_eq!(run.total_clips(), 0);
}

#[test]
fn closed_box_conserves_mass() {
    let g = build_grid(Geometry::radial(2, 1.0, 4.0), 300).unwrap();
    let rho0 = g.sample(|r| if (1.5..2.5).contains(&r) { 0.7 } else { 0.0 });
    let zero = SourceCoefficient::constant(0.0);
    let run = run_pme(&g, &rho0, PmeParams::new(4.0, 0.3), &zero, Inner::Closed, &[0.1, 0.2, 0.3]).unwrap();
    let mass0 = g.integrate_interior(&rho0);
    for l in &run.ledger {
        assert!((l.mass - mass0).abs() <= 1e-12 * mass0);
    }
}

#[test]
fn larger_injection_pressure_orders_the_solution() {
    let g = build_grid(Geometry::cartesian(0.0, 2.0), 200).unwrap();
    let rho0 = g.sample(|x| if x < 0.5 { 0.95 } else { 0.3 * (1.0 - x).max(0.0) });
    let lifted: Vec<f64> = rho0.iter().map(|&r| if r > 0.0 { (r + 0.1).min(1.0) } else { 0.0 }).collect();
    let lambda = SourceCoefficient::figure1();
    let f1 = BoundaryData::constant(1.0).unwrap();
    let f2 = BoundaryData::constant(1.2).unwrap();
    let outs = [0.1, 0.2, 0.4, 0.8];
    let params = PmeParams::new(10.0, 0.8);
    let frames = run_pme_lockstep(
        &g,
        &[rho0.clone(), rho0.clone(), lifted],
        params,
        &lambda,
        &[Inner::Injection(f1.clone()), Inner::Injection(f2), Inner::Injection(f1)],
        &outs,
    )
    .unwrap();
    for k in 0..outs.len() {
        for i in 0..g.len() {
            assert!(frames[0][k].rho[i] <= frames[1][k].rho[i]);
            assert!(frames[0][k].rho[i] <= frames[2][k].rho[i]);
        }
    }
}

#[test]
fn identical_inputs_give_identical_outputs() {
    let g = build_grid(Geometry::cartesian(0.0, 2.0), 200).unwrap();
    let rho0 = g.sample(|x| (0.9 - x).max(0.0));
    let lambda = SourceCoefficient::figure1();
    let f = BoundaryData::constant(1.0).unwrap();
    let go = || run_pme(&g, &rho0, PmeParams::new(8.0, 0.3), &lambda, Inner::Injection(f.clone()), &[0.1, 0.3]).unwrap();
    let (a, b) = (go(), go());
    assert_eq!(a, b);
}
