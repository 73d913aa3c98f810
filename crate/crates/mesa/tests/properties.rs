use mesa::grid::{build_grid, Geometry, Grid};
use mesa::limit::{run_limit, LimitParams};
use mesa::obstacle::{
    boundary_measure, solve_obstacle, solve_obstacle_from, ObstacleProblem, ObstacleSource, PsorOptions,
};
use mesa::pme::{run_pme_lockstep, Inner, PmeParams};
use mesa::source::{BoundaryData, SourceCoefficient};
use proptest::prelude::*;

fn geometry(kind: u8) -> Geometry {
    match kind {
        0 => Geometry::cartesian(1.0, 3.0),
        1 => Geometry::radial(2, 1.0, 3.0),
        _ => Geometry::radial(3, 1.0, 3.0),
    }
}

fn interior(grid: &Grid, v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u[0] = 0.0;
    u[grid.last()] = 0.0;
    u
}

fn lap(grid: &Grid, u: &[f64]) -> Vec<f64> {
    (0..grid.len()).map(|i| if i == 0 || i == grid.last() { 0.0 } else { grid.laplacian_at(u, i) }).collect()
}

fn solve(grid: &Grid, lambda: &[f64], mask: &[bool], f: f64) -> Vec<f64> {
    let problem = ObstacleProblem { grid, mask, source: ObstacleSource::Linear(lambda), inner: Some(f) };
    solve_obstacle(&problem, PsorOptions { tol: 1e-12, ..PsorOptions::default() }).unwrap().p
}

const N: usize = 24;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn laplacian_is_linear(kind in 0u8..3, u in prop::collection::vec(-1.0f64..1.0, N + 1),
                           v in prop::collection::vec(-1.0f64..1.0, N + 1), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = build_grid(geometry(kind), N).unwrap();
        let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let (lu, lv, lw) = (lap(&g, &u), lap(&g, &v), lap(&g, &w));
        for i in 0..g.len() {
            let expect = a * lu[i] + b * lv[i];
            prop_assert!((lw[i] - expect).abs() <= 1e-9 * (1.0 + expect.abs()) / (g.h * g.h));
        }
    }

    #[test]
    fn laplacian_is_symmetric_in_the_weighted_product(kind in 0u8..3,
            u in prop::collection::vec(-1.0f64..1.0, N + 1), v in prop::collection::vec(-1.0f64..1.0, N + 1)) {
        let g = build_grid(geometry(kind), N).unwrap();
        let (u, v) = (interior(&g, &u), interior(&g, &v));
        let (lu, lv) = (lap(&g, &u), lap(&g, &v));
        let a: f64 = (0..g.len()).map(|i| g.weight(i) * v[i] * lu[i]).sum();
        let b: f64 = (0..g.len()).map(|i| g.weight(i) * u[i] * lv[i]).sum();
        prop_assert!((a - b).abs() <= 1e-9 * (a.abs() + b.abs() + 1.0));
    }

    #[test]
    fn obstacle_solution_is_unique(lambda in prop::collection::vec(-4.0f64..2.0, N + 1),
                                   start in prop::collection::vec(0.0f64..2.0, N + 1)) {
        let g = build_grid(Geometry::cartesian(0.0, 1.0), N).unwrap();
        let mask = vec![true; g.len()];
        let problem = ObstacleProblem { grid: &g, mask: &mask, source: ObstacleSource::Linear(&lambda), inner: Some(1.0) };
        let opts = PsorOptions { tol: 1e-12, ..PsorOptions::default() };
        let a = solve_obstacle(&problem, opts).unwrap();
        let b = solve_obstacle_from(&problem, opts, &start).unwrap();
        for (x, y) in a.p.iter().zip(&b.p) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn obstacle_is_monotone_in_source_and_mask(lambda in prop::collection::vec(-4.0f64..2.0, N + 1),
            bump in prop::collection::vec(0.0f64..2.0, N + 1), cut in 3usize..N, extra in 0usize..6) {
        let g = build_grid(Geometry::cartesian(0.0, 1.0), N).unwrap();
        let small: Vec<bool> = (0..g.len()).map(|i| i < cut).collect();
        let large: Vec<bool> = (0..g.len()).map(|i| i < cut + extra).collect();
        let more: Vec<f64> = lambda.iter().zip(&bump).map(|(l, b)| l + b).collect();
        let base = solve(&g, &lambda, &small, 1.0);
        let by_source = solve(&g, &more, &small, 1.0);
        let by_mask = solve(&g, &lambda, &large, 1.0);
        for i in 0..g.len() {
            prop_assert!(by_source[i] >= base[i] - 1e-9);
            prop_assert!(by_mask[i] >= base[i] - 1e-9);
        }
    }

    #[test]
    fn boundary_measure_is_non_negative(lambda in prop::collection::vec(-4.0f64..2.0, N + 1), cut in 3usize..=N) {
        let g = build_grid(Geometry::cartesian(0.0, 1.0), N).unwrap();
        let mask: Vec<bool> = (0..g.len()).map(|i| i < cut).collect();
        let problem = ObstacleProblem { grid: &g, mask: &mask, source: ObstacleSource::Linear(&lambda), inner: Some(1.0) };
        let tol = 1e-10;
        let sol = solve_obstacle(&problem, PsorOptions { tol, ..PsorOptions::default() }).unwrap();
        let mu = boundary_measure(&g, &sol.p, &lambda, 1e-8);
        for i in 1..g.last() {
            if mask[i] {
                prop_assert!(mu[i] >= -tol.max(sol.violation), "node {i}: {}", mu[i]);
            }
        }
    }

    #[test]
    fn obstacle_minimizes_energy(lambda in prop::collection::vec(-4.0f64..2.0, N + 1),
            dir in prop::collection::vec(-1.0f64..1.0, N + 1), eps in 1e-3f64..1e-1) {
        let g = build_grid(Geometry::cartesian(0.0, 1.0), N).unwrap();
        let mask = vec![true; g.len()];
        let problem = ObstacleProblem { grid: &g, mask: &mask, source: ObstacleSource::Linear(&lambda), inner: Some(1.0) };
        let sol = solve_obstacle(&problem, PsorOptions { tol: 1e-13, ..PsorOptions::default() }).unwrap();
        let mut q: Vec<f64> = sol.p.iter().zip(&dir).map(|(p, d)| (p + eps * d).max(0.0)).collect();
        q[0] = 1.0;
        q[g.last()] = 0.0;
        prop_assert!(problem.energy(&q) >= problem.energy(&sol.p) - 1e-10);
    }

    #[test]
    fn pme_preserves_order(base in prop::collection::vec(0.0f64..0.9, 41), extra in prop::collection::vec(0.0f64..0.3, 41),
                           lambda in -2.0f64..1.0, m in 2.0f64..6.0) {
        let g = build_grid(Geometry::cartesian(0.0, 2.0), 120).unwrap();
        let pad = |v: &[f64]| -> Vec<f64> { (0..g.len()).map(|i| v.get(i).copied().unwrap_or(0.0)).collect() };
        let lo = pad(&base);
        let hi: Vec<f64> = pad(&base).iter().zip(pad(&extra)).map(|(a, b)| a + b).collect();
        let f = BoundaryData::constant(0.8).unwrap();
        let src = SourceCoefficient::constant(lambda);
        let params = PmeParams::new(m, 0.02);
        let frames = run_pme_lockstep(&g, &[lo, hi], params, &src, &[Inner::Injection(f.clone()), Inner::Injection(f)], &[0.01, 0.02]).unwrap();
        for (a, b) in frames[0].iter().zip(&frames[1]) {
            for (x, y) in a.rho.iter().zip(&b.rho) {
                prop_assert!(x <= y);
            }
        }
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn limit_preserves_order(front in 0.15f64..0.5, shift in 0.0f64..0.2, ext in 0.0f64..0.7, lift in 0.0f64..0.3,
                             lambda in -3.0f64..0.0) {
        let g = build_grid(Geometry::cartesian(0.0, 1.5), 150).unwrap();
        let fill = |front: f64, e: f64| -> Vec<f64> {
            g.sample(|x| if x <= front { 1.0 } else if x < 1.0 { e } else { 0.0 })
        };
        let lo = fill(front, ext);
        let hi = fill(front + shift, (ext + lift).min(0.95));
        let src = SourceCoefficient::constant(lambda);
        let f = BoundaryData::constant(1.0).unwrap();
        let params = LimitParams::new(1e-3, 0.05);
        let outs = [0.01, 0.02, 0.03, 0.04, 0.05];
        let a = run_limit(&g, &lo, &src, &f, params, &outs).unwrap();
        let b = run_limit(&g, &hi, &src, &f, params, &outs).unwrap();
        let tol = 2.0 * params.eps_sat;
        for (x, y) in a.frames.iter().zip(&b.frames) {
            for i in 0..g.len() {
                prop_assert!(x.rho[i] <= y.rho[i] + tol, "t {} node {i}: {} > {}", x.t, x.rho[i], y.rho[i]);
                prop_assert!(x.p[i] <= y.p[i] + tol);
            }
        }
    }
}
