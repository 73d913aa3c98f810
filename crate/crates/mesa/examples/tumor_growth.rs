//! Tumor patch fed by a diffusing nutrient, for increasing stiffness m.

use mesa::grid::{build_grid, Geometry};
use mesa::tumor::{run_tumor, LinearGrowth, TumorParams};

fn main() -> mesa::Result<()> {
    let grid = build_grid(Geometry::cartesian(-2.5, 2.5), 500)?;
    let law = LinearGrowth::default();
    let rho0 = grid.sample(|x| if x.abs() < 0.5 { 0.9 } else { 0.0 });
    let c0 = vec![law.c_b; grid.len()];
    let outputs: Vec<f64> = (0..=10).map(|k| 0.05 * k as f64).collect();
    for m in [10.0, 20.0, 40.0] {
        let run = run_tumor(&grid, &rho0, &c0, &law, TumorParams::new(m, 0.5), &outputs)?;
        let last = run.ledger.last().expect("frames recorded");
        let clips: usize = run.ledger.iter().map(|l| l.c_clipped + l.clipped).sum();
        let comp = run.ledger[1..].iter().map(|l| l.complementarity).sum::<f64>() / (run.ledger.len() - 1) as f64;
        println!(
            "m = {m:>4}: mass {:.5}, max p {:.5}, nutrient in [{:.4}, {:.4}], clips {clips}, mean ∫|p(Δp+G)| {comp:.3e}",
            last.mass, last.p_max, last.c_min, last.c_max
        );
    }
    Ok(())
}
