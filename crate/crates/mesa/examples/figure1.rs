//! Finite-m run of the three-stage source scenario (λ = -1, -5, -1) with
//! m = 40, written to a run directory with a gnuplot script.
//!
//! cargo run --release --example figure1 [out_dir]

use std::path::PathBuf;

use mesa::runner::{run_to_dir, support_series, SUPPORT_LEVEL};
use mesa::scenario::preset;

fn main() -> mesa::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out/figure1"));
    let cfg = preset("figure1")?;
    let run = run_to_dir(&cfg, &out, true)?;
    let traj = &run.trajectory;

    println!("{:>6} {:>10} {:>10}", "t", "support", "rho(0.9)");
    let support = support_series(traj, SUPPORT_LEVEL);
    let probe = traj.grid.nearest(0.9);
    for (fr, s) in traj.frames.iter().zip(&support).step_by(5) {
        println!("{:>6.2} {:>10.4} {:>10.6}", fr.t, s, fr.rho[probe]);
    }
    print!("{}", run.report.to_text());
    println!("frames and plot.gnuplot in {}", out.display());
    Ok(())
}
