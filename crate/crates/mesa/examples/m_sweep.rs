//! L¹ distance to the limit solution as m grows, on the three-stage
//! scenario cut at t = 0.8 to keep the run short.
//!
//! cargo run --release --example m_sweep [out_dir]

use std::path::PathBuf;

use mesa::runner::sweep_m;
use mesa::scenario::{preset, OutputTimes};

fn main() -> mesa::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out/m_sweep"));
    let mut cfg = preset("figure1")?;
    cfg.t_end = 0.8;
    cfg.output = OutputTimes::Every { every: 0.02 };
    let sweep = sweep_m(&cfg, &[10.0, 20.0, 40.0], &out)?;
    println!("{:>6} {:>12} {:>12} {:>12} {:>10}", "m", "|rho-lim|", "|p-lim|", "|p(1-rho)|", "max p");
    for r in &sweep.study.rows {
        println!("{:>6} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.5}", r.m, r.rho_l1, r.p_l1, r.graph_l1, r.p_max);
    }
    println!("rates {:?}", sweep.study.rates);
    print!("{}", sweep.study.checks.to_text());
    Ok(())
}
