//! Damped initial density for finite m and its check against the two
//! barrier profiles.

use mesa::initial::{density_offset, validate_initial_data};
use mesa::scenario::preset;

fn main() -> mesa::Result<()> {
    let cfg = preset("figure1")?;
    let setup = cfg.setup()?;
    let grid = &setup.grid;
    let radii = cfg.barriers.expect("preset carries barrier radii");
    let front = cfg.initial_front().expect("front initial data");
    let lambda0: Vec<f64> = (0..grid.len()).map(|i| setup.lambda.at(i, 0.0)).collect();
    println!("{:>5} {:>10} {:>8} {:>8} {:>12} {:>12}", "m", "offset", "upper", "lower", "|Δρ^m+λρ|", "|∇ρ|");
    for m in [5.0, 10.0, 20.0, 40.0, 80.0] {
        let rho0 = cfg.finite_m_density(grid, &setup.f, front, m)?;
        let rep = validate_initial_data(grid, &rho0, m, &lambda0, setup.lambda.bound(), setup.f.at(0.0), radii)?;
        println!(
            "{:>5} {:>10.6} {:>8} {:>8} {:>12.4} {:>12.4}",
            m,
            density_offset(m)?,
            rep.upper_ok,
            rep.lower_ok,
            rep.source_l1,
            rep.gradient_l1
        );
    }
    Ok(())
}
