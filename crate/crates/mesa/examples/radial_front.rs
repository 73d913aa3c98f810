//! Limit solver against the radial front ODE: classical Hele-Shaw growth
//! (λ = 0) and a source switch that stalls and then retracts the front.

use mesa::runner::oracle_compare;
use mesa::scenario::preset;

fn main() -> mesa::Result<()> {
    for name in ["radial-hs", "hs-decay", "recession"] {
        let cmp = oracle_compare(&preset(name)?)?;
        println!("{name}: max gap {:.3e} against 2h = {:.3e}, stall time {:?}", cmp.max_gap, cmp.threshold, cmp.t_star);
        println!("{:>6} {:>10} {:>10}", "t", "front", "R(t)");
        for (t, front, r) in cmp.rows.iter().step_by(10) {
            let r = r.map_or("switch".to_string(), |r| format!("{r:.5}"));
            println!("{t:>6.2} {front:>10.5} {r:>10}");
        }
    }
    println!("λ = 0 closed form: R(1) = {:.5}", 1.0 + (0.25f64 + 2.0).sqrt());
    println!("retraction radius after λ = -5: {:.5}", 1.0 + (0.4f64).sqrt());
    Ok(())
}
