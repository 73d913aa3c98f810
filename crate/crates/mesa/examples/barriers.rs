//! Radial sub- and super-barriers around the limit front: speeds scaled by
//! 0.9 and 1.1 must stay inside and outside the computed front.

use mesa::diagnostics::frame_fronts;
use mesa::radial::{check_inclusion, make_barrier, BarrierKind, RadialSetup};
use mesa::runner::execute;
use mesa::scenario::preset;

fn main() -> mesa::Result<()> {
    for name in ["radial-hs", "hs-decay"] {
        let cfg = preset(name)?;
        let setup = cfg.setup()?;
        let traj = execute(&cfg)?;
        let fronts: Vec<(f64, f64)> = traj.times().into_iter().zip(frame_fronts(&traj, cfg.tolerances.eps_sat)).collect();
        let radial = RadialSetup { n: 1, inner: cfg.geometry.inner, f: 1.0, lambda: setup.lambda.clone() };
        let r0 = cfg.initial_front().unwrap_or(1.5);
        for (kind, scale) in [(BarrierKind::Sub, 0.9), (BarrierKind::Super, 1.1)] {
            let barrier = make_barrier(kind, &radial, r0, &|_| 0.0, cfg.t_end, scale)?;
            let rep = check_inclusion(&barrier, &fronts, traj.grid.h);
            println!(
                "{name} {kind:?} x{scale}: R_b(T) = {:.4}, front(T) = {:.4}, violations {}/{}, worst gap {:.2e}",
                barrier.trajectory.radius_at(cfg.t_end),
                fronts.last().map_or(f64::NAN, |f| f.1),
                rep.violations,
                rep.frames,
                rep.worst_gap
            );
        }
    }
    Ok(())
}
