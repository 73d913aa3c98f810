//! Solver-independent record of a run: frames, ledger, front traces and
//! the radial reference trajectory when one was computed.

use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::limit::{FrontTrace, LimitLedger, LimitRun};
use crate::obstacle::ACTIVE_REL_TOL;
use crate::pme::{PmeLedger, PmeRun};
use crate::radial::RadialTrajectory;
use crate::scenario::SolverKind;
use crate::source::BoundaryData;
use crate::tumor::{TumorLedger, TumorRun};

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub rho: Vec<f64>,
    pub p: Vec<f64>,
    /// `p > p_tol`, limit runs only.
    pub active: Option<Vec<bool>>,
    /// External density, limit runs only.
    pub rho_ext: Option<Vec<f64>>,
    /// Nutrient, tumor runs only.
    pub c: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Ledger {
    Pme(Vec<PmeLedger>),
    Limit(Vec<LimitLedger>),
    Tumor(Vec<TumorLedger>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub solver: SolverKind,
    pub m: Option<f64>,
    pub grid: Grid,
    pub frames: Vec<Frame>,
    pub ledger: Ledger,
    pub traces: Vec<FrontTrace>,
    pub oracle: Option<RadialTrajectory>,
}

impl Trajectory {
    pub fn from_pme(grid: &Grid, run: &PmeRun) -> Self {
        let frames = run
            .frames
            .iter()
            .zip(run.pressures())
            .map(|(s, p)| Frame { t: s.t, rho: s.rho.clone(), p, active: None, rho_ext: None, c: None })
            .collect();
        Trajectory {
            solver: SolverKind::Pme,
            m: Some(run.m),
            grid: grid.clone(),
            frames,
            ledger: Ledger::Pme(run.ledger.clone()),
            traces: Vec::new(),
            oracle: None,
        }
    }

    pub fn from_limit(grid: &Grid, run: &LimitRun, f: &BoundaryData) -> Self {
        let frames = run
            .frames
            .iter()
            .map(|s| {
                let tol = ACTIVE_REL_TOL * f.at(s.t);
                Frame {
                    t: s.t,
                    rho: s.rho.clone(),
                    p: s.p.clone(),
                    active: Some(s.p.iter().map(|&v| v > tol).collect()),
                    rho_ext: Some(s.rho_ext.clone()),
                    c: None,
                }
            })
            .collect();
        Trajectory {
            solver: SolverKind::Limit,
            m: None,
            grid: grid.clone(),
            frames,
            ledger: Ledger::Limit(run.ledger.clone()),
            traces: run.traces.clone(),
            oracle: None,
        }
    }

    pub fn from_tumor(grid: &Grid, run: &TumorRun) -> Self {
        let frames = run
            .frames
            .iter()
            .zip(run.pressures())
            .map(|(s, p)| Frame { t: s.t, rho: s.rho.clone(), p, active: None, rho_ext: None, c: Some(s.c.clone()) })
            .collect();
        Trajectory {
            solver: SolverKind::Tumor,
            m: Some(run.m),
            grid: grid.clone(),
            frames,
            ledger: Ledger::Tumor(run.ledger.clone()),
            traces: Vec::new(),
            oracle: None,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.t).collect()
    }

    /// `∫_0^T ‖u(t)‖_1 dt` by the trapezoid rule over the frames, where
    /// `u` is built from each frame.
    pub fn space_time_l1(&self, field: impl Fn(usize, &Frame) -> Vec<f64>) -> f64 {
        let norms: Vec<f64> = self.frames.iter().enumerate().map(|(k, fr)| self.grid.l1(&field(k, fr))).collect();
        trapezoid(&self.times(), &norms)
    }
}

/// Trapezoid rule on an increasing grid.
pub fn trapezoid(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2).zip(v.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let t = [0.0, 0.5, 1.5, 2.0];
        let v: Vec<f64> = t.iter().map(|x| 3.0 * x + 1.0).collect();
        assert!((trapezoid(&t, &v) - 8.0).abs() < 1e-14);
    }
}
