//! Time-dependent data: the growth coefficient λ(x,t) and the injection
//! pressure f(t), both piecewise constant in time.
//!
//! Stage selection is right-continuous: at a switch time the new stage
//! is already active.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial profile of one stage: a constant or one value per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Constant(f64),
    Nodal(Vec<f64>),
}

impl Profile {
    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        match self {
            Profile::Constant(v) => *v,
            Profile::Nodal(v) => v[i],
        }
    }

    fn max_abs(&self) -> f64 {
        match self {
            Profile::Constant(v) => v.abs(),
            Profile::Nodal(v) => v.iter().fold(0.0, |a, x| a.max(x.abs())),
        }
    }

    fn all_finite(&self) -> bool {
        match self {
            Profile::Constant(v) => v.is_finite(),
            Profile::Nodal(v) => v.iter().all(|x| x.is_finite()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub t_start: f64,
    pub value: Profile,
}

fn check_times(times: impl Iterator<Item = f64>) -> Result<()> {
    let mut prev: Option<f64> = None;
    for t in times {
        match prev {
            None if t != 0.0 => {
                return Err(Error::Parameter(format!("first stage must start at 0, got {t}")))
            }
            Some(p) if t <= p || !t.is_finite() => {
                return Err(Error::Parameter(format!("stage times not increasing at {t}")))
            }
            _ => {}
        }
        prev = Some(t);
    }
    if prev.is_none() {
        return Err(Error::Parameter("at least one stage required".into()));
    }
    Ok(())
}

fn stage_index(starts: impl DoubleEndedIterator<Item = f64> + ExactSizeIterator, t: f64) -> usize {
    let n = starts.len();
    starts.rev().position(|s| s <= t).map(|k| n - 1 - k).unwrap_or(0)
}

/// λ(x,t) with its bound Λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceCoefficient {
    stages: Vec<Stage>,
    bound: f64,
}

impl SourceCoefficient {
    pub fn new(stages: Vec<Stage>, bound: f64) -> Result<Self> {
        check_times(stages.iter().map(|s| s.t_start))?;
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::Parameter(format!("bound must be positive, got {bound}")));
        }
        for s in &stages {
            if !s.value.all_finite() {
                return Err(Error::Parameter("non-finite source value".into()));
            }
            if s.value.max_abs() > bound {
                return Err(Error::Parameter(format!(
                    "stage at t = {} exceeds the bound {bound}",
                    s.t_start
                )));
            }
        }
        Ok(SourceCoefficient { stages, bound })
    }

    /// Stages with the bound set to their largest magnitude (1 when all
    /// values vanish).
    pub fn from_stages(stages: Vec<Stage>) -> Result<Self> {
        let bound = stages.iter().fold(0.0f64, |a, s| a.max(s.value.max_abs()));
        Self::new(stages, if bound > 0.0 { bound } else { 1.0 })
    }

    /// Spatially constant stages `(t_start, value)`; the bound is the
    /// largest magnitude (1 when all values vanish).
    pub fn piecewise(stages: &[(f64, f64)]) -> Result<Self> {
        let bound = stages.iter().fold(0.0f64, |a, s| a.max(s.1.abs()));
        let bound = if bound > 0.0 { bound } else { 1.0 };
        Self::new(
            stages.iter().map(|&(t, v)| Stage { t_start: t, value: Profile::Constant(v) }).collect(),
            bound,
        )
    }

    pub fn constant(value: f64) -> Self {
        Self::piecewise(&[(0.0, value)]).expect("finite constant")
    }

    /// -1 on [0, .75), -5 on [.75, 1), -1 afterwards.
    pub fn figure1() -> Self {
        Self::piecewise(&[(0.0, -1.0), (0.75, -5.0), (1.0, -1.0)]).expect("valid stages")
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    fn stage(&self, t: f64) -> &Stage {
        &self.stages[stage_index(self.stages.iter().map(|s| s.t_start), t)]
    }

    /// λ at node `i` and time `t`.
    #[inline]
    pub fn at(&self, i: usize, t: f64) -> f64 {
        self.stage(t).value.at(i)
    }

    /// λ at time `t` when every stage is spatially constant.
    pub fn scalar(&self, t: f64) -> Option<f64> {
        match self.stage(t).value {
            Profile::Constant(v) => Some(v),
            Profile::Nodal(_) => None,
        }
    }

    pub fn is_spatially_constant(&self) -> bool {
        self.stages.iter().all(|s| matches!(s.value, Profile::Constant(_)))
    }

    /// Earliest switch strictly after `t`.
    pub fn next_switch(&self, t: f64) -> Option<f64> {
        self.stages.iter().map(|s| s.t_start).find(|&s| s > t)
    }

    pub fn switch_times(&self) -> Vec<f64> {
        self.stages.iter().skip(1).map(|s| s.t_start).collect()
    }

    /// `∫_{t0}^{t1} λ(x_i, s) ds`, exact for piecewise constant stages.
    pub fn integral(&self, i: usize, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut a = t0;
        while a < t1 {
            let b = self.next_switch(a).map_or(t1, |s| s.min(t1));
            acc += self.at(i, a) * (b - a);
            a = b;
        }
        acc
    }
}

/// Injection pressure f(t) on the inner boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    stages: Vec<(f64, f64)>,
}

impl BoundaryData {
    pub fn new(stages: Vec<(f64, f64)>) -> Result<Self> {
        check_times(stages.iter().map(|s| s.0))?;
        if let Some(&(t, v)) = stages.iter().find(|s| !(s.1 > 0.0 && s.1.is_finite())) {
            return Err(Error::Parameter(format!("boundary value {v} at t = {t} must be positive")));
        }
        Ok(BoundaryData { stages })
    }

    pub fn constant(f: f64) -> Result<Self> {
        Self::new(vec![(0.0, f)])
    }

    pub fn at(&self, t: f64) -> f64 {
        self.stages[stage_index(self.stages.iter().map(|s| s.0), t)].1
    }

    pub fn next_switch(&self, t: f64) -> Option<f64> {
        self.stages.iter().map(|s| s.0).find(|&s| s > t)
    }

    /// Bounds `(min f, max f)` over all stages.
    pub fn range(&self) -> (f64, f64) {
        self.stages
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.1), hi.max(s.1)))
    }
}

/// Earliest of several optional switch times.
pub fn earliest(times: &[Option<f64>]) -> Option<f64> {
    times.iter().flatten().copied().fold(None, |a, t| Some(a.map_or(t, |x: f64| x.min(t))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure1_stages() {
        let l = SourceCoefficient::figure1();
        assert_eq!(l.at(0, 0.5), -1.0);
        assert_eq!(l.at(0, 0.9), -5.0);
        assert_eq!(l.at(0, 0.75), -5.0);
        assert_eq!(l.at(0, 1.0), -1.0);
        assert_eq!(l.at(0, 7.0), -1.0);
        assert_eq!(l.bound(), 5.0);
        assert_eq!(l.next_switch(0.75), Some(1.0));
        assert_eq!(l.next_switch(0.2), Some(0.75));
        assert_eq!(l.next_switch(1.0), None);
    }

    #[test]
    fn integral_across_switches() {
        let l = SourceCoefficient::figure1();
        let v = l.integral(0, 0.5, 1.5);
        assert!((v - (-0.25 - 1.25 - 0.5)).abs() < 1e-14);
        assert_eq!(l.integral(0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn validation() {
        assert!(SourceCoefficient::piecewise(&[(0.1, 1.0)]).is_err());
        assert!(SourceCoefficient::piecewise(&[(0.0, 1.0), (0.0, 2.0)]).is_err());
        let stages = vec![Stage { t_start: 0.0, value: Profile::Constant(3.0) }];
        assert!(SourceCoefficient::new(stages, 2.0).is_err());
        assert!(BoundaryData::constant(0.0).is_err());
        assert!(BoundaryData::new(vec![(0.0, 1.0), (0.5, 1.2)]).is_ok());
    }

    #[test]
    fn nodal_profile() {
        let stages = vec![Stage { t_start: 0.0, value: Profile::Nodal(vec![1.0, -2.0, 0.5]) }];
        let l = SourceCoefficient::new(stages, 2.0).unwrap();
        assert_eq!(l.at(1, 3.0), -2.0);
        assert!(l.scalar(0.0).is_none());
        let json = serde_json::to_string(&l).unwrap();
        let back: SourceCoefficient = serde_json::from_str(&json).unwrap();
        assert_eq!(back, l);
    }
}
