//! Scenario configuration, presets, and construction of the solver inputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_grid, Geometry, Grid};
use crate::initial::{harmonic_pressure, prepare_initial_density, BarrierRadii};
use crate::source::{BoundaryData, Profile, SourceCoefficient, Stage};
use crate::tumor::LinearGrowth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Pme,
    Limit,
    RadialOracle,
    Tumor,
}

/// External density: `value` up to `plateau_end`, cosine taper to 0 at
/// `taper_end`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct External {
    pub value: f64,
    pub plateau_end: f64,
    pub taper_end: f64,
}

impl External {
    pub fn at(&self, x: f64) -> f64 {
        if x <= self.plateau_end {
            self.value
        } else if x >= self.taper_end {
            0.0
        } else {
            let s = (x - self.plateau_end) / (self.taper_end - self.plateau_end);
            self.value * 0.5 * (1.0 + (std::f64::consts::PI * s).cos())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Saturated up to `front` (harmonic pressure) over an external density.
    Front {
        front: f64,
        #[serde(default)]
        external: External,
    },
    /// Tumor patch of constant density on `|x - center| < radius`.
    Patch { center: f64, radius: f64, density: f64 },
    /// Density from a CSV with columns `x, rho` on the grid nodes.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutputTimes {
    Every { every: f64 },
    List(Vec<f64>),
}

impl OutputTimes {
    pub fn times(&self, t_end: f64) -> Result<Vec<f64>> {
        let mut out = match self {
            OutputTimes::Every { every } => {
                if !(*every > 0.0) {
                    return Err(Error::Config("output interval must be positive".into()));
                }
                let n = (t_end / every + 1e-9).floor() as usize;
                let mut v: Vec<f64> = (0..=n).map(|k| k as f64 * every).collect();
                if (t_end - v[n]).abs() > 1e-9 * t_end.max(1.0) {
                    v.push(t_end);
                } else {
                    v[n] = t_end;
                }
                v
            }
            OutputTimes::List(v) => v.clone(),
        };
        if out.iter().any(|t| !(t.is_finite() && *t >= 0.0 && *t <= t_end)) {
            return Err(Error::Config("output times must lie in [0, t_end]".into()));
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub cfl_safety: f64,
    pub max_dt: f64,
    pub eps_sat: f64,
    pub obstacle_tol: f64,
    pub limit_dt: f64,
    pub omega: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { cfl_safety: 0.9, max_dt: 1e-3, eps_sat: 1e-6, obstacle_tol: 1e-8, limit_dt: 2e-4, omega: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TumorSpec {
    pub law: LinearGrowth,
    pub frozen: bool,
    /// Initial nutrient level; `c_B` when absent.
    pub nutrient: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub geometry: Geometry,
    pub n_cells: usize,
    pub solver: SolverKind,
    #[serde(default)]
    pub m: Option<f64>,
    pub lambda: Vec<Stage>,
    /// Injection pressure stages `[t_start, f]`.
    pub f: Vec<(f64, f64)>,
    pub initial: InitialSpec,
    pub t_end: f64,
    pub output: OutputTimes,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tumor: Option<TumorSpec>,
    #[serde(default)]
    pub barriers: Option<BarrierRadii>,
}

/// Everything a solver needs, built from a validated configuration.
pub struct Setup {
    pub grid: Grid,
    pub lambda: SourceCoefficient,
    pub f: BoundaryData,
    pub outputs: Vec<f64>,
}

fn constant_stages(stages: &[(f64, f64)]) -> Vec<Stage> {
    stages.iter().map(|&(t, v)| Stage { t_start: t, value: Profile::Constant(v) }).collect()
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ScenarioConfig = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        if let InitialSpec::Csv { path: p } = &mut cfg.initial {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config("t_end must be positive".into()));
        }
        let needs_m = matches!(self.solver, SolverKind::Pme | SolverKind::Tumor);
        match (needs_m, self.m) {
            (true, None) => return Err(Error::Config("m is required for this solver".into())),
            (true, Some(m)) if !(m > 1.0) => return Err(Error::Config(format!("m = {m} must exceed 1"))),
            _ => {}
        }
        self.setup().map_err(cfg_err)?;
        if self.solver == SolverKind::Tumor {
            if self.tumor.is_none() {
                return Err(Error::Config("tumor scenario needs a tumor section".into()));
            }
            if !matches!(self.initial, InitialSpec::Patch { .. } | InitialSpec::Csv { .. }) {
                return Err(Error::Config("tumor scenario needs a patch or CSV initial density".into()));
            }
        } else if matches!(self.initial, InitialSpec::Patch { .. }) {
            return Err(Error::Config("patch initial data is for tumor scenarios".into()));
        }
        if let InitialSpec::Csv { path } = &self.initial {
            if !path.exists() {
                return Err(Error::Config(format!("initial density file {} not found", path.display())));
            }
        }
        Ok(())
    }

    pub fn setup(&self) -> Result<Setup> {
        let grid = build_grid(self.geometry, self.n_cells)?;
        for s in &self.lambda {
            if let Profile::Nodal(v) = &s.value {
                if v.len() != grid.len() {
                    return Err(Error::Parameter("nodal λ profile length does not match grid".into()));
                }
            }
        }
        let lambda = SourceCoefficient::from_stages(self.lambda.clone())?;
        let f = BoundaryData::new(self.f.clone())?;
        let outputs = self.output.times(self.t_end)?;
        Ok(Setup { grid, lambda, f, outputs })
    }

    fn external(&self, grid: &Grid) -> Vec<f64> {
        match &self.initial {
            InitialSpec::Front { external, .. } => grid.sample(|x| external.at(x)),
            _ => vec![0.0; grid.len()],
        }
    }

    /// Initial density for the configured solver (for `Pme` and `Tumor`
    /// the exponent `m` is taken from the configuration).
    pub fn initial_density(&self, grid: &Grid, f: &BoundaryData) -> Result<Vec<f64>> {
        match (&self.initial, self.solver) {
            (InitialSpec::Csv { path }, _) => read_density_csv(path, grid),
            (InitialSpec::Front { front, .. }, SolverKind::Pme) => {
                let m = self.m.ok_or_else(|| Error::Config("m missing".into()))?;
                self.finite_m_density(grid, f, *front, m)
            }
            (InitialSpec::Front { front, .. }, _) => Ok(self.limit_density(grid, *front)),
            (InitialSpec::Patch { center, radius, density }, _) => {
                Ok(grid.sample(|x| if (x - center).abs() < *radius { *density } else { 0.0 }))
            }
        }
    }

    /// `max(p0^{1/m}, (ρE - 1/ln m)_+)` for the front initial data.
    pub fn finite_m_density(&self, grid: &Grid, f: &BoundaryData, front: f64, m: f64) -> Result<Vec<f64>> {
        let p0 = harmonic_pressure(grid, f.at(0.0), front)?;
        prepare_initial_density(&p0, &self.external(grid), m)
    }

    /// Saturated up to `front` with the cell containing it partially
    /// filled, the external density elsewhere.
    pub fn limit_density(&self, grid: &Grid, front: f64) -> Vec<f64> {
        let ext = self.external(grid);
        let h = grid.h;
        grid.nodes
            .iter()
            .zip(&ext)
            .map(|(&x, &e)| {
                let fill = ((front - (x - 0.5 * h)) / h).clamp(0.0, 1.0);
                e + (1.0 - e) * fill
            })
            .collect()
    }

    /// Front of the initial data, when given as one.
    pub fn initial_front(&self) -> Option<f64> {
        match self.initial {
            InitialSpec::Front { front, .. } => Some(front),
            _ => None,
        }
    }

    /// The external density as a function of position.
    pub fn external_profile(&self) -> External {
        match self.initial {
            InitialSpec::Front { external, .. } => external,
            _ => External::default(),
        }
    }
}

pub fn read_density_csv(path: &Path, grid: &Grid) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    struct Row {
        x: f64,
        rho: f64,
    }
    let corrupt = |reason: String| Error::Corrupt { path: path.display().to_string(), reason };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| corrupt(e.to_string()))?;
    let rows: Vec<Row> = rdr.deserialize().collect::<std::result::Result<_, _>>().map_err(|e| corrupt(e.to_string()))?;
    if rows.len() != grid.len() {
        return Err(corrupt(format!("{} rows for {} nodes", rows.len(), grid.len())));
    }
    for (row, &x) in rows.iter().zip(&grid.nodes) {
        if (row.x - x).abs() > 1e-9 * x.abs().max(1.0) {
            return Err(corrupt(format!("node {} does not match grid node {x}", row.x)));
        }
    }
    Ok(rows.into_iter().map(|r| r.rho).collect())
}

/// Named scenarios shipped with the crate.
pub const PRESETS: &[&str] = &["figure1", "figure1-limit", "radial-hs", "hs-decay", "recession", "shrink", "tumor"];

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let base = |name: &str, geometry, n_cells, solver, m, lambda: &[(f64, f64)], initial, t_end, every| ScenarioConfig {
        name: name.to_string(),
        geometry,
        n_cells,
        solver,
        m,
        lambda: constant_stages(lambda),
        f: vec![(0.0, 1.0)],
        initial,
        t_end,
        output: OutputTimes::Every { every },
        tolerances: Tolerances::default(),
        seed: 0,
        tumor: None,
        barriers: None,
    };
    let figure1_initial = InitialSpec::Front {
        front: 0.5,
        external: External { value: 0.6, plateau_end: 1.6, taper_end: 1.8 },
    };
    let figure1_lambda = [(0.0, -1.0), (0.75, -5.0), (1.0, -1.0)];
    let cfg = match name {
        "figure1" => {
            let mut c = base(
                name,
                Geometry::cartesian(0.0, 2.0),
                400,
                SolverKind::Pme,
                Some(40.0),
                &figure1_lambda,
                figure1_initial,
                1.8,
                0.01,
            );
            c.barriers = Some(BarrierRadii { upper: 2.0, lower: 0.5 });
            c
        }
        "figure1-limit" => base(
            name,
            Geometry::cartesian(0.0, 2.0),
            400,
            SolverKind::Limit,
            None,
            &figure1_lambda,
            figure1_initial,
            1.8,
            0.01,
        ),
        "radial-hs" => base(
            name,
            Geometry::cartesian(1.0, 4.0),
            600,
            SolverKind::RadialOracle,
            None,
            &[(0.0, 0.0)],
            InitialSpec::Front { front: 1.5, external: External::default() },
            1.0,
            0.01,
        ),
        "hs-decay" => base(
            name,
            Geometry::cartesian(1.0, 4.0),
            600,
            SolverKind::RadialOracle,
            None,
            &[(0.0, -1.0)],
            InitialSpec::Front { front: 1.5, external: External::default() },
            1.0,
            0.01,
        ),
        "recession" => base(
            name,
            Geometry::cartesian(1.0, 4.0),
            600,
            SolverKind::RadialOracle,
            None,
            &[(0.0, -1.0), (0.75, -5.0)],
            InitialSpec::Front { front: 1.5, external: External::default() },
            0.8,
            0.01,
        ),
        "shrink" => {
            let mut c = base(
                name,
                Geometry::cartesian(1.0, 4.0),
                3000,
                SolverKind::Limit,
                None,
                &[(0.0, -1.0)],
                InitialSpec::Front { front: 3.0, external: External::default() },
                0.02,
                0.002,
            );
            c.tolerances.limit_dt = 1e-4;
            c
        }
        "tumor" => {
            let mut c = base(
                name,
                Geometry::cartesian(-2.5, 2.5),
                500,
                SolverKind::Tumor,
                Some(20.0),
                &[(0.0, 0.0)],
                InitialSpec::Patch { center: 0.0, radius: 0.5, density: 0.9 },
                0.5,
                0.05,
            );
            c.tumor = Some(TumorSpec::default());
            c
        }
        _ => {
            return Err(Error::Config(format!("unknown preset {name:?}; known: {}", PRESETS.join(", "))));
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            let json = serde_json::to_string_pretty(&cfg).unwrap();
            let back = ScenarioConfig::from_json(&json).unwrap();
            assert_eq!(back, cfg);
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn output_grid() {
        let t = OutputTimes::Every { every: 0.25 }.times(1.0).unwrap();
        assert_eq!(t, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let t = OutputTimes::Every { every: 0.3 }.times(1.0).unwrap();
        assert_eq!(t.last(), Some(&1.0));
        assert!(OutputTimes::List(vec![2.0]).times(1.0).is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = preset("figure1").unwrap();
        cfg.m = None;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let json = serde_json::to_string(&preset("radial-hs").unwrap()).unwrap().replace("\"n_cells\"", "\"cells\"");
        assert!(ScenarioConfig::from_json(&json).is_err());
    }

    #[test]
    fn limit_density_fills_front_cell() {
        let cfg = preset("radial-hs").unwrap();
        let s = cfg.setup().unwrap();
        let rho = cfg.limit_density(&s.grid, 1.5);
        let k = s.grid.nearest(1.5);
        assert_eq!(rho[k - 1], 1.0);
        assert!((rho[k] - 0.5).abs() < 1e-9);
        assert_eq!(rho[k + 1], 0.0);
        let mass = s.grid.integrate_interior(&rho);
        assert!((mass - (0.5 - 0.5 * s.grid.h)).abs() < 1e-9);
    }
}
