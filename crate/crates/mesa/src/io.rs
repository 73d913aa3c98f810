//! On-disk layout of a run directory.
//!
//! ```text
//! grid.json            grid header
//! frames/index.csv     frame, t
//! frames/frame_NNNNN.csv   x, rho, p [, active, rho_ext] [, c]
//! ledger.csv           per-frame ledger of the solver
//! traces.csv           per-step front measurements (limit runs)
//! trajectory.csv       radial reference: t, R, branch, slope
//! manifest.json        config echo, versions, wall time, summary
//! report.json          diagnostics; report.txt the same as text
//! plot.gnuplot         optional density/pressure plot
//! ```
//!
//! Floats are written with their shortest round-trip representation, so
//! reading a directory back reproduces the trajectory bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::grid::{build_grid, Geometry, GridHeader, Kind};
use crate::limit::{FrontTrace, LimitLedger};
use crate::pme::PmeLedger;
use crate::radial::{Branch, RadialSample, RadialTrajectory};
use crate::scenario::{ScenarioConfig, SolverKind};
use crate::trajectory::{Frame, Ledger, Trajectory};
use crate::tumor::TumorLedger;

pub const GRID_FILE: &str = "grid.json";
pub const FRAME_DIR: &str = "frames";
pub const INDEX_FILE: &str = "frames/index.csv";
pub const LEDGER_FILE: &str = "ledger.csv";
pub const TRACES_FILE: &str = "traces.csv";
pub const ORACLE_FILE: &str = "trajectory.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const GNUPLOT_FILE: &str = "plot.gnuplot";

fn corrupt(path: &Path, reason: impl std::fmt::Display) -> Error {
    Error::Corrupt { path: path.display().to_string(), reason: reason.to_string() }
}

fn frame_file(k: usize) -> String {
    format!("{FRAME_DIR}/frame_{k:05}.csv")
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| corrupt(path, e))?;
    r.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(|e| corrupt(path, e))
}

/// Write grid, frames, ledger, traces and radial reference; returns the
/// relative paths written.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<Vec<String>> {
    fs::create_dir_all(dir.join(FRAME_DIR))?;
    let mut files = vec![GRID_FILE.to_string(), INDEX_FILE.to_string()];
    fs::write(dir.join(GRID_FILE), serde_json::to_string_pretty(&traj.grid.header())?)?;

    let mut index = csv::Writer::from_path(dir.join(INDEX_FILE))?;
    index.write_record(["frame", "t"])?;
    for (k, fr) in traj.frames.iter().enumerate() {
        index.write_record([k.to_string(), fr.t.to_string()])?;
        let name = frame_file(k);
        let mut w = csv::Writer::from_path(dir.join(&name))?;
        let mut header = vec!["x", "rho", "p"];
        if fr.active.is_some() {
            header.push("active");
        }
        if fr.rho_ext.is_some() {
            header.push("rho_ext");
        }
        if fr.c.is_some() {
            header.push("c");
        }
        w.write_record(&header)?;
        for i in 0..fr.rho.len() {
            let mut rec = vec![traj.grid.nodes[i].to_string(), fr.rho[i].to_string(), fr.p[i].to_string()];
            if let Some(a) = &fr.active {
                rec.push(u8::from(a[i]).to_string());
            }
            if let Some(e) = &fr.rho_ext {
                rec.push(e[i].to_string());
            }
            if let Some(c) = &fr.c {
                rec.push(c[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        files.push(name);
    }
    index.flush()?;

    match &traj.ledger {
        Ledger::Pme(l) => write_rows(&dir.join(LEDGER_FILE), l)?,
        Ledger::Limit(l) => write_rows(&dir.join(LEDGER_FILE), l)?,
        Ledger::Tumor(l) => write_rows(&dir.join(LEDGER_FILE), l)?,
    }
    files.push(LEDGER_FILE.to_string());
    if !traj.traces.is_empty() {
        write_rows(&dir.join(TRACES_FILE), &traj.traces)?;
        files.push(TRACES_FILE.to_string());
    }
    if let Some(o) = &traj.oracle {
        let rows: Vec<OracleRow> = o.samples.iter().map(|&s| s.into()).collect();
        write_rows(&dir.join(ORACLE_FILE), &rows)?;
        files.push(ORACLE_FILE.to_string());
    }
    Ok(files)
}

/// Radial reference row, with the radius column named `R`.
#[derive(Serialize, Deserialize)]
struct OracleRow {
    t: f64,
    #[serde(rename = "R")]
    radius: f64,
    branch: Branch,
    slope: f64,
}

impl From<RadialSample> for OracleRow {
    fn from(s: RadialSample) -> Self {
        OracleRow { t: s.t, radius: s.radius, branch: s.branch, slope: s.slope }
    }
}

impl From<OracleRow> for RadialSample {
    fn from(r: OracleRow) -> Self {
        RadialSample { t: r.t, radius: r.radius, branch: r.branch, slope: r.slope }
    }
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| corrupt(path, format!("{s:?}: {e}")))
}

/// Read a directory written by [`write_trajectory`].
pub fn read_trajectory(dir: &Path, solver: SolverKind, m: Option<f64>) -> Result<Trajectory> {
    let grid_path = dir.join(GRID_FILE);
    let text = fs::read_to_string(&grid_path).map_err(|e| corrupt(&grid_path, e))?;
    let header: GridHeader = serde_json::from_str(&text).map_err(|e| corrupt(&grid_path, e))?;
    let geometry = Geometry {
        kind: header.kind,
        n: if header.kind == Kind::Radial { header.n } else { 1 },
        inner: header.inner,
        outer: header.outer,
    };
    let grid = build_grid(geometry, header.n_cells).map_err(|e| corrupt(&grid_path, e))?;

    let index_path = dir.join(INDEX_FILE);
    let mut index = csv::Reader::from_path(&index_path).map_err(|e| corrupt(&index_path, e))?;
    let mut frames = Vec::new();
    for (k, rec) in index.records().enumerate() {
        let rec = rec.map_err(|e| corrupt(&index_path, e))?;
        if rec.len() != 2 || rec[0].parse::<usize>().ok() != Some(k) {
            return Err(corrupt(&index_path, format!("bad row {k}")));
        }
        let t = parse_f64(&index_path, &rec[1])?;
        let path = dir.join(frame_file(k));
        let mut r = csv::Reader::from_path(&path).map_err(|e| corrupt(&path, e))?;
        let headers = r.headers().map_err(|e| corrupt(&path, e))?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(cx), Some(crho), Some(cp)) = (col("x"), col("rho"), col("p")) else {
            return Err(corrupt(&path, "missing x, rho or p column"));
        };
        let (ca, ce, cc) = (col("active"), col("rho_ext"), col("c"));
        let mut fr = Frame {
            t,
            rho: Vec::with_capacity(grid.len()),
            p: Vec::with_capacity(grid.len()),
            active: ca.map(|_| Vec::new()),
            rho_ext: ce.map(|_| Vec::new()),
            c: cc.map(|_| Vec::new()),
        };
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| corrupt(&path, e))?;
            let field = |c: usize| rec.get(c).ok_or_else(|| corrupt(&path, format!("short row {i}")));
            let x = parse_f64(&path, field(cx)?)?;
            if grid.nodes.get(i) != Some(&x) {
                return Err(corrupt(&path, format!("row {i} is not on the grid")));
            }
            fr.rho.push(parse_f64(&path, field(crho)?)?);
            fr.p.push(parse_f64(&path, field(cp)?)?);
            if let (Some(c), Some(v)) = (ca, fr.active.as_mut()) {
                v.push(match field(c)? {
                    "1" => true,
                    "0" => false,
                    s => return Err(corrupt(&path, format!("bad active flag {s:?}"))),
                });
            }
            if let (Some(c), Some(v)) = (ce, fr.rho_ext.as_mut()) {
                v.push(parse_f64(&path, field(c)?)?);
            }
            if let (Some(c), Some(v)) = (cc, fr.c.as_mut()) {
                v.push(parse_f64(&path, field(c)?)?);
            }
        }
        if fr.rho.len() != grid.len() {
            return Err(corrupt(&path, format!("{} rows for {} nodes", fr.rho.len(), grid.len())));
        }
        frames.push(fr);
    }
    if frames.is_empty() {
        return Err(corrupt(&index_path, "no frames"));
    }

    let ledger_path = dir.join(LEDGER_FILE);
    let ledger = match solver {
        SolverKind::Pme => Ledger::Pme(read_rows::<PmeLedger>(&ledger_path)?),
        SolverKind::Limit | SolverKind::RadialOracle => Ledger::Limit(read_rows::<LimitLedger>(&ledger_path)?),
        SolverKind::Tumor => Ledger::Tumor(read_rows::<TumorLedger>(&ledger_path)?),
    };
    let traces_path = dir.join(TRACES_FILE);
    let traces = if traces_path.exists() { read_rows::<FrontTrace>(&traces_path)? } else { Vec::new() };
    let oracle_path = dir.join(ORACLE_FILE);
    let oracle = if oracle_path.exists() {
        let samples: Vec<RadialSample> =
            read_rows::<OracleRow>(&oracle_path)?.into_iter().map(Into::into).collect();
        let t_star = samples
            .iter()
            .find(|s| s.branch == Branch::Contracting)
            .map(|s| s.t);
        Some(RadialTrajectory { samples, t_star })
    } else {
        None
    };
    let solver = if solver == SolverKind::RadialOracle { SolverKind::Limit } else { solver };
    Ok(Trajectory { solver, m, grid, frames, ledger, traces, oracle })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub passed: bool,
    pub checks: usize,
    pub failed: Vec<String>,
}

impl From<&DiagnosticsReport> for DiagnosticsSummary {
    fn from(r: &DiagnosticsReport) -> Self {
        DiagnosticsSummary { passed: r.passed(), checks: r.checks.len(), failed: r.failures() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ScenarioConfig,
    pub versions: BTreeMap<String, String>,
    pub wall_time_s: f64,
    pub threads: usize,
    pub diagnostics: DiagnosticsSummary,
    pub files: Vec<String>,
}

pub fn versions() -> BTreeMap<String, String> {
    let mut v = BTreeMap::new();
    v.insert("mesa".to_string(), env!("CARGO_PKG_VERSION").to_string());
    v.insert("format".to_string(), "1".to_string());
    v
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| corrupt(&path, e))?;
    serde_json::from_str(&text).map_err(|e| corrupt(&path, e))
}

pub fn write_report(dir: &Path, report: &DiagnosticsReport) -> Result<()> {
    write_json(&dir.join(REPORT_JSON), report)?;
    fs::write(dir.join(REPORT_TEXT), report.to_text())?;
    Ok(())
}

/// Gnuplot script drawing density (upper) and pressure (lower) curves for
/// up to nine frames.
pub fn gnuplot_script(traj: &Trajectory, title: &str) -> String {
    let n = traj.frames.len();
    let picks: Vec<usize> = if n <= 9 { (0..n).collect() } else { (0..9).map(|j| j * (n - 1) / 8).collect() };
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 1500,1200\n");
    s.push_str(&format!("set output '{}.png'\n", title));
    s.push_str("set multiplot layout 3,3\n");
    s.push_str("set key off\n");
    for k in picks {
        let t = traj.frames[k].t;
        s.push_str(&format!("set title 't = {t}'\n"));
        s.push_str(&format!(
            "plot '{f}' using 1:2 with lines lw 2 title 'density', '{f}' using 1:3 with lines lw 2 title 'pressure'\n",
            f = frame_file(k)
        ));
    }
    s.push_str("unset multiplot\n");
    s
}

/// Resolve `path` against `base` unless it is absolute.
pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}
