use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mesa::io::write_json;
use mesa::runner::{oracle_compare, run_to_dir, sweep_m, verify_dir};
use mesa::scenario::{preset, ScenarioConfig, PRESETS};
use mesa::Error;

#[derive(Parser)]
#[command(name = "mesa", version, about = "Porous medium flow with signed source and its Hele-Shaw limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Scenario {
    /// JSON scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
}

impl Scenario {
    fn load(&self) -> mesa::Result<ScenarioConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ScenarioConfig::load(path),
            (None, Some(name)) => preset(name),
            (None, None) => Err(Error::Config("no scenario given".into())),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trajectory, manifest and diagnostics.
    Run {
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long)]
        out: PathBuf,
        /// Exit with status 4 when a diagnostic fails.
        #[arg(long)]
        strict: bool,
        /// Also write a gnuplot script of density and pressure.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Run the scenario for each m and in the limit; write the convergence table.
    SweepM {
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long, value_delimiter = ',', default_value = "10,20,40,80")]
        m: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        strict: bool,
    },
    /// Compare the limit front with the radial reference trajectory.
    OracleCompare {
        #[command(flatten)]
        scenario: Scenario,
        /// Write the comparison as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute diagnostics on an existing run directory.
    Verify {
        #[arg(long)]
        out: PathBuf,
    },
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn verdict(passed: bool, strict: bool) -> ExitCode {
    if passed || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(4)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out, strict, gnuplot } => {
            let cfg = match scenario.load() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match run_to_dir(&cfg, &out, gnuplot) {
                Ok(run) => {
                    print!("{}", run.report.to_text());
                    println!("wrote {} files to {} in {:.2} s", run.manifest.files.len(), out.display(), run.manifest.wall_time_s);
                    verdict(run.report.passed(), strict)
                }
                Err(e) => fail(e),
            }
        }
        Command::SweepM { scenario, m, out, strict } => {
            let cfg = match scenario.load() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match sweep_m(&cfg, &m, &out) {
                Ok(sweep) => {
                    println!("{:>8} {:>14} {:>14} {:>14} {:>12} {:>10}", "m", "rho_l1", "p_l1", "graph_l1", "p_max", "tv_max");
                    for r in &sweep.study.rows {
                        println!(
                            "{:>8} {:>14.6e} {:>14.6e} {:>14.6e} {:>12.6} {:>10.4}",
                            r.m, r.rho_l1, r.p_l1, r.graph_l1, r.p_max, r.tv_max
                        );
                    }
                    println!("observed rates in m: {:?}", sweep.study.rates);
                    print!("{}", sweep.study.checks.to_text());
                    let passed = sweep.study.checks.passed()
                        && sweep.limit.report.passed()
                        && sweep.runs.iter().all(|r| r.report.passed());
                    verdict(passed, strict)
                }
                Err(e) => fail(e),
            }
        }
        Command::OracleCompare { scenario, out } => {
            let cfg = match scenario.load() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match oracle_compare(&cfg) {
                Ok(cmp) => {
                    if let Some(dir) = out {
                        let written = std::fs::create_dir_all(&dir)
                            .map_err(Error::from)
                            .and_then(|_| write_json(&dir.join("oracle.json"), &cmp));
                        if let Err(e) = written {
                            return fail(e);
                        }
                    }
                    println!(
                        "max front gap {:e} (threshold 2h = {:e}); stall time {:?}: {}",
                        cmp.max_gap,
                        cmp.threshold,
                        cmp.t_star,
                        if cmp.passed { "PASS" } else { "FAIL" }
                    );
                    verdict(cmp.passed, true)
                }
                Err(e) => fail(e),
            }
        }
        Command::Verify { out } => match verify_dir(&out) {
            Ok(v) => {
                print!("{}", v.report.to_text());
                println!("matches stored report: {}", v.matches_stored);
                verdict(v.report.passed() && v.matches_stored, true)
            }
            Err(e) => fail(e),
        },
    }
}
