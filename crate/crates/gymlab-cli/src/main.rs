//! Scenario-driven command line for the generalized-Young-measure toolkit.
//!
//! Usage: `gymlab <command> --scenario <file> [--out <dir>]`
//!
//! Commands: validate, pair, norm, decompose, bary, variation, acmod,
//! derivative, density, helly, semicont, suite. Every run writes
//! `report.csv` and `verdict.json` to the output directory (default:
//! `scenario.out`, else the scenario's directory). Exit codes: 0 pass,
//! 1 fail or no-limit, 2 error.

mod scenario;

use scenario::{exit_code, run_scenario, Scenario};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const USAGE: &str = "usage: gymlab <command> --scenario <file> [--out <dir>]
commands: validate pair norm decompose bary variation acmod derivative
          density helly semicont suite
The SEED environment variable overrides the scenario seed.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(args: &[String]) -> Result<i32, String> {
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" {
        println!("{USAGE}");
        return Ok(if args.is_empty() { 2 } else { 0 });
    }
    let command = args[0].clone();
    let mut scenario_path: Option<PathBuf> = None;
    let mut out_dir: Option<PathBuf> = None;
    let mut i = 1;
    while i < args.len() {
        match args[i].as_str() {
            "--scenario" => {
                i += 1;
                scenario_path = Some(PathBuf::from(args.get(i).ok_or("--scenario needs a path")?));
            }
            "--out" => {
                i += 1;
                out_dir = Some(PathBuf::from(args.get(i).ok_or("--out needs a path")?));
            }
            other => return Err(format!("unknown argument '{other}'\n{USAGE}")),
        }
        i += 1;
    }
    let scenario_path = scenario_path.ok_or(format!("missing --scenario\n{USAGE}"))?;
    let scenario = Scenario::load(&scenario_path).map_err(|e| e.to_string())?;
    if scenario.command != command {
        return Err(format!(
            "scenario file is for command '{}', invoked as '{command}'",
            scenario.command
        ));
    }
    let base = scenario_path
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let out_dir = out_dir
        .or_else(|| scenario.out.as_ref().map(|o| base.join(o)))
        .unwrap_or_else(|| base.join("out"));
    let verdict = run_scenario(&scenario, &base, &out_dir).map_err(|e| e.to_string())?;
    println!(
        "{}: {} (reports in {})",
        scenario.command,
        verdict.status,
        out_dir.display()
    );
    Ok(exit_code(&verdict.status))
}
