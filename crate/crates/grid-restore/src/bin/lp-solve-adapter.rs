//! Reference external-solver adapter: reads an LP file, solves it with the
//! library's built-in exact solver, and writes the plain-text solution file
//! the subprocess bridge expects.
//!
//! Usage: `lp-solve-adapter <model.lp> <solution-out> [time-limit-seconds]`
//!
//! Pointing `GRIDRESTORE_SOLVER` (or `--solver`) at this binary exercises
//! the full external path: LP emission, process spawn, and solution-file
//! parsing.

use std::process::ExitCode;
use std::time::Duration;

use grid_restore::milp::bnb::{solve_milp, BuiltinConfig};
use grid_restore::milp::lp::parse_lp;
use grid_restore::milp::SolveStatus;

fn run() -> Result<(), String> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 2 || args.len() > 3 {
        return Err("usage: lp-solve-adapter <model.lp> <solution-out> [time-limit-seconds]".into());
    }
    let text = std::fs::read_to_string(&args[0])
        .map_err(|e| format!("cannot read {}: {e}", args[0]))?;
    let model = parse_lp(&text).map_err(|e| format!("cannot parse {}: {e}", args[0]))?;
    let mut cfg = BuiltinConfig {
        // The adapter exists to stand in for a full MILP solver, so it
        // accepts larger models than the library's default search would.
        max_binaries: 96,
        ..Default::default()
    };
    if let Some(limit) = args.get(2) {
        let secs: u64 = limit
            .parse()
            .map_err(|_| format!("bad time limit '{limit}'"))?;
        if secs > 0 {
            cfg.time_limit = Some(Duration::from_secs(secs));
        }
    }
    let sol = solve_milp(&model, &cfg).map_err(|e| format!("solve failed: {e}"))?;
    let mut out = String::new();
    out.push_str(&format!("status {}\n", sol.status.as_str()));
    if matches!(sol.status, SolveStatus::Optimal | SolveStatus::Limit) && !sol.values.is_empty() {
        out.push_str(&format!("objective {}\n", sol.objective));
        for (var, value) in model.vars.iter().zip(&sol.values) {
            if *value != 0.0 {
                out.push_str(&format!("{} {}\n", var.name, value));
            }
        }
    }
    std::fs::write(&args[1], out).map_err(|e| format!("cannot write {}: {e}", args[1]))?;
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("lp-solve-adapter: {msg}");
            ExitCode::from(1)
        }
    }
}
