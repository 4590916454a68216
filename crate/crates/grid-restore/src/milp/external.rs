//! Driving an external MILP solver through LP files and a subprocess.
//!
//! The solver is any executable invoked as
//! `<command> <model.lp> <solution-out> <time-limit-seconds>`. It must write
//! a plain-text solution file:
//!
//! ```text
//! status optimal        (or: infeasible | unbounded | limit)
//! objective -12.5       (when a point is reported)
//! <variable> <value>    (one line per variable; omitted means zero)
//! ```
//!
//! Variable names in the file are the sanitized names from the emitted LP.
//! Returned points are re-verified by the independent checker and the
//! reported objective is cross-checked against one recomputed from the
//! values, so a misbehaving solver is reported, not trusted.
//!
//! The bundled `lp-solve-adapter` binary speaks exactly this contract using
//! the built-in solver, and thin shell wrappers adapt common solvers (see
//! the project README).

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

use super::{lp, MilpError, MilpModel, Solution, SolveStats, SolveStatus};

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Default wall-clock budget handed to the subprocess, seconds.
const DEFAULT_TIME_LIMIT_S: u64 = 300;

#[derive(Debug, Clone)]
pub struct ExternalSolver {
    /// Command line prefix; whitespace-split, first token is the program.
    pub command: String,
    pub time_limit_s: u64,
}

impl ExternalSolver {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalSolver {
            command: command.into(),
            time_limit_s: DEFAULT_TIME_LIMIT_S,
        }
    }

    fn workdir(&self) -> Result<PathBuf, MilpError> {
        let dir = std::env::temp_dir().join(format!(
            "grid-restore-{}-{}",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::create_dir_all(&dir).map_err(|e| {
            MilpError::External(format!("cannot create work dir {}: {e}", dir.display()))
        })?;
        Ok(dir)
    }

    pub fn solve(&self, model: &MilpModel) -> Result<Solution, MilpError> {
        let started = std::time::Instant::now();
        let emitted = lp::emit_lp(model);
        let dir = self.workdir()?;
        let lp_path = dir.join("model.lp");
        let sol_path = dir.join("solution.txt");
        std::fs::write(&lp_path, &emitted.text).map_err(|e| {
            MilpError::External(format!("cannot write {}: {e}", lp_path.display()))
        })?;

        let mut parts = self.command.split_whitespace();
        let program = parts.next().ok_or_else(|| {
            MilpError::External("empty external solver command".into())
        })?;
        let output = std::process::Command::new(program)
            .args(parts)
            .arg(&lp_path)
            .arg(&sol_path)
            .arg(self.time_limit_s.to_string())
            .output()
            .map_err(|e| {
                MilpError::External(format!("failed to run '{}': {e}", self.command))
            })?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            let _ = std::fs::remove_dir_all(&dir);
            return Err(MilpError::External(format!(
                "'{}' exited with {}: {}",
                self.command,
                output.status,
                stderr.chars().take(500).collect::<String>()
            )));
        }
        let text = std::fs::read_to_string(&sol_path).map_err(|e| {
            MilpError::External(format!(
                "solver wrote no solution file {}: {e}",
                sol_path.display()
            ))
        })?;
        let _ = std::fs::remove_dir_all(&dir);
        let parsed = parse_solution_text(&text)?;
        self.assemble(model, &emitted, parsed, started)
    }

    fn assemble(
        &self,
        model: &MilpModel,
        emitted: &lp::EmittedLp,
        parsed: ParsedSolution,
        started: std::time::Instant,
    ) -> Result<Solution, MilpError> {
        let status = match parsed.status.as_str() {
            "optimal" => SolveStatus::Optimal,
            "infeasible" => SolveStatus::Infeasible,
            "unbounded" => SolveStatus::Unbounded,
            "limit" => SolveStatus::Limit,
            other => {
                return Err(MilpError::External(format!(
                    "unknown status '{other}' in solution file"
                )))
            }
        };
        let stats = SolveStats {
            simplex_iterations: 0,
            nodes: 0,
            runtime: started.elapsed(),
            solver: format!("external:{}", self.command),
        };
        let has_point = !parsed.values.is_empty()
            && matches!(status, SolveStatus::Optimal | SolveStatus::Limit);
        if !has_point {
            return Ok(Solution {
                status,
                objective: f64::NAN,
                values: Vec::new(),
                stats,
            });
        }
        // Map reported names back to model indices; start from bounds-
        // clamped zeros so omitted variables are well-defined.
        let mut index = std::collections::HashMap::new();
        for (j, name) in emitted.var_names.iter().enumerate() {
            index.insert(name.as_str(), j);
        }
        let mut values: Vec<f64> = model
            .vars
            .iter()
            .map(|v| 0.0f64.clamp(v.lb, v.ub))
            .collect();
        for (name, val) in &parsed.values {
            match index.get(name.as_str()) {
                Some(&j) => values[j] = *val,
                None => {
                    return Err(MilpError::External(format!(
                        "solution mentions unknown variable '{name}'"
                    )))
                }
            }
        }
        // Independent verification; external tolerances are looser than
        // ours, so allow 1e-5 here.
        let viols = model.check_active(&values, 1e-5);
        if !viols.is_empty() {
            let sample: Vec<String> =
                viols.iter().take(5).map(|v| v.what.clone()).collect();
            return Err(MilpError::External(format!(
                "external solution fails verification ({} violations): {}",
                viols.len(),
                sample.join("; ")
            )));
        }
        let computed = model.objective_value(&values);
        if let Some(reported) = parsed.objective {
            if (reported - computed).abs() > 1e-4 * (1.0 + computed.abs()) {
                return Err(MilpError::External(format!(
                    "reported objective {reported} disagrees with recomputed {computed}"
                )));
            }
        }
        Ok(Solution {
            status,
            objective: computed,
            values,
            stats,
        })
    }
}

struct ParsedSolution {
    status: String,
    objective: Option<f64>,
    values: Vec<(String, f64)>,
}

fn parse_solution_text(text: &str) -> Result<ParsedSolution, MilpError> {
    let mut status = None;
    let mut objective = None;
    let mut values = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let head = it.next().unwrap();
        let rest = it.next();
        if it.next().is_some() {
            return Err(MilpError::External(format!(
                "solution line {} has too many fields: {line}",
                lineno + 1
            )));
        }
        match head {
            "status" => {
                status = Some(
                    rest.ok_or_else(|| {
                        MilpError::External("status line missing value".into())
                    })?
                    .to_ascii_lowercase(),
                )
            }
            "objective" => {
                let v = rest
                    .and_then(|r| r.parse::<f64>().ok())
                    .ok_or_else(|| {
                        MilpError::External(format!(
                            "bad objective on line {}: {line}",
                            lineno + 1
                        ))
                    })?;
                objective = Some(v);
            }
            name => {
                let v = rest
                    .and_then(|r| r.parse::<f64>().ok())
                    .ok_or_else(|| {
                        MilpError::External(format!(
                            "bad value for '{name}' on line {}: {line}",
                            lineno + 1
                        ))
                    })?;
                values.push((name.to_string(), v));
            }
        }
    }
    Ok(ParsedSolution {
        status: status.ok_or_else(|| {
            MilpError::External("solution file has no status line".into())
        })?,
        objective,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Sense, VarKind};

    #[test]
    fn parses_solution_file() {
        let p = parse_solution_text("# comment\nstatus optimal\nobjective -3.5\nx 1\ny 0.25\n")
            .unwrap();
        assert_eq!(p.status, "optimal");
        assert_eq!(p.objective, Some(-3.5));
        assert_eq!(p.values.len(), 2);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(parse_solution_text("x 1\n").is_err()); // no status
        assert!(parse_solution_text("status optimal\nx 1 2\n").is_err());
        assert!(parse_solution_text("status optimal\nobjective nope\n").is_err());
    }

    #[test]
    fn verification_rejects_bad_external_answers() {
        let mut m = MilpModel::new("t");
        let x = m.add_var("x", VarKind::Continuous, 0.0, 1.0, 1.0);
        m.add_con("cap", vec![(x, 1.0)], Sense::Le, 0.5);
        let solver = ExternalSolver::new("unused");
        let emitted = lp::emit_lp(&m);
        // A "solution" violating the constraint must be refused.
        let parsed = ParsedSolution {
            status: "optimal".into(),
            objective: Some(1.0),
            values: vec![("x".into(), 1.0)],
        };
        let err = solver
            .assemble(&m, &emitted, parsed, std::time::Instant::now())
            .unwrap_err();
        assert!(err.to_string().contains("fails verification"));
        // A mismatched objective must be refused.
        let parsed = ParsedSolution {
            status: "optimal".into(),
            objective: Some(9.0),
            values: vec![("x".into(), 0.25)],
        };
        let err = solver
            .assemble(&m, &emitted, parsed, std::time::Instant::now())
            .unwrap_err();
        assert!(err.to_string().contains("disagrees"));
    }

    #[test]
    fn missing_command_is_a_clean_error() {
        let mut m = MilpModel::new("t");
        m.add_var("x", VarKind::Continuous, 0.0, 1.0, 1.0);
        let solver = ExternalSolver::new("definitely-not-a-real-solver-binary");
        let err = solver.solve(&m).unwrap_err();
        assert!(err.to_string().contains("failed to run"));
    }
}
