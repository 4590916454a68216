//! Exact branch and bound over binary variables on top of the simplex core.
//!
//! Depth-first search keeps a single simplex instance alive: each node
//! tightens one binary's bounds and re-solves warm, and backtracking
//! restores the bounds. The basis stays valid across bound changes, so node
//! solves typically take a handful of iterations.
//!
//! Accepted incumbents are re-verified against the model by the independent
//! checker before they are trusted; a disagreement is reported as a
//! numerical failure rather than silently returned.

use std::time::{Duration, Instant};

use super::simplex::{LpStatus, Simplex, StdForm};
use super::{MilpError, MilpModel, ObjSense, Solution, SolveStats, SolveStatus, VarKind};

/// Limits and tolerances for the built-in solver.
#[derive(Debug, Clone)]
pub struct BuiltinConfig {
    /// Hard cap on the number of (non-fixed) binary variables; models above
    /// it are refused so callers can pick a different strategy.
    pub max_binaries: usize,
    pub node_limit: u64,
    pub time_limit: Option<Duration>,
    pub feas_tol: f64,
    pub int_tol: f64,
    /// Optional feasible starting point used as the initial incumbent after
    /// verification (silently dropped if it fails the checker).
    pub initial: Option<Vec<f64>>,
}

impl Default for BuiltinConfig {
    fn default() -> Self {
        BuiltinConfig {
            max_binaries: 30,
            node_limit: 2_000_000,
            time_limit: None,
            feas_tol: super::FEAS_TOL,
            int_tol: super::INT_TOL,
            initial: None,
        }
    }
}

impl BuiltinConfig {
    pub fn with_max_binaries(mut self, max: usize) -> Self {
        self.max_binaries = max;
        self
    }

    pub fn with_initial(mut self, x: Vec<f64>) -> Self {
        self.initial = Some(x);
        self
    }

    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = Some(limit);
        self
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    cfg: &'a BuiltinConfig,
    splx: Simplex,
    binaries: Vec<usize>,
    /// Best known point as (minimization key, values).
    incumbent: Option<(f64, Vec<f64>)>,
    nodes: u64,
    limit_hit: bool,
    unbounded: bool,
    started: Instant,
}

impl<'a> Search<'a> {
    fn key(&self, true_obj: f64) -> f64 {
        match self.model.sense {
            ObjSense::Minimize => true_obj,
            ObjSense::Maximize => -true_obj,
        }
    }

    fn out_of_budget(&mut self) -> bool {
        if self.nodes >= self.cfg.node_limit {
            self.limit_hit = true;
            return true;
        }
        if let Some(tl) = self.cfg.time_limit {
            if self.started.elapsed() >= tl {
                self.limit_hit = true;
                return true;
            }
        }
        false
    }

    fn offer_incumbent(&mut self, raw: &[f64]) -> Result<(), MilpError> {
        // Snap binaries onto exact integers, then insist the checker agrees.
        let mut x = raw.to_vec();
        for &j in &self.binaries {
            x[j] = x[j].round();
        }
        let candidate = if self.model.check_active(&x, self.cfg.feas_tol).is_empty() {
            x
        } else if self
            .model
            .check_active(raw, self.cfg.feas_tol)
            .iter()
            .all(|v| v.what.contains("fractional"))
        {
            raw.to_vec()
        } else {
            return Err(MilpError::Numerical(
                "integral node solution rejected by the independent checker".into(),
            ));
        };
        let obj = self.model.objective_value(&candidate);
        let key = self.key(obj);
        let better = match &self.incumbent {
            None => true,
            Some((k, _)) => key < *k,
        };
        if better {
            self.incumbent = Some((key, candidate));
        }
        Ok(())
    }

    fn pick_branch_var(&self) -> Option<usize> {
        let mut best: Option<(i32, f64, usize)> = None; // priority, closeness to 0.5, index
        for &j in &self.binaries {
            let v = self.splx.values()[j];
            let frac = (v - v.round()).abs();
            if frac <= self.cfg.int_tol {
                continue;
            }
            let pr = self.model.vars[j].priority;
            let closeness = -(v - 0.5).abs(); // higher is more fractional
            let cand = (pr, closeness, j);
            let better = match &best {
                None => true,
                Some((bp, bc, bj)) => {
                    (pr, closeness) > (*bp, *bc) || ((pr, closeness) == (*bp, *bc) && j < *bj)
                }
            };
            if better {
                best = Some(cand);
            }
        }
        best.map(|(_, _, j)| j)
    }

    fn node(&mut self) -> Result<(), MilpError> {
        if self.limit_hit || self.unbounded || self.out_of_budget() {
            return Ok(());
        }
        self.nodes += 1;
        match self.splx.solve()? {
            LpStatus::Infeasible => return Ok(()),
            LpStatus::Unbounded => {
                self.unbounded = true;
                return Ok(());
            }
            LpStatus::Optimal => {}
        }
        let bound_key = self.key(self.splx.objective());
        if let Some((inc_key, _)) = &self.incumbent {
            if bound_key >= inc_key - 1e-9 * (1.0 + inc_key.abs()) {
                return Ok(());
            }
        }
        let j = match self.pick_branch_var() {
            None => {
                let raw = self.splx.values().to_vec();
                return self.offer_incumbent(&raw);
            }
            Some(j) => j,
        };
        let v = self.splx.values()[j];
        let (olo, ohi) = self.splx.bounds(j);
        let sides: [(f64, f64); 2] = if v >= 0.5 {
            [(1.0, 1.0), (0.0, 0.0)]
        } else {
            [(0.0, 0.0), (1.0, 1.0)]
        };
        for (lo, hi) in sides {
            self.splx.set_bounds(j, lo, hi);
            let r = self.node();
            self.splx.set_bounds(j, olo, ohi);
            r?;
            if self.unbounded {
                break;
            }
        }
        Ok(())
    }
}

/// Solve a model exactly with the built-in simplex + branch and bound.
pub fn solve_milp(model: &MilpModel, cfg: &BuiltinConfig) -> Result<Solution, MilpError> {
    let started = Instant::now();
    let binaries: Vec<usize> = model
        .vars
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary && v.lb < v.ub)
        .map(|(j, _)| j)
        .collect();
    if binaries.len() > cfg.max_binaries {
        return Err(MilpError::TooManyBinaries {
            count: binaries.len(),
            limit: cfg.max_binaries,
        });
    }
    let mut search = Search {
        model,
        cfg,
        splx: Simplex::new(StdForm::from_model(model)),
        binaries,
        incumbent: None,
        nodes: 0,
        limit_hit: false,
        unbounded: false,
        started,
    };
    if let Some(init) = &cfg.initial {
        if init.len() == model.vars.len()
            && model.check_active(init, cfg.feas_tol).is_empty()
        {
            let obj = model.objective_value(init);
            search.incumbent = Some((search.key(obj), init.clone()));
        }
    }
    search.node()?;

    let stats = SolveStats {
        simplex_iterations: search.splx.iterations,
        nodes: search.nodes,
        runtime: started.elapsed(),
        solver: "builtin".into(),
    };
    let sol = match (search.unbounded, search.incumbent, search.limit_hit) {
        (true, _, _) => Solution {
            status: SolveStatus::Unbounded,
            objective: f64::NAN,
            values: Vec::new(),
            stats,
        },
        (false, Some((_, values)), limited) => Solution {
            status: if limited {
                SolveStatus::Limit
            } else {
                SolveStatus::Optimal
            },
            objective: model.objective_value(&values),
            values,
            stats,
        },
        (false, None, true) => Solution {
            status: SolveStatus::Limit,
            objective: f64::NAN,
            values: Vec::new(),
            stats,
        },
        (false, None, false) => Solution {
            status: SolveStatus::Infeasible,
            objective: f64::NAN,
            values: Vec::new(),
            stats,
        },
    };
    Ok(sol)
}
