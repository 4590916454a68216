//! A small mixed-integer linear programming layer: model construction, an
//! exact built-in solver (bounded-variable simplex plus branch and bound), an
//! LP-file bridge to external solvers, and an independent solution checker.
//!
//! The model keeps variables and constraints in insertion order and performs
//! no reformulation beyond coefficient merging, so emitted LP files and
//! solver behavior are deterministic for a given build sequence.
//!
//! Constraints may be marked *lazy*: they are excluded from solves until
//! explicitly activated, but the checker still evaluates them so callers can
//! run a cut loop (solve, activate violated rows, re-solve).

pub mod bnb;
pub mod external;
pub mod factor;
pub mod lp;
pub mod simplex;

use crate::model::{DamageScenario, Network};

/// Feasibility tolerance used when checking solutions against constraints.
pub const FEAS_TOL: f64 = 1e-6;
/// Integrality tolerance for binary variables.
pub const INT_TOL: f64 = 1e-5;

/// Index of a variable within its model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone)]
pub struct Var {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
    pub obj: f64,
    /// Larger values are branched earlier.
    pub priority: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    /// Sorted by variable index, one entry per variable.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    /// Lazy rows are skipped by solvers until activated.
    pub lazy: bool,
    pub active: bool,
}

impl Constraint {
    pub fn lhs_value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(j, c)| c * x[*j]).sum()
    }

    /// Signed violation: positive means the constraint is broken by that much.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.lhs_value(x);
        match self.sense {
            Sense::Le => lhs - self.rhs,
            Sense::Ge => self.rhs - lhs,
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjSense {
    Minimize,
    Maximize,
}

/// A linear model under construction.
#[derive(Debug, Clone)]
pub struct MilpModel {
    pub name: String,
    pub sense: ObjSense,
    pub vars: Vec<Var>,
    pub cons: Vec<Constraint>,
    pub obj_constant: f64,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel {
            name: name.into(),
            sense: ObjSense::Minimize,
            vars: Vec::new(),
            cons: Vec::new(),
            obj_constant: 0.0,
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lb: f64,
        ub: f64,
        obj: f64,
    ) -> VarId {
        let name = name.into();
        let (lb, ub) = match kind {
            VarKind::Binary => (lb.max(0.0), ub.min(1.0)),
            VarKind::Continuous => (lb, ub),
        };
        debug_assert!(lb <= ub, "variable {name} has empty bounds");
        self.vars.push(Var {
            name,
            kind,
            lb,
            ub,
            obj,
            priority: 0,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_continuous(
        &mut self,
        name: impl Into<String>,
        lb: f64,
        ub: f64,
        obj: f64,
    ) -> VarId {
        self.add_var(name, VarKind::Continuous, lb, ub, obj)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, obj: f64) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0, obj)
    }

    pub fn set_priority(&mut self, var: VarId, priority: i32) {
        self.vars[var.0].priority = priority;
    }

    pub fn set_bounds(&mut self, var: VarId, lb: f64, ub: f64) {
        let v = &mut self.vars[var.0];
        v.lb = lb;
        v.ub = ub;
    }

    pub fn set_obj(&mut self, var: VarId, obj: f64) {
        self.vars[var.0].obj = obj;
    }

    fn push_con(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
        lazy: bool,
    ) -> usize {
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (VarId(j), c) in terms {
            debug_assert!(j < self.vars.len());
            merged.push((j, c));
        }
        merged.sort_by_key(|(j, _)| *j);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(merged.len());
        for (j, c) in merged {
            match out.last_mut() {
                Some((pj, pc)) if *pj == j => *pc += c,
                _ => out.push((j, c)),
            }
        }
        out.retain(|(_, c)| *c != 0.0);
        self.cons.push(Constraint {
            name: name.into(),
            terms: out,
            sense,
            rhs,
            lazy,
            active: !lazy,
        });
        self.cons.len() - 1
    }

    pub fn add_con(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.push_con(name, terms, sense, rhs, false)
    }

    /// Add a constraint that solvers ignore until `activate_con` is called.
    pub fn add_lazy_con(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.push_con(name, terms, sense, rhs, true)
    }

    pub fn activate_con(&mut self, index: usize) {
        self.cons[index].active = true;
    }

    pub fn num_binaries(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary && v.lb < v.ub)
            .count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj_constant
            + self
                .vars
                .iter()
                .enumerate()
                .map(|(j, v)| v.obj * x[j])
                .sum::<f64>()
    }

    /// Evaluate a candidate solution against bounds, integrality, and
    /// constraints, independently of any solver. Lazy rows are always
    /// included so cut loops can find violated ones.
    pub fn check(&self, x: &[f64], tol: f64) -> Vec<Violation> {
        self.check_inner(x, tol, false)
    }

    /// Like `check`, but only over rows a solver currently sees (skips
    /// inactive lazy rows).
    pub fn check_active(&self, x: &[f64], tol: f64) -> Vec<Violation> {
        self.check_inner(x, tol, true)
    }

    fn check_inner(&self, x: &[f64], tol: f64, active_only: bool) -> Vec<Violation> {
        let mut out = Vec::new();
        if x.len() != self.vars.len() {
            out.push(Violation {
                what: format!(
                    "solution has {} values for {} variables",
                    x.len(),
                    self.vars.len()
                ),
                amount: f64::INFINITY,
                con_index: None,
            });
            return out;
        }
        for (j, v) in self.vars.iter().enumerate() {
            let val = x[j];
            if !val.is_finite() {
                out.push(Violation {
                    what: format!("variable {} is {}", v.name, val),
                    amount: f64::INFINITY,
                    con_index: None,
                });
                continue;
            }
            if val < v.lb - tol {
                out.push(Violation {
                    what: format!("variable {} = {} below lower bound {}", v.name, val, v.lb),
                    amount: v.lb - val,
                    con_index: None,
                });
            }
            if val > v.ub + tol {
                out.push(Violation {
                    what: format!("variable {} = {} above upper bound {}", v.name, val, v.ub),
                    amount: val - v.ub,
                    con_index: None,
                });
            }
            if v.kind == VarKind::Binary {
                let frac = (val - val.round()).abs();
                if frac > INT_TOL {
                    out.push(Violation {
                        what: format!("binary variable {} = {} is fractional", v.name, val),
                        amount: frac,
                        con_index: None,
                    });
                }
            }
        }
        for (i, con) in self.cons.iter().enumerate() {
            if active_only && !con.active {
                continue;
            }
            let v = con.violation(x);
            if v > tol {
                out.push(Violation {
                    what: format!(
                        "constraint {}: lhs {} {} rhs {} violated",
                        con.name,
                        con.lhs_value(x),
                        con.sense.symbol(),
                        con.rhs
                    ),
                    amount: v,
                    con_index: Some(i),
                });
            }
        }
        out
    }

    /// Indices of violated *inactive lazy* rows for a candidate solution.
    pub fn violated_lazy(&self, x: &[f64], tol: f64) -> Vec<usize> {
        self.cons
            .iter()
            .enumerate()
            .filter(|(_, c)| c.lazy && !c.active && c.violation(x) > tol)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub what: String,
    pub amount: f64,
    pub con_index: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Stopped at a node/time limit; `values` hold the best incumbent if any.
    Limit,
    Infeasible,
    Unbounded,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Limit => "limit",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub simplex_iterations: u64,
    pub nodes: u64,
    pub runtime: std::time::Duration,
    pub solver: String,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    /// Objective of `values`; meaningless unless values are present.
    pub objective: f64,
    /// One value per model variable; empty when no feasible point is known.
    pub values: Vec<f64>,
    pub stats: SolveStats,
}

#[derive(Debug, thiserror::Error)]
pub enum MilpError {
    #[error("model has {count} binary variables, above the built-in solver limit {limit}")]
    TooManyBinaries { count: usize, limit: usize },
    #[error("numerical failure in built-in solver: {0}")]
    Numerical(String),
    #[error("external solver failure: {0}")]
    External(String),
    #[error("malformed model: {0}")]
    BadModel(String),
}

/// How to solve a model: the built-in exact solver or an external one driven
/// through LP files.
#[derive(Debug, Clone)]
pub enum Solver {
    Builtin(bnb::BuiltinConfig),
    External(external::ExternalSolver),
}

impl Default for Solver {
    fn default() -> Self {
        Solver::Builtin(bnb::BuiltinConfig::default())
    }
}

impl Solver {
    /// Pick the external solver named by `GRIDRESTORE_SOLVER` if set,
    /// otherwise the built-in solver.
    pub fn from_env() -> Solver {
        match std::env::var("GRIDRESTORE_SOLVER") {
            Ok(cmd) if !cmd.trim().is_empty() => {
                Solver::External(external::ExternalSolver::new(cmd))
            }
            _ => Solver::default(),
        }
    }

    pub fn from_cli(solver: Option<&str>) -> Solver {
        match solver {
            Some("builtin") | None => Solver::from_env_or_builtin(solver.is_none()),
            Some(cmd) => Solver::External(external::ExternalSolver::new(cmd.to_string())),
        }
    }

    fn from_env_or_builtin(allow_env: bool) -> Solver {
        if allow_env {
            Solver::from_env()
        } else {
            Solver::default()
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Solver::Builtin(_) => "builtin".to_string(),
            Solver::External(e) => format!("external:{}", e.command),
        }
    }

    pub fn solve(&self, model: &MilpModel) -> Result<Solution, MilpError> {
        match self {
            Solver::Builtin(cfg) => bnb::solve_milp(model, cfg),
            Solver::External(ext) => ext.solve(model),
        }
    }

    /// Solve with the model's lazy rows enforced through a cut loop: solve,
    /// activate violated lazy rows, repeat. Mutates the model's activation
    /// flags.
    pub fn solve_with_lazy(&self, model: &mut MilpModel) -> Result<Solution, MilpError> {
        loop {
            let sol = self.solve(model)?;
            if sol.values.is_empty() {
                return Ok(sol);
            }
            let violated = model.violated_lazy(&sol.values, FEAS_TOL);
            if violated.is_empty() {
                return Ok(sol);
            }
            for i in violated {
                model.activate_con(i);
            }
        }
    }
}

/// Tangent-line outer approximation of the disk `p^2 + q^2 <= radius^2`.
/// Returns rows `(a, b, r)` meaning `a*p + b*q <= r`. The polygon contains
/// the disk, so the approximation only ever relaxes the limit. A zero radius
/// pins `p = q = 0` (given at least four segments the axis rows appear in
/// both signs).
pub fn linearize_circle(radius: f64, segments: u32) -> Result<Vec<(f64, f64, f64)>, MilpError> {
    if !(radius >= 0.0) {
        return Err(MilpError::BadModel(format!(
            "circle radius must be nonnegative, got {radius}"
        )));
    }
    if segments < 4 {
        return Err(MilpError::BadModel(format!(
            "need at least 4 segments for a bounded polygon, got {segments}"
        )));
    }
    let snap = |v: f64| {
        if v.abs() < 1e-12 {
            0.0
        } else if (v - 1.0).abs() < 1e-12 {
            1.0
        } else if (v + 1.0).abs() < 1e-12 {
            -1.0
        } else {
            v
        }
    };
    let mut rows = Vec::with_capacity(segments as usize);
    for m in 0..segments {
        let theta = 2.0 * std::f64::consts::PI * (m as f64) / (segments as f64);
        rows.push((snap(theta.cos()), snap(theta.sin()), radius));
    }
    Ok(rows)
}

/// Constraint families whose big-M constants are derived from network data
/// rather than guessed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BigMFamily {
    /// Kirchhoff voltage rows released for open or de-energized lines. The
    /// released row must absorb the gap between any reachable pair of
    /// squared-voltage values, including a de-energized endpoint frozen at
    /// nominal, plus the largest possible impedance drop.
    VoltageDecoupling,
    /// Per-phase power-flow magnitudes on released capacity rows: any flow
    /// is bounded by the largest line capacity.
    CurrentCapacity,
    /// Completion-time style rows: an upper bound on the horizon over all
    /// repairs, travel legs, and switching operations.
    Timing,
}

/// Derive a safe big-M for a constraint family from the actual network (and
/// scenario, for timing).
pub fn big_m_for(
    family: BigMFamily,
    net: &Network,
    scenario: Option<&DamageScenario>,
) -> f64 {
    match family {
        BigMFamily::VoltageDecoupling => {
            let u_max_sq = net
                .buses
                .iter()
                .map(|b| b.v_max_pu * b.v_max_pu)
                .fold(1.0f64, f64::max);
            let z_base = net.z_base_ohm();
            let mut worst_drop = 0.0f64;
            for line in &net.lines {
                let z = line.impedance_pu(z_base);
                let z_max = z
                    .iter()
                    .flatten()
                    .map(|c| c.norm())
                    .fold(0.0f64, f64::max);
                // Ratings are per phase, so convert on the per-phase base.
                let s_pu = line.capacity_kva / (net.base_kva / 3.0);
                // Row sums three phase terms, each with P and Q up to s_pu.
                worst_drop = worst_drop.max(2.0 * 3.0 * z_max * s_pu * 2.0);
            }
            u_max_sq + worst_drop
        }
        BigMFamily::CurrentCapacity => net
            .lines
            .iter()
            .map(|l| l.capacity_kva / (net.base_kva / 3.0))
            .fold(0.0f64, f64::max)
            .max(1.0),
        BigMFamily::Timing => {
            let scenario = scenario.expect("timing big-M needs a scenario");
            let repairs: f64 = scenario.faults.iter().map(|f| f.repair_minutes).sum();
            let max_travel = scenario
                .travel_minutes
                .values()
                .flat_map(|row| row.values())
                .fold(0.0f64, |a, b| a.max(*b));
            let legs = (scenario.faults.len()
                + scenario.melted_fuses.len()
                + net.lines
                    .iter()
                    .filter(|l| l.switch.as_ref().is_some_and(|s| !s.remote))
                    .count()
                + 2) as f64;
            let costs = scenario.costs.clone().unwrap_or_default();
            let ops = costs.max_steps as f64 * costs.manual_op_min.max(costs.remote_op_min);
            let waits = costs.max_wait_min
                * net
                    .lines
                    .iter()
                    .filter(|l| l.switch.as_ref().is_some_and(|s| !s.remote))
                    .count() as f64;
            repairs + legs * max_travel + ops + waits + 1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_repeated_terms() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 10.0, 1.0);
        let y = m.add_continuous("y", 0.0, 10.0, 0.0);
        m.add_con("c", vec![(x, 1.0), (y, 2.0), (x, 3.0)], Sense::Le, 5.0);
        assert_eq!(m.cons[0].terms, vec![(0, 4.0), (1, 2.0)]);
    }

    #[test]
    fn checker_reports_violations_by_name() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("flow", 0.0, 1.0, 0.0);
        m.add_con("cap", vec![(x, 2.0)], Sense::Le, 1.0);
        let v = m.check(&[0.9], 1e-6);
        assert_eq!(v.len(), 1);
        assert!(v[0].what.contains("cap"));
        assert!((v[0].amount - 0.8).abs() < 1e-9);
        assert!(m.check(&[0.4], 1e-6).is_empty());
    }

    #[test]
    fn checker_flags_fractional_binaries_and_bounds() {
        let mut m = MilpModel::new("t");
        m.add_binary("u", 0.0);
        let viols = m.check(&[0.5], 1e-6);
        assert!(viols.iter().any(|v| v.what.contains("fractional")));
        let viols = m.check(&[1.5], 1e-6);
        assert!(viols.iter().any(|v| v.what.contains("above upper bound")));
    }

    #[test]
    fn zero_radius_circle_pins_origin() {
        let rows = linearize_circle(0.0, 12).unwrap();
        assert_eq!(rows.len(), 12);
        // Every row passes at the origin and the axis rows pin p and q.
        for (a, b, r) in &rows {
            assert!(a * 0.0 + b * 0.0 <= *r);
        }
        assert!(rows.contains(&(1.0, 0.0, 0.0)));
        assert!(rows.contains(&(-1.0, 0.0, 0.0)));
        assert!(rows.contains(&(0.0, 1.0, 0.0)));
        assert!(rows.contains(&(0.0, -1.0, 0.0)));
    }

    #[test]
    fn circle_polygon_is_outer() {
        let r = 3.5;
        let rows = linearize_circle(r, 12).unwrap();
        // Points on the circle satisfy every row.
        for k in 0..100 {
            let t = 2.0 * std::f64::consts::PI * (k as f64) / 100.0;
            let (p, q) = (r * t.cos(), r * t.sin());
            for (a, b, rhs) in &rows {
                assert!(
                    a * p + b * q <= rhs + 1e-9,
                    "circle point ({p}, {q}) cut off"
                );
            }
        }
        // A point well outside is cut.
        let far = r * 1.2;
        assert!(rows.iter().any(|(a, b, rhs)| a * far + b * 0.0 > *rhs));
    }

    #[test]
    fn circle_rejects_bad_inputs() {
        assert!(linearize_circle(-1.0, 12).is_err());
        assert!(linearize_circle(1.0, 2).is_err());
    }

    #[test]
    fn lazy_rows_skip_solvers_but_not_checker() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 2.0, -1.0);
        let i = m.add_lazy_con("cut", vec![(x, 1.0)], Sense::Le, 1.0);
        assert!(!m.cons[i].active);
        // Checker still sees it.
        assert!(m.check(&[2.0], 1e-6).iter().any(|v| v.what.contains("cut")));
        assert_eq!(m.violated_lazy(&[2.0], 1e-6), vec![i]);
        m.activate_con(i);
        assert!(m.violated_lazy(&[2.0], 1e-6).is_empty());
    }

    #[test]
    fn objective_includes_constant() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 1.0, 2.0);
        m.obj_constant = 5.0;
        assert!((m.objective_value(&[1.0]) - 7.0).abs() < 1e-12);
        let _ = x;
    }
}
