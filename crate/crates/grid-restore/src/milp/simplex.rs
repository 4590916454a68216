//! Bounded-variable revised primal simplex on sparse LU basis factors.
//!
//! Layout: structural variables `0..n`, one slack per row at `n..n+m`
//! (`a_i.x + s_i = b_i`, slack bounds encoding the row sense). The basis is
//! represented by sparse LU factors plus a product-form eta file: each pivot
//! appends the transformed entering column, and the factors are rebuilt on a
//! fixed pivot cadence (and as a rescue when a residual audit fails), which
//! keeps both round-off drift and the eta file bounded on long solves.
//!
//! Phase 1 minimizes total bound violation of the basic variables with a
//! piecewise-linear (long-step) ratio test, so a single pass can walk
//! through several breakpoints. Phase 2 is the ordinary bounded-variable
//! primal method with Dantzig pricing and a two-pass ratio test that prefers
//! large pivot elements within the feasibility tolerance, falling back to
//! Bland's rule after a run of degenerate steps. The solver keeps its state
//! across calls so branch-and-bound can change bounds and re-solve warm.

use super::factor::LuFactors;
use super::{MilpError, MilpModel, ObjSense, Sense};

/// Tolerance below which a bound violation is ignored.
const FEAS_EPS: f64 = 1e-7;
/// Reduced-cost threshold for an attractive entering variable.
const DUAL_EPS: f64 = 1e-9;
/// Pivot elements smaller than this are rejected where a choice exists.
const PIVOT_EPS: f64 = 1e-8;
/// A step shorter than this counts as degenerate for anti-cycling.
const DEGEN_EPS: f64 = 1e-10;
/// Consecutive degenerate steps before switching to Bland's rule.
const STALL_LIMIT: u32 = 120;
/// Pivots between proactive basis-inverse rebuilds. Rank-one updates drift;
/// rebuilding on a schedule keeps the drift bounded on long solves.
const REFRESH_PIVOTS: u64 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// A model in computational standard form (minimization, slacked rows).
#[derive(Debug, Clone)]
pub struct StdForm {
    pub n: usize,
    pub m: usize,
    /// Structural columns, entries `(row, coef)` sorted by row.
    pub cols: Vec<Vec<(usize, f64)>>,
    /// Structural objective (always minimize; `negated` records a flipped
    /// maximize objective).
    pub cost: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Bounds for all `n + m` variables, slacks after structurals.
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub negated: bool,
}

impl StdForm {
    /// Build from a model's active constraints.
    ///
    /// Rows are equilibrated by powers of two so the largest structural
    /// coefficient in each lands near one. Power-of-two factors are exact in
    /// binary floating point, and a row scale is invisible outside: the slack
    /// absorbs it (its bound set is scale-invariant) and structural values are
    /// untouched.
    pub fn from_model(model: &MilpModel) -> StdForm {
        let n = model.vars.len();
        let active: Vec<&super::Constraint> =
            model.cons.iter().filter(|c| c.active).collect();
        let m = active.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut rhs = Vec::with_capacity(m);
        let mut lb: Vec<f64> = model.vars.iter().map(|v| v.lb).collect();
        let mut ub: Vec<f64> = model.vars.iter().map(|v| v.ub).collect();
        for (i, con) in active.iter().enumerate() {
            let widest = con
                .terms
                .iter()
                .fold(0.0f64, |acc, (_, c)| acc.max(c.abs()));
            let scale = if widest > 0.0 {
                (-widest.log2().round()).exp2()
            } else {
                1.0
            };
            rhs.push(con.rhs * scale);
            for (j, c) in &con.terms {
                cols[*j].push((i, *c * scale));
            }
            let (slo, shi) = match con.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lb.push(slo);
            ub.push(shi);
        }
        let negated = model.sense == ObjSense::Maximize;
        let cost = model
            .vars
            .iter()
            .map(|v| if negated { -v.obj } else { v.obj })
            .collect();
        StdForm {
            n,
            m,
            cols,
            cost,
            rhs,
            lb,
            ub,
            negated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VStat {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic free variable parked at its current value.
    Loose,
}

#[derive(Debug, Clone, Copy)]
enum Entering {
    None,
    Var { j: usize, dir: f64, score: f64 },
}

/// One product-form update: the transformed entering column at pivot time.
/// Applying its inverse maps the previous basis representation to the new
/// one in both solve directions.
struct Eta {
    row: usize,
    piv: f64,
    /// Nonzeros of the transformed column, excluding the pivot row.
    col: Vec<(usize, f64)>,
}

pub struct Simplex {
    pub f: StdForm,
    vstat: Vec<VStat>,
    basis: Vec<usize>,
    /// Sparse LU factors of the basis as of the last refactorization.
    facts: LuFactors,
    /// Pivots applied since the factors were rebuilt, oldest first. A rebuild
    /// is worthwhile (and meaningful as a rescue) only when this is nonempty.
    etas: Vec<Eta>,
    x: Vec<f64>,
    pub iterations: u64,
    iter_start: u64,
    stall: u32,
    bland: bool,
}

impl Simplex {
    pub fn new(f: StdForm) -> Simplex {
        let (n, m) = (f.n, f.m);
        let total = n + m;
        let mut vstat = Vec::with_capacity(total);
        let mut x = vec![0.0; total];
        for j in 0..n {
            let (lo, hi) = (f.lb[j], f.ub[j]);
            let (s, v) = initial_status(lo, hi);
            vstat.push(s);
            x[j] = v;
        }
        let mut basis = Vec::with_capacity(m);
        for i in 0..m {
            vstat.push(VStat::Basic(i));
            basis.push(n + i);
        }
        Simplex {
            f,
            vstat,
            basis,
            facts: LuFactors::identity(m),
            etas: Vec::new(),
            x,
            iterations: 0,
            iter_start: 0,
            stall: 0,
            bland: false,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.f.n]
    }

    pub fn objective(&self) -> f64 {
        let raw: f64 = (0..self.f.n).map(|j| self.f.cost[j] * self.x[j]).sum();
        if self.f.negated {
            -raw
        } else {
            raw
        }
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.f.lb[j], self.f.ub[j])
    }

    /// Change a structural variable's bounds; nonbasic variables re-snap to
    /// the nearest admissible point, basic ones are fixed up by phase 1 on
    /// the next solve.
    pub fn set_bounds(&mut self, j: usize, lb: f64, ub: f64) {
        debug_assert!(j < self.f.n && lb <= ub);
        self.f.lb[j] = lb;
        self.f.ub[j] = ub;
        match self.vstat[j] {
            VStat::Basic(_) => {}
            _ => {
                let (s, v) = resnap(self.x[j], lb, ub, self.vstat[j]);
                self.vstat[j] = s;
                self.x[j] = v;
            }
        }
    }

    fn cost_of(&self, j: usize) -> f64 {
        if j < self.f.n {
            self.f.cost[j]
        } else {
            0.0
        }
    }

    /// Recompute basic values from the nonbasic point: xB = B⁻¹ (b - N xN).
    fn recompute_xb(&mut self) {
        let m = self.f.m;
        let mut r = self.f.rhs.clone();
        for j in 0..self.f.n {
            if matches!(self.vstat[j], VStat::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            for (row, a) in &self.f.cols[j] {
                r[*row] -= a * xj;
            }
        }
        for i in 0..m {
            let sj = self.f.n + i;
            if !matches!(self.vstat[sj], VStat::Basic(_)) && self.x[sj] != 0.0 {
                r[i] -= self.x[sj];
            }
        }
        let xb = self.apply_ftran(r);
        for i in 0..m {
            self.x[self.basis[i]] = xb[i];
        }
    }

    /// Base-factor forward solve followed by the eta file: w = B⁻¹ v.
    fn apply_ftran(&self, v: Vec<f64>) -> Vec<f64> {
        let mut w = self.facts.solve(&v);
        for eta in &self.etas {
            let t = w[eta.row] / eta.piv;
            if t != 0.0 {
                for &(i, wi) in &eta.col {
                    w[i] -= wi * t;
                }
            }
            w[eta.row] = t;
        }
        w
    }

    /// w = B⁻¹ A_j.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.f.m;
        let mut v = vec![0.0; m];
        if j < self.f.n {
            for (row, a) in &self.f.cols[j] {
                v[*row] = *a;
            }
        } else {
            v[j - self.f.n] = 1.0;
        }
        self.apply_ftran(v)
    }

    /// y = B⁻ᵀ g. Eta inverses apply in reverse order and each touches only
    /// its own pivot component, then the base factors finish the solve.
    fn btran(&self, g: &[f64]) -> Vec<f64> {
        let mut h = g.to_vec();
        for eta in self.etas.iter().rev() {
            let mut acc = h[eta.row];
            for &(i, wi) in &eta.col {
                acc -= wi * h[i];
            }
            h[eta.row] = acc / eta.piv;
        }
        self.facts.solve_transpose(&h)
    }

    /// One row of the current inverse: (B⁻ᵀ e_row), used for dual updates.
    fn btran_unit(&self, row: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.f.m];
        e[row] = 1.0;
        self.btran(&e)
    }

    /// z_j = y . A_j for a structural or slack column.
    fn price_col(&self, y: &[f64], j: usize) -> f64 {
        if j < self.f.n {
            self.f.cols[j].iter().map(|(row, a)| y[*row] * a).sum()
        } else {
            y[j - self.f.n]
        }
    }

    /// Apply a basis change: entering j (moved along its step), leaving basic
    /// at `row` snapped to `leave_val`, transformed pivot column w.
    fn pivot(&mut self, j: usize, row: usize, w: &[f64], leave_val: f64, leave_stat: VStat) {
        let out = self.basis[row];
        self.x[out] = leave_val;
        self.vstat[out] = leave_stat;
        self.basis[row] = j;
        self.vstat[j] = VStat::Basic(row);
        let col: Vec<(usize, f64)> = w
            .iter()
            .enumerate()
            .filter(|&(i, &wi)| i != row && wi != 0.0)
            .map(|(i, &wi)| (i, wi))
            .collect();
        self.etas.push(Eta {
            row,
            piv: w[row],
            col,
        });
    }

    /// Rebuild the basis factors from the basis columns and drop the eta
    /// file (scheduled maintenance and the rescue path alike).
    fn refactor(&mut self) -> Result<(), MilpError> {
        let m = self.f.m;
        let cols: Vec<Vec<(usize, f64)>> = self
            .basis
            .iter()
            .map(|&bv| {
                if bv < self.f.n {
                    self.f.cols[bv].clone()
                } else {
                    vec![(bv - self.f.n, 1.0)]
                }
            })
            .collect();
        self.facts = LuFactors::factor(m, &cols)?;
        self.etas.clear();
        Ok(())
    }

    fn max_residual(&self) -> f64 {
        let m = self.f.m;
        let mut acc = vec![0.0; m];
        for i in 0..m {
            acc[i] = self.x[self.f.n + i];
        }
        for j in 0..self.f.n {
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            for (row, a) in &self.f.cols[j] {
                acc[*row] += a * xj;
            }
        }
        let mut worst = 0.0f64;
        for i in 0..m {
            worst = worst.max((acc[i] - self.f.rhs[i]).abs());
        }
        worst
    }

    fn infeasibility(&self) -> f64 {
        let mut f = 0.0;
        for i in 0..self.f.m {
            let v = self.x[self.basis[i]];
            let (lo, hi) = (self.f.lb[self.basis[i]], self.f.ub[self.basis[i]]);
            if v < lo {
                f += lo - v;
            } else if v > hi {
                f += v - hi;
            }
        }
        f
    }

    /// Solve from the current state. Statuses are exact LP statuses; a
    /// numerical failure is an error, never a silent wrong answer.
    pub fn solve(&mut self) -> Result<LpStatus, MilpError> {
        self.bland = false;
        self.stall = 0;
        self.iter_start = self.iterations;
        loop {
            self.recompute_xb();
            if !self.phase1()? {
                return Ok(LpStatus::Infeasible);
            }
            let status = self.phase2()?;
            // Independent residual audit of Ax = b at the claimed optimum.
            let scale = 1.0 + self.f.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if self.max_residual() > 2e-7 * scale {
                // Rebuilding the inverse is a legitimate rescue as long as
                // rank-one updates have happened since the last rebuild; if a
                // fresh inverse still cannot reproduce Ax = b, the failure is
                // real and must surface.
                if self.etas.is_empty() {
                    return Err(MilpError::Numerical(
                        "residual check failed after refactorization".into(),
                    ));
                }
                self.refactor()?;
                continue;
            }
            return Ok(status);
        }
    }

    /// Snap basics that sit within feasibility dust of a bound onto it.
    fn clamp_basics(&mut self) {
        for i in 0..self.f.m {
            let bv = self.basis[i];
            let (lo, hi) = (self.f.lb[bv], self.f.ub[bv]);
            if self.x[bv] < lo {
                self.x[bv] = lo;
            } else if self.x[bv] > hi {
                self.x[bv] = hi;
            }
        }
    }

    fn phase1(&mut self) -> Result<bool, MilpError> {
        const DONE_EPS: f64 = 1e-7;
        // Residual infeasibility this small at a phase-1 optimum is treated
        // as numerical dust (clamped away) rather than proof of an
        // infeasible model.
        const DUST_EPS: f64 = 1e-5;
        let m = self.f.m;
        let total = self.f.n + m;
        let budget = iteration_budget(total);
        loop {
            if self.etas.len() as u64 >= REFRESH_PIVOTS {
                self.refactor()?;
                self.recompute_xb();
            }
            let f0 = self.infeasibility();
            if f0 <= DONE_EPS {
                self.clamp_basics();
                return Ok(true);
            }
            if self.iterations - self.iter_start >= budget {
                return Err(MilpError::Numerical(format!(
                    "phase 1 iteration limit hit ({budget})"
                )));
            }
            // Gradient of total infeasibility wrt basic values.
            let mut g = vec![0.0; m];
            for i in 0..m {
                let bv = self.basis[i];
                let v = self.x[bv];
                if v < self.f.lb[bv] - FEAS_EPS {
                    g[i] = -1.0;
                } else if v > self.f.ub[bv] + FEAS_EPS {
                    g[i] = 1.0;
                }
            }
            let y = self.btran(&g);
            let entering = self.pick_entering_phase1(&y);
            let (j, dir) = match entering {
                Entering::None => {
                    // Phase-1 optimum: no descent direction left. Before
                    // declaring infeasibility, rule out stale arithmetic.
                    let f = self.infeasibility();
                    if f <= DONE_EPS {
                        self.clamp_basics();
                        return Ok(true);
                    }
                    if !self.etas.is_empty() {
                        self.refactor()?;
                        self.recompute_xb();
                        continue;
                    }
                    if f <= DUST_EPS {
                        self.clamp_basics();
                        return Ok(true);
                    }
                    return Ok(false);
                }
                Entering::Var { j, dir, .. } => (j, dir),
            };
            let w = self.ftran(j);
            let slope0 = -(dir * self.price_col(&y, j));
            self.long_step(j, dir, &w, slope0)?;
            self.iterations += 1;
        }
    }

    fn pick_entering_phase1(&self, y: &[f64]) -> Entering {
        let total = self.f.n + self.f.m;
        let mut best = Entering::None;
        for j in 0..total {
            let (dir, score) = match self.vstat[j] {
                VStat::Basic(_) => continue,
                VStat::AtLower => {
                    if self.f.lb[j] == self.f.ub[j] {
                        continue; // fixed
                    }
                    let z = self.price_col(y, j);
                    if z > DUAL_EPS {
                        (1.0, z)
                    } else {
                        continue;
                    }
                }
                VStat::AtUpper => {
                    let z = self.price_col(y, j);
                    if z < -DUAL_EPS {
                        (-1.0, -z)
                    } else {
                        continue;
                    }
                }
                VStat::Loose => {
                    let z = self.price_col(y, j);
                    if z.abs() > DUAL_EPS {
                        (z.signum(), z.abs())
                    } else {
                        continue;
                    }
                }
            };
            if self.bland {
                return Entering::Var { j, dir, score };
            }
            match best {
                Entering::None => best = Entering::Var { j, dir, score },
                Entering::Var { score: s, .. } if score > s => {
                    best = Entering::Var { j, dir, score }
                }
                _ => {}
            }
        }
        best
    }

    /// Piecewise-linear ratio test for phase 1: walk breakpoints while the
    /// infeasibility keeps decreasing.
    fn long_step(&mut self, j: usize, dir: f64, w: &[f64], slope0: f64) -> Result<(), MilpError> {
        debug_assert!(slope0 < 0.0);
        #[derive(Clone, Copy)]
        struct Event {
            t: f64,
            row: usize, // usize::MAX marks the entering variable's own flip
            gain: f64,
            bound: f64,
            to_upper: bool,
            wabs: f64,
        }
        let mut events: Vec<Event> = Vec::new();
        let flip_t = self.f.ub[j] - self.f.lb[j];
        if flip_t.is_finite() {
            events.push(Event {
                t: flip_t.max(0.0),
                row: usize::MAX,
                gain: 0.0,
                bound: 0.0,
                to_upper: dir > 0.0,
                wabs: f64::INFINITY,
            });
        }
        for (i, &wi) in w.iter().enumerate() {
            let rate = -dir * wi;
            if rate.abs() < 1e-11 {
                continue;
            }
            let bv = self.basis[i];
            let v = self.x[bv];
            let (lo, hi) = (self.f.lb[bv], self.f.ub[bv]);
            let mut push = |bound: f64, to_upper: bool| {
                let t = (bound - v) / rate;
                if t >= -1e-12 {
                    events.push(Event {
                        t: t.max(0.0),
                        row: i,
                        gain: rate.abs(),
                        bound,
                        to_upper,
                        wabs: wi.abs(),
                    });
                }
            };
            if v < lo - FEAS_EPS {
                // Infeasible below: improving while rising toward lo.
                if rate > 0.0 {
                    push(lo, false);
                    if hi.is_finite() {
                        push(hi, true);
                    }
                }
            } else if v > hi + FEAS_EPS {
                if rate < 0.0 {
                    push(hi, true);
                    if lo.is_finite() {
                        push(lo, false);
                    }
                }
            } else if rate > 0.0 {
                if hi.is_finite() {
                    push(hi, true);
                }
            } else if lo.is_finite() {
                push(lo, false);
            }
        }
        events.sort_by(|a, b| {
            a.t.partial_cmp(&b.t)
                .unwrap()
                .then(b.wabs.partial_cmp(&a.wabs).unwrap())
        });
        let mut slope = slope0;
        for e in &events {
            if e.row == usize::MAX {
                // Hard stop: bound flip of the entering variable.
                self.apply_step(j, dir, w, e.t);
                self.vstat[j] = if e.to_upper {
                    VStat::AtUpper
                } else {
                    VStat::AtLower
                };
                self.x[j] = if e.to_upper { self.f.ub[j] } else { self.f.lb[j] };
                self.track_stall(e.t);
                return Ok(());
            }
            slope += e.gain;
            if slope >= -1e-12 {
                // Pivot: this basic leaves at the bound it reached.
                self.apply_step(j, dir, w, e.t);
                let stat = if e.to_upper {
                    VStat::AtUpper
                } else {
                    VStat::AtLower
                };
                if w[e.row].abs() < 1e-11 {
                    return Err(MilpError::Numerical("vanishing pivot in phase 1".into()));
                }
                self.pivot(j, e.row, w, e.bound, stat);
                self.track_stall(e.t);
                return Ok(());
            }
        }
        Err(MilpError::Numerical(
            "phase 1 descent direction has no blocking breakpoint".into(),
        ))
    }

    /// Move entering j by t along dir and update all basic values.
    fn apply_step(&mut self, j: usize, dir: f64, w: &[f64], t: f64) {
        if t == 0.0 {
            return;
        }
        self.x[j] += dir * t;
        for (i, &wi) in w.iter().enumerate() {
            if wi != 0.0 {
                let bv = self.basis[i];
                self.x[bv] -= dir * wi * t;
            }
        }
    }

    fn track_stall(&mut self, t: f64) {
        if t <= DEGEN_EPS {
            self.stall += 1;
            if self.stall > STALL_LIMIT {
                self.bland = true;
            }
        } else {
            self.stall = 0;
            self.bland = false;
        }
    }

    fn phase2(&mut self) -> Result<LpStatus, MilpError> {
        let m = self.f.m;
        let total = self.f.n + m;
        let budget = iteration_budget(total);
        // Duals for the real objective, maintained incrementally per pivot.
        let cb: Vec<f64> = self.basis.iter().map(|&bv| self.cost_of(bv)).collect();
        let mut y = self.btran(&cb);
        let mut verified = false;
        loop {
            if self.etas.len() as u64 >= REFRESH_PIVOTS {
                self.refactor()?;
                self.recompute_xb();
                let cb: Vec<f64> = self.basis.iter().map(|&bv| self.cost_of(bv)).collect();
                y = self.btran(&cb);
            }
            if self.iterations - self.iter_start >= budget {
                return Err(MilpError::Numerical(format!(
                    "phase 2 iteration limit hit ({budget})"
                )));
            }
            let entering = self.pick_entering_phase2(&y);
            let (j, dir, rc) = match entering {
                Entering::None => {
                    if verified {
                        return Ok(LpStatus::Optimal);
                    }
                    // Guard against dual drift: recompute duals once and
                    // re-price before declaring optimality.
                    let cb: Vec<f64> =
                        self.basis.iter().map(|&bv| self.cost_of(bv)).collect();
                    y = self.btran(&cb);
                    verified = true;
                    continue;
                }
                Entering::Var { j, dir, score } => (j, dir, score),
            };
            verified = false;
            let w = self.ftran(j);
            // Two-pass ratio test. Pass one finds the shortest step with
            // every bound relaxed by the feasibility tolerance; pass two
            // picks, among basics that block within that step, the one with
            // the largest pivot element. Trading at most FEAS_EPS of bound
            // overshoot for a big pivot is what keeps long solves stable.
            let flip_t = self.f.ub[j] - self.f.lb[j];
            let mut t_relax = flip_t;
            for (i, &wi) in w.iter().enumerate() {
                let rate = -dir * wi;
                if rate.abs() < 1e-11 {
                    continue;
                }
                let bv = self.basis[i];
                let v = self.x[bv];
                let bound = if rate > 0.0 { self.f.ub[bv] } else { self.f.lb[bv] };
                if !bound.is_finite() {
                    continue;
                }
                let t = ((bound - v) / rate).max(0.0) + FEAS_EPS / rate.abs();
                if t < t_relax {
                    t_relax = t;
                }
            }
            let mut blocker: Option<(usize, f64, bool, f64)> = None; // row, bound, to_upper, |w|
            let mut t_best = flip_t;
            for (i, &wi) in w.iter().enumerate() {
                let rate = -dir * wi;
                if rate.abs() < 1e-11 {
                    continue;
                }
                let bv = self.basis[i];
                let v = self.x[bv];
                let (bound, to_upper) = if rate > 0.0 {
                    (self.f.ub[bv], true)
                } else {
                    (self.f.lb[bv], false)
                };
                if !bound.is_finite() {
                    continue;
                }
                let t = ((bound - v) / rate).max(0.0);
                if t > t_relax {
                    continue;
                }
                let better = match &blocker {
                    None => true,
                    Some((_, _, _, bw)) => wi.abs() > *bw,
                };
                if better {
                    t_best = t;
                    blocker = Some((i, bound, to_upper, wi.abs()));
                }
            }
            if blocker.is_none() {
                t_best = flip_t;
            }
            match blocker {
                None => {
                    if !t_best.is_finite() {
                        return Ok(LpStatus::Unbounded);
                    }
                    // Bound flip.
                    self.apply_step(j, dir, &w, t_best);
                    self.vstat[j] = if dir > 0.0 {
                        VStat::AtUpper
                    } else {
                        VStat::AtLower
                    };
                    self.x[j] = if dir > 0.0 { self.f.ub[j] } else { self.f.lb[j] };
                    self.track_stall(t_best);
                }
                Some((row, bound, to_upper, wabs)) => {
                    if wabs < PIVOT_EPS && t_best <= DEGEN_EPS && !self.etas.is_empty()
                    {
                        // A tiny degenerate pivot: prefer refactoring over
                        // compounding error.
                        self.refactor()?;
                        let cb: Vec<f64> =
                            self.basis.iter().map(|&bv| self.cost_of(bv)).collect();
                        y = self.btran(&cb);
                        self.recompute_xb();
                        continue;
                    }
                    self.apply_step(j, dir, &w, t_best);
                    let stat = if to_upper { VStat::AtUpper } else { VStat::AtLower };
                    self.pivot(j, row, &w, bound, stat);
                    // Dual update: y' = y + rc * (row `row` of the new B⁻¹).
                    let rho = self.btran_unit(row);
                    for c in 0..m {
                        y[c] += rc * rho[c];
                    }
                    self.track_stall(t_best);
                }
            }
            self.iterations += 1;
        }
    }

    fn pick_entering_phase2(&self, y: &[f64]) -> Entering {
        let total = self.f.n + self.f.m;
        let mut best = Entering::None;
        for j in 0..total {
            let (dir, score) = match self.vstat[j] {
                VStat::Basic(_) => continue,
                VStat::AtLower => {
                    if self.f.lb[j] == self.f.ub[j] {
                        continue;
                    }
                    let rc = self.cost_of(j) - self.price_col(y, j);
                    if rc < -DUAL_EPS {
                        (1.0, rc)
                    } else {
                        continue;
                    }
                }
                VStat::AtUpper => {
                    let rc = self.cost_of(j) - self.price_col(y, j);
                    if rc > DUAL_EPS {
                        (-1.0, rc)
                    } else {
                        continue;
                    }
                }
                VStat::Loose => {
                    let rc = self.cost_of(j) - self.price_col(y, j);
                    if rc.abs() > DUAL_EPS {
                        (-rc.signum(), rc)
                    } else {
                        continue;
                    }
                }
            };
            if self.bland {
                return Entering::Var { j, dir, score };
            }
            let mag = score.abs();
            match best {
                Entering::None => best = Entering::Var { j, dir, score },
                Entering::Var { score: s, .. } if mag > s.abs() => {
                    best = Entering::Var { j, dir, score }
                }
                _ => {}
            }
        }
        best
    }
}

fn iteration_budget(total_vars: usize) -> u64 {
    (50 * total_vars as u64).max(20_000)
}

fn initial_status(lo: f64, hi: f64) -> (VStat, f64) {
    if lo.is_finite() {
        (VStat::AtLower, lo)
    } else if hi.is_finite() {
        (VStat::AtUpper, hi)
    } else {
        (VStat::Loose, 0.0)
    }
}

fn resnap(x: f64, lo: f64, hi: f64, _old: VStat) -> (VStat, f64) {
    if lo.is_finite() && (x <= lo || !hi.is_finite() && x < lo) {
        return (VStat::AtLower, lo);
    }
    if hi.is_finite() && x >= hi {
        return (VStat::AtUpper, hi);
    }
    if !lo.is_finite() && !hi.is_finite() {
        return (VStat::Loose, x);
    }
    // Inside finite bounds: park on the nearer bound for a clean nonbasic
    // point.
    if lo.is_finite() && (!hi.is_finite() || x - lo <= hi - x) {
        (VStat::AtLower, lo)
    } else {
        (VStat::AtUpper, hi)
    }
}

/// Solve a model's LP relaxation (binaries relaxed to their bounds).
/// Returns the status, objective, and structural values.
pub fn solve_lp(model: &MilpModel) -> Result<(LpStatus, f64, Vec<f64>), MilpError> {
    let mut s = Simplex::new(StdForm::from_model(model));
    let status = s.solve()?;
    Ok((status, s.objective(), s.values().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{MilpModel, Sense};

    fn check_feasible(model: &MilpModel, x: &[f64]) {
        let viols = model.check(x, 1e-5);
        let real: Vec<_> = viols
            .iter()
            .filter(|v| !v.what.contains("fractional"))
            .collect();
        assert!(real.is_empty(), "infeasible LP answer: {real:?}");
    }

    #[test]
    fn one_dimensional() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, f64::INFINITY, 1.0);
        m.add_con("lo", vec![(x, 1.0)], Sense::Ge, 3.0);
        let (st, obj, xs) = solve_lp(&m).unwrap();
        assert_eq!(st, LpStatus::Optimal);
        assert!((obj - 3.0).abs() < 1e-8);
        assert!((xs[0] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn two_dimensional_corner() {
        // min -x - 2y st x + y <= 4, x <= 3, y <= 2, x,y >= 0 -> (2,2), -6.
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 3.0, -1.0);
        let y = m.add_continuous("y", 0.0, 2.0, -2.0);
        m.add_con("cap", vec![(x, 1.0), (y, 1.0)], Sense::Le, 4.0);
        let (st, obj, xs) = solve_lp(&m).unwrap();
        assert_eq!(st, LpStatus::Optimal);
        assert!((obj - -6.0).abs() < 1e-8, "obj {obj}");
        check_feasible(&m, &xs);
    }

    #[test]
    fn equality_and_free_vars() {
        // min x + y st x - y = 2, y free, x in [0, 10] -> y = x - 2,
        // obj = 2x - 2, minimized at x = 0, y = -2 -> -2.
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 10.0, 1.0);
        let y = m.add_continuous("y", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        m.add_con("eq", vec![(x, 1.0), (y, -1.0)], Sense::Eq, 2.0);
        let (st, obj, xs) = solve_lp(&m).unwrap();
        assert_eq!(st, LpStatus::Optimal);
        assert!((obj - -2.0).abs() < 1e-8, "obj {obj}");
        assert!((xs[0] - 0.0).abs() < 1e-8 && (xs[1] - -2.0).abs() < 1e-8);
    }

    #[test]
    fn detects_infeasible() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 1.0, 0.0);
        m.add_con("hi", vec![(x, 1.0)], Sense::Ge, 3.0);
        let (st, _, _) = solve_lp(&m).unwrap();
        assert_eq!(st, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, f64::INFINITY, -1.0);
        m.add_con("weak", vec![(x, -1.0)], Sense::Le, 0.0);
        let (st, _, _) = solve_lp(&m).unwrap();
        assert_eq!(st, LpStatus::Unbounded);
    }

    #[test]
    fn negative_bounds_and_ge_rows() {
        // min 2a - b st a + b >= -3, a - b <= 5, a in [-4, 4], b in [-4, 4].
        // Optimum: a as small as feasible, b as large: a = -4, b = 4
        // (feasible: sum 0 >= -3, diff -8 <= 5) -> obj -12.
        let mut m = MilpModel::new("t");
        let a = m.add_continuous("a", -4.0, 4.0, 2.0);
        let b = m.add_continuous("b", -4.0, 4.0, -1.0);
        m.add_con("s", vec![(a, 1.0), (b, 1.0)], Sense::Ge, -3.0);
        m.add_con("d", vec![(a, 1.0), (b, -1.0)], Sense::Le, 5.0);
        let (st, obj, xs) = solve_lp(&m).unwrap();
        assert_eq!(st, LpStatus::Optimal);
        assert!((obj - -12.0).abs() < 1e-8, "obj {obj}");
        check_feasible(&m, &xs);
    }

    #[test]
    fn degenerate_redundant_rows() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 10.0, -1.0);
        let y = m.add_continuous("y", 0.0, 10.0, -1.0);
        for k in 0..6 {
            // Six copies of the same binding structure through one vertex.
            m.add_con(
                format!("r{k}"),
                vec![(x, 1.0), (y, 1.0)],
                Sense::Le,
                4.0,
            );
        }
        m.add_con("also", vec![(x, 2.0), (y, 2.0)], Sense::Le, 8.0);
        let (st, obj, xs) = solve_lp(&m).unwrap();
        assert_eq!(st, LpStatus::Optimal);
        assert!((obj - -4.0).abs() < 1e-8);
        check_feasible(&m, &xs);
    }

    #[test]
    fn warm_restart_matches_fresh_solve() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 5.0, -1.0);
        let y = m.add_continuous("y", 0.0, 5.0, -1.0);
        m.add_con("c1", vec![(x, 1.0), (y, 2.0)], Sense::Le, 8.0);
        m.add_con("c2", vec![(x, 2.0), (y, 1.0)], Sense::Le, 8.0);
        let mut s = Simplex::new(StdForm::from_model(&m));
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        let first = s.objective();
        assert!((first - -16.0 / 3.0).abs() < 1e-8, "obj {first}");
        // Tighten x and re-solve warm; compare against a fresh solve of the
        // modified model.
        s.set_bounds(0, 0.0, 1.0);
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        m.set_bounds(crate::milp::VarId(0), 0.0, 1.0);
        let (_, fresh_obj, _) = solve_lp(&m).unwrap();
        assert!((s.objective() - fresh_obj).abs() < 1e-8);
        // Relax back; warm solve must recover the original optimum.
        s.set_bounds(0, 0.0, 5.0);
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        assert!((s.objective() - first).abs() < 1e-8);
    }

    #[test]
    fn maximize_sense() {
        let mut m = MilpModel::new("t");
        m.sense = crate::milp::ObjSense::Maximize;
        let x = m.add_continuous("x", 0.0, 7.0, 3.0);
        m.add_con("cap", vec![(x, 1.0)], Sense::Le, 5.0);
        let (st, obj, xs) = solve_lp(&m).unwrap();
        assert_eq!(st, LpStatus::Optimal);
        assert!((obj - 15.0).abs() < 1e-8);
        assert!((xs[0] - 5.0).abs() < 1e-8);
    }

    // --- randomized cross-check against a vertex-enumeration oracle ---

    /// Brute-force LP oracle: enumerate candidate vertices as intersections
    /// of n active constraints drawn from rows and variable bounds, keep the
    /// feasible ones, and take the best objective. Only valid when the
    /// feasible region is bounded (all variables boxed).
    fn oracle_lp(model: &MilpModel) -> Option<f64> {
        let n = model.vars.len();
        // Each candidate row: (coefs, rhs) treated as equality when active.
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for con in &model.cons {
            let mut c = vec![0.0; n];
            for (j, v) in &con.terms {
                c[*j] = *v;
            }
            rows.push((c, con.rhs));
        }
        for (j, v) in model.vars.iter().enumerate() {
            let mut lo = vec![0.0; n];
            lo[j] = 1.0;
            rows.push((lo.clone(), v.lb));
            rows.push((lo, v.ub));
        }
        let k = rows.len();
        let mut best: Option<f64> = None;
        let mut idx = vec![0usize; n];
        fn combos(
            k: usize,
            n: usize,
            start: usize,
            idx: &mut Vec<usize>,
            depth: usize,
            f: &mut impl FnMut(&[usize]),
        ) {
            if depth == n {
                f(idx);
                return;
            }
            for i in start..k {
                idx[depth] = i;
                combos(k, n, i + 1, idx, depth + 1, f);
            }
        }
        let mut consider = |active: &[usize]| {
            // Solve the n x n system of active rows.
            let mut a = vec![vec![0.0; n + 1]; n];
            for (r, &ri) in active.iter().enumerate() {
                for c in 0..n {
                    a[r][c] = rows[ri].0[c];
                }
                a[r][n] = rows[ri].1;
            }
            // Gaussian elimination with partial pivoting.
            for col in 0..n {
                let piv = (col..n).max_by(|&i, &j| {
                    a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
                });
                let piv = piv.unwrap();
                if a[piv][col].abs() < 1e-9 {
                    return;
                }
                a.swap(col, piv);
                for r in 0..n {
                    if r != col {
                        let f = a[r][col] / a[col][col];
                        for c in col..=n {
                            a[r][c] -= f * a[col][c];
                        }
                    }
                }
            }
            let x: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
            if model.check(&x, 1e-7).iter().any(|v| !v.what.contains("fractional")) {
                return;
            }
            let obj = model.objective_value(&x);
            best = Some(match best {
                None => obj,
                Some(b) => b.min(obj),
            });
        };
        combos(k, n, 0, &mut idx, 0, &mut consider);
        best
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20240817);
        for case in 0..60 {
            let n = rng.gen_range(2..=4);
            let rows = rng.gen_range(2..=6);
            let mut m = MilpModel::new("fuzz");
            for j in 0..n {
                let lb = rng.gen_range(-5.0..0.0);
                let ub = rng.gen_range(0.0..5.0);
                let c = rng.gen_range(-3.0..3.0);
                m.add_continuous(format!("x{j}"), lb, ub, c);
            }
            for r in 0..rows {
                let terms: Vec<(crate::milp::VarId, f64)> = (0..n)
                    .filter_map(|j| {
                        if rng.gen_bool(0.7) {
                            Some((crate::milp::VarId(j), rng.gen_range(-2.0..2.0)))
                        } else {
                            None
                        }
                    })
                    .collect();
                if terms.is_empty() {
                    continue;
                }
                let sense = if rng.gen_bool(0.5) { Sense::Le } else { Sense::Ge };
                let rhs = rng.gen_range(-4.0..4.0);
                m.add_con(format!("r{r}"), terms, sense, rhs);
            }
            let got = solve_lp(&m);
            let want = oracle_lp(&m);
            match (got, want) {
                (Ok((LpStatus::Optimal, obj, xs)), Some(w)) => {
                    assert!(
                        (obj - w).abs() < 1e-6,
                        "case {case}: solver {obj} vs oracle {w}"
                    );
                    check_feasible(&m, &xs);
                }
                (Ok((LpStatus::Infeasible, _, _)), None) => {}
                (g, w) => panic!("case {case}: solver {g:?} vs oracle {w:?}"),
            }
        }
    }

    #[test]
    fn larger_random_lps_stay_consistent() {
        // No oracle here; assert internal consistency: returned points are
        // feasible and re-solving from scratch reproduces the objective.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let n = rng.gen_range(10..25);
            let rows = rng.gen_range(10..30);
            let mut m = MilpModel::new("fuzz-large");
            for j in 0..n {
                m.add_continuous(format!("x{j}"), 0.0, rng.gen_range(1.0..10.0), rng.gen_range(-2.0..2.0));
            }
            for r in 0..rows {
                let mut terms: Vec<(crate::milp::VarId, f64)> = Vec::new();
                for j in 0..n {
                    if rng.gen_bool(0.3) {
                        terms.push((crate::milp::VarId(j), rng.gen_range(-1.5..1.5)));
                    }
                }
                if terms.is_empty() {
                    continue;
                }
                m.add_con(
                    format!("r{r}"),
                    terms,
                    if rng.gen_bool(0.7) { Sense::Le } else { Sense::Ge },
                    rng.gen_range(-2.0..6.0),
                );
            }
            if let Ok((LpStatus::Optimal, obj, xs)) = solve_lp(&m) {
                check_feasible(&m, &xs);
                let (st2, obj2, _) = solve_lp(&m).unwrap();
                assert_eq!(st2, LpStatus::Optimal);
                assert!((obj - obj2).abs() < 1e-7);
            }
        }
    }
}
