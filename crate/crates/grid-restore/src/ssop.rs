//! Sequential switching: turn an initial and a target switch configuration
//! into an ordered, timed plan of single-switch operations.
//!
//! The target configuration says *where* the network should end up; this
//! module decides *in what order* to flip the switches so that every
//! intermediate state respects what each device class can actually do:
//! sectionalizers only operate de-energized, load-break switches never
//! interrupt fault current and carry bounded load current, breakers and
//! reclosers go anytime, fuses never move. Each step operates at most one
//! switch, operations are front-loaded (no idle step before the last
//! operation), and manual devices wait for a field operator to drive out to
//! them. The objective balances served load per step against operation count
//! and elapsed time.
//!
//! Two independent routes produce plans:
//!
//! * [`solve_ssop`] — an exact depth-first search over operation sequences
//!   with an admissible bound, the primary route;
//! * [`build_ssop`] + [`solve_ssop_model`] — a MILP over per-step switch
//!   states, energization flags, linearized per-phase flows, and a crew
//!   routing block for manual devices.
//!
//! The MILP decoder audits its answer against connectivity propagation
//! bit-for-bit and recomputes timing with the same canonical scheduler the
//! search uses, so the two routes can be compared objective-for-objective.
//! [`validate_plan`] replays any plan — ours or anyone else's — and reports
//! every rule, current, timing, and bookkeeping violation as data.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::flow::{self, FlowState, FlowTolerances};
use crate::milp::{
    big_m_for, linearize_circle, BigMFamily, MilpError, MilpModel, Sense, Solution, SolveStats,
    SolveStatus, Solver, VarId,
};
use crate::model::{CostParams, CrewKind, DamageScenario, Network, Phase, SwitchClass};
use crate::reduction::ReducedNetwork;
use crate::rules::{self, Action, ActiveDamage, Propagation, RuleViolation, SwitchOp};

/// Sequencing can fail for structural reasons, solver reasons, or because the
/// answer survived neither the propagation nor the objective audit.
#[derive(Debug, thiserror::Error)]
pub enum SsopError {
    #[error("no feasible switching sequence: {reason}")]
    Infeasible { reason: String },
    #[error("search or solver hit its work limit before proving an answer")]
    Limit,
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error("solution failed its independent audit: {0}")]
    Audit(String),
}

// ---------------------------------------------------------------------------
// Energization snapshots
// ---------------------------------------------------------------------------

/// Which blocks are energized, which can reach active damage, and which are
/// actually served, for one switch configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergizationState {
    /// Block reaches a source over closed switches.
    pub energized: Vec<bool>,
    /// Block reaches unrepaired damage over closed switches.
    pub fault_reach: Vec<bool>,
    /// Block carries load: energized and clear of damage.
    pub served: Vec<bool>,
}

/// Pure BFS connectivity for one configuration; no optimization involved.
/// This is the reference semantics every solver answer is audited against.
pub fn propagate(red: &ReducedNetwork, closed: &[bool], dmg: &ActiveDamage) -> EnergizationState {
    let prop = rules::propagate(red, closed, dmg);
    let served = prop.served_mask();
    EnergizationState {
        energized: prop.energized,
        fault_reach: prop.faulted,
        served,
    }
}

// ---------------------------------------------------------------------------
// Plans
// ---------------------------------------------------------------------------

/// One scheduled switching operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchAction {
    /// Step number, 1-based; step 0 is the initial configuration.
    pub step: u32,
    pub line_id: String,
    pub action: Action,
    /// Restoration clock when this operation completes, minutes.
    pub elapsed_min: f64,
    /// Operating crew, for manual devices only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<String>,
    /// Crew arrival time at the switch, minutes (manual only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_min: Option<f64>,
    /// Time the crew waited on-site before operating (manual only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wait_min: Option<f64>,
}

impl SwitchAction {
    pub fn op(&self) -> SwitchOp {
        SwitchOp {
            line_id: self.line_id.clone(),
            action: self.action,
        }
    }
}

impl fmt::Display for SwitchAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step {}: {}{} at {:.1} min",
            self.step,
            self.action.arrow(),
            self.line_id,
            self.elapsed_min
        )
    }
}

/// A complete switching plan: the actions, the state and serving trajectory
/// they induce, crew movements, and the objective value.
///
/// Index 0 of the per-step vectors is the initial configuration; the vectors
/// run through the full horizon even when the actions stop earlier, so
/// padding steps are visible to cost accounting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwitchingPlan {
    pub actions: Vec<SwitchAction>,
    /// Closed flag per switch edge, per step.
    pub per_step_states: Vec<Vec<bool>>,
    /// Served flag per block, per step.
    pub per_step_served: Vec<Vec<bool>>,
    /// Total (unweighted) kW served per step.
    pub served_kw: Vec<f64>,
    /// Restoration clock per step, minutes; entry 0 is 0.0.
    pub elapsed_min: Vec<f64>,
    /// Stop sequence per operator crew, starting at the depot. Keys are the
    /// travel-matrix location keys.
    pub crew_routes: BTreeMap<String, Vec<String>>,
    pub objective: f64,
    #[serde(skip)]
    pub stats: SolveStats,
}

impl SwitchingPlan {
    /// Number of steps in the horizon (excluding the initial state).
    pub fn horizon(&self) -> usize {
        self.per_step_states.len().saturating_sub(1)
    }
}

// ---------------------------------------------------------------------------
// Validation report
// ---------------------------------------------------------------------------

/// Everything that can be wrong with a switching plan. Violations are data,
/// not errors: the validator replays the whole plan and reports all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlanViolation {
    /// A step's operation breaks a device rule.
    Rule { step: u32, violation: RuleViolation },
    /// Opening this switch interrupts more current than it is rated to break.
    BreakingCurrent {
        step: u32,
        line_id: String,
        phase: char,
        kva: f64,
        limit_kva: f64,
    },
    /// Closing this switch picks up more current than it is rated to make.
    MakingCurrent {
        step: u32,
        line_id: String,
        phase: char,
        kva: f64,
        limit_kva: f64,
    },
    /// A load-break switch opened while its island was both energized and
    /// connected to damage — it would have to interrupt fault current.
    FaultBridge { step: u32, line_id: String },
    /// More than one switching operation in a single step.
    MultipleActions { step: u32, count: usize },
    /// Recorded times contradict operation durations, crew travel, or waits.
    Timing { step: u32, detail: String },
    /// Recorded states, serving flags, or kilowatts disagree with a replay.
    Inconsistent { step: u32, detail: String },
    /// The plan does not end in the target configuration.
    FinalState {
        line_id: String,
        expected_closed: bool,
        found_closed: bool,
    },
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanViolation::Rule { step, violation } => {
                write!(f, "step {step}: {violation}")
            }
            PlanViolation::BreakingCurrent {
                step,
                line_id,
                phase,
                kva,
                limit_kva,
            } => write!(
                f,
                "step {step}: opening {line_id} breaks {kva:.1} kVA on phase {phase}, rated {limit_kva:.1} kVA"
            ),
            PlanViolation::MakingCurrent {
                step,
                line_id,
                phase,
                kva,
                limit_kva,
            } => write!(
                f,
                "step {step}: closing {line_id} makes {kva:.1} kVA on phase {phase}, rated {limit_kva:.1} kVA"
            ),
            PlanViolation::FaultBridge { step, line_id } => write!(
                f,
                "step {step}: load-break switch {line_id} opened while carrying fault current"
            ),
            PlanViolation::MultipleActions { step, count } => {
                write!(f, "step {step}: {count} operations in one step")
            }
            PlanViolation::Timing { step, detail } => write!(f, "step {step}: timing: {detail}"),
            PlanViolation::Inconsistent { step, detail } => {
                write!(f, "step {step}: bookkeeping: {detail}")
            }
            PlanViolation::FinalState {
                line_id,
                expected_closed,
                found_closed,
            } => write!(
                f,
                "final state of {line_id} is {} but the target wants {}",
                state_word(*found_closed),
                state_word(*expected_closed)
            ),
        }
    }
}

fn state_word(closed: bool) -> &'static str {
    if closed {
        "closed"
    } else {
        "open"
    }
}

fn round_binary(x: f64) -> bool {
    x > 0.5
}

/// Outcome of replaying a plan against the device rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<PlanViolation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "plan is clean");
        }
        writeln!(f, "{} violation(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Per-step legality checks shared by search, decoder, and validator
// ---------------------------------------------------------------------------

/// The legality oracle for a single operation: device rules, the load-break
/// fault-current rule, and breaking/making current limits. The search, the
/// MILP decoder audit, and the public validator all go through this one
/// implementation so they cannot drift apart.
pub(crate) struct StepGuard<'a> {
    net: &'a Network,
    red: &'a ReducedNetwork,
    dmg: &'a ActiveDamage,
    /// Per-edge, per-phase voltage magnitude (pu) at the from-block end,
    /// taken from the target-topology solution; 1.0 where de-energized or
    /// unknown. Current ratings are converted to kVA at this voltage.
    sqrt_un: Vec<[f64; 3]>,
    tol: FlowTolerances,
}

/// Per-edge √(U^n) lookup used by both the guard and the MILP radii. A block
/// without a voltage (de-energized in the target, or no estimate supplied)
/// counts as nominal 1.0 pu.
fn sqrt_un_table(red: &ReducedNetwork, voltages_sq_pu: &[Option<[f64; 3]>]) -> Vec<[f64; 3]> {
    red.edges
        .iter()
        .map(|e| {
            let mut out = [1.0f64; 3];
            if let Some(Some(v)) = voltages_sq_pu.get(e.from_block) {
                for ph in 0..3 {
                    if v[ph] > 0.0 {
                        out[ph] = v[ph].sqrt();
                    }
                }
            }
            out
        })
        .collect()
}

impl<'a> StepGuard<'a> {
    pub(crate) fn new(
        net: &'a Network,
        red: &'a ReducedNetwork,
        dmg: &'a ActiveDamage,
        voltages_sq_pu: &[Option<[f64; 3]>],
    ) -> Self {
        StepGuard {
            net,
            red,
            dmg,
            sqrt_un: sqrt_un_table(red, voltages_sq_pu),
            tol: FlowTolerances::default(),
        }
    }

    pub(crate) fn evaluate(&self, closed: &[bool]) -> FlowState {
        flow::evaluate(self.net, self.red, closed, self.dmg, FlowTolerances::default())
    }

    /// Device-rule legality of one operation against the pre-op state. Covers
    /// everything `rules::check_op` knows plus the load-break fault-current
    /// rule, which is a property of the island, not of the single operation.
    pub(crate) fn rule_check(
        &self,
        closed: &[bool],
        before: &Propagation,
        edge: usize,
        action: Action,
        step: u32,
    ) -> Option<PlanViolation> {
        if let Err(violation) = rules::check_op(self.red, closed, self.dmg, before, edge, action) {
            return Some(PlanViolation::Rule { step, violation });
        }
        let e = &self.red.edges[edge];
        if action == Action::Open
            && e.class == SwitchClass::Lbs
            && before.energized[e.from_block]
            && before.faulted[e.from_block]
        {
            // The edge is closed (an open op on an open edge is Redundant
            // above), so both endpoints sit in one island; energized and
            // fault-reached together means fault current flows through it.
            return Some(PlanViolation::FaultBridge {
                step,
                line_id: e.line_id.clone(),
            });
        }
        None
    }

    /// Breaking (on pre-op flows) or making (on post-op flows) current check.
    /// Sectionalizers are exempt: the no-load rule already forces both ends
    /// dead, and their rating is zero by convention. Fuses never operate.
    pub(crate) fn current_check(
        &self,
        pre: &FlowState,
        post: &FlowState,
        edge: usize,
        action: Action,
        step: u32,
    ) -> Option<PlanViolation> {
        let e = &self.red.edges[edge];
        if matches!(e.class, SwitchClass::Sec | SwitchClass::Fuse) {
            return None;
        }
        let sw = self.net.lines[e.line].switch.as_ref()?;
        let (state, amps) = match action {
            Action::Open => (pre, sw.breaking_amps),
            Action::Close => (post, sw.making_amps),
        };
        let mut worst: Option<(usize, f64, f64)> = None;
        for ph in Phase::ALL {
            let p = state.edge_p_kw[edge][ph.index()];
            let q = state.edge_q_kvar[edge][ph.index()];
            let kva = (p * p + q * q).sqrt();
            let limit = self.sqrt_un[edge][ph.index()] * self.net.amps_to_kva(amps);
            if kva > limit * (1.0 + self.tol.rel) {
                let excess = kva - limit;
                if worst.map_or(true, |(_, _, w)| excess > w) {
                    worst = Some((ph.index(), limit, excess));
                }
            }
        }
        let (ph, limit_kva, _) = worst?;
        let p = state.edge_p_kw[edge][ph];
        let q = state.edge_q_kvar[edge][ph];
        let kva = (p * p + q * q).sqrt();
        let line_id = e.line_id.clone();
        let phase = Phase::ALL[ph].letter();
        Some(match action {
            Action::Open => PlanViolation::BreakingCurrent {
                step,
                line_id,
                phase,
                kva,
                limit_kva,
            },
            Action::Close => PlanViolation::MakingCurrent {
                step,
                line_id,
                phase,
                kva,
                limit_kva,
            },
        })
    }
}

// ---------------------------------------------------------------------------
// Canonical timing
// ---------------------------------------------------------------------------

pub(crate) struct CrewSlot {
    pub crew: String,
    pub arrival: f64,
    pub wait: f64,
}

pub(crate) struct TimingOutcome {
    /// Clock value per step 1..=horizon (padding steps repeat the last one).
    pub elapsed: Vec<f64>,
    /// Crew assignment per operated step; `None` for remote devices.
    pub slots: Vec<Option<CrewSlot>>,
    /// Stop sequence per operator crew, starting at the depot.
    pub routes: BTreeMap<String, Vec<String>>,
    /// Sum of the clock over all steps — the quantity the objective prices.
    pub o_sum: f64,
}

const ASSIGNMENT_LIMIT: u64 = 1_000_000;

/// The canonical clock for a fixed operation sequence.
///
/// Remote devices complete one operation time after the previous step. A
/// manual device needs an operator on site: crews start at the depot at time
/// zero, drive directly from job to job, may wait at most the configured
/// maximum for the previous step to finish, and hold the step until
/// arrival + wait + operation time. The crew-to-step assignment minimizing
/// total elapsed time is found by enumeration (operator counts are small);
/// ties go to the first assignment in crew order, which keeps output stable.
pub(crate) fn schedule_timing(
    net: &Network,
    red: &ReducedNetwork,
    seq: &[(usize, Action)],
    horizon: usize,
    scenario: &DamageScenario,
    costs: &CostParams,
) -> Result<TimingOutcome, String> {
    if seq.len() > horizon {
        return Err(format!(
            "{} operations do not fit a {horizon}-step horizon",
            seq.len()
        ));
    }
    let op_time: Vec<f64> = seq
        .iter()
        .map(|&(e, _)| {
            net.lines[red.edges[e].line]
                .switch
                .as_ref()
                .map(|sw| sw.op_time(costs))
                .unwrap_or(0.0)
        })
        .collect();
    let manual_steps: Vec<usize> = seq
        .iter()
        .enumerate()
        .filter(|(_, &(e, _))| !red.edges[e].remote)
        .map(|(i, _)| i)
        .collect();
    let operators: Vec<&str> = scenario
        .crews
        .iter()
        .filter(|c| c.kind == CrewKind::Operator)
        .map(|c| c.id.as_str())
        .collect();
    let depot = scenario.depot_key().to_string();

    let finish = |elapsed: Vec<f64>,
                  slots: Vec<Option<CrewSlot>>,
                  horizon: usize|
     -> TimingOutcome {
        let last = elapsed.last().copied().unwrap_or(0.0);
        let mut elapsed = elapsed;
        while elapsed.len() < horizon {
            elapsed.push(last);
        }
        let o_sum = elapsed.iter().sum();
        let mut routes = BTreeMap::new();
        for op in &operators {
            routes.insert(op.to_string(), vec![depot.clone()]);
        }
        for (i, slot) in slots.iter().enumerate() {
            if let Some(slot) = slot {
                let (e, _) = seq[i];
                routes
                    .get_mut(&slot.crew)
                    .expect("slot crews come from the operator list")
                    .push(switch_key(&red.edges[e].line_id));
            }
        }
        TimingOutcome {
            elapsed,
            slots,
            routes,
            o_sum,
        }
    };

    if manual_steps.is_empty() {
        let mut elapsed = Vec::with_capacity(seq.len());
        let mut clock = 0.0;
        for t in &op_time {
            clock += t;
            elapsed.push(clock);
        }
        let slots = seq.iter().map(|_| None).collect();
        return Ok(finish(elapsed, slots, horizon));
    }
    if operators.is_empty() {
        let (e, _) = seq[manual_steps[0]];
        return Err(format!(
            "manual switch {} needs an operator crew and none is available",
            red.edges[e].line_id
        ));
    }

    let k = operators.len() as u64;
    let combos = (k as f64).powi(manual_steps.len() as i32);
    if combos > ASSIGNMENT_LIMIT as f64 {
        return Err(format!(
            "{} crew assignments for {} manual operations exceed the enumeration limit",
            combos as u128,
            manual_steps.len()
        ));
    }

    // Odometer over crew choices, last manual step fastest; the first
    // feasible minimum wins ties so the outcome is deterministic.
    let mut choice = vec![0usize; manual_steps.len()];
    let mut best: Option<(f64, Vec<f64>, Vec<Option<CrewSlot>>)> = None;
    loop {
        let mut pos: Vec<String> = operators.iter().map(|_| depot.clone()).collect();
        let mut avail = vec![0.0f64; operators.len()];
        let mut elapsed = Vec::with_capacity(seq.len());
        let mut slots: Vec<Option<CrewSlot>> = Vec::with_capacity(seq.len());
        let mut clock = 0.0f64;
        let mut mi = 0usize;
        let mut feasible = true;
        for (i, &(e, _)) in seq.iter().enumerate() {
            if red.edges[e].remote {
                clock += op_time[i];
                slots.push(None);
            } else {
                let c = choice[mi];
                mi += 1;
                let key = switch_key(&red.edges[e].line_id);
                let Some(travel) = scenario.travel(&pos[c], &key) else {
                    feasible = false;
                    break;
                };
                let arrival = avail[c] + travel;
                let wait = (clock - arrival).max(0.0);
                if wait > costs.max_wait_min + 1e-9 {
                    feasible = false;
                    break;
                }
                clock = arrival.max(clock) + op_time[i];
                pos[c] = key;
                avail[c] = clock;
                slots.push(Some(CrewSlot {
                    crew: operators[c].to_string(),
                    arrival,
                    wait,
                }));
            }
            elapsed.push(clock);
        }
        if feasible {
            let last = elapsed.last().copied().unwrap_or(0.0);
            let o_sum: f64 =
                elapsed.iter().sum::<f64>() + (horizon - seq.len()) as f64 * last;
            if best.as_ref().map_or(true, |(b, _, _)| o_sum < *b - 1e-9) {
                best = Some((o_sum, elapsed, slots));
            }
        }
        // Advance the odometer.
        let mut d = manual_steps.len();
        loop {
            if d == 0 {
                break;
            }
            d -= 1;
            choice[d] += 1;
            if choice[d] < operators.len() {
                break;
            }
            choice[d] = 0;
        }
        if choice.iter().all(|&c| c == 0) {
            break;
        }
    }

    match best {
        Some((_, elapsed, slots)) => Ok(finish(elapsed, slots, horizon)),
        None => Err("no crew assignment completes the manual operations within the wait limit"
            .to_string()),
    }
}

fn switch_key(line_id: &str) -> String {
    format!("switch:{line_id}")
}

// ---------------------------------------------------------------------------
// Plan assembly
// ---------------------------------------------------------------------------

fn served_weight(red: &ReducedNetwork, served: &[bool]) -> f64 {
    red.blocks
        .iter()
        .enumerate()
        .filter(|(b, _)| served[*b])
        .map(|(_, blk)| blk.weighted_load_kw)
        .sum()
}

fn served_kw(red: &ReducedNetwork, served: &[bool]) -> f64 {
    red.blocks
        .iter()
        .enumerate()
        .filter(|(b, _)| served[*b])
        .map(|(_, blk)| blk.total_load_kw())
        .sum()
}

/// Replay a sequence, schedule its timing, and package the result. This is
/// the single place plan objectives are computed, so search and MILP answers
/// are comparable by construction.
fn assemble_plan(
    net: &Network,
    red: &ReducedNetwork,
    dmg: &ActiveDamage,
    gamma0: &[bool],
    seq: &[(usize, Action)],
    horizon: usize,
    scenario: &DamageScenario,
    costs: &CostParams,
    stats: SolveStats,
) -> Result<SwitchingPlan, SsopError> {
    let timing = schedule_timing(net, red, seq, horizon, scenario, costs)
        .map_err(|reason| SsopError::Infeasible { reason })?;

    let mut closed = gamma0.to_vec();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut served_flags = Vec::with_capacity(horizon + 1);
    let mut kw = Vec::with_capacity(horizon + 1);
    let mut objective = -costs.rho_time * timing.o_sum;
    let push_state = |closed: &[bool],
                          states: &mut Vec<Vec<bool>>,
                          served_flags: &mut Vec<Vec<bool>>,
                          kw: &mut Vec<f64>|
     -> f64 {
        let prop = rules::propagate(red, closed, dmg);
        let mask = prop.served_mask();
        let weighted = served_weight(red, &mask);
        kw.push(served_kw(red, &mask));
        states.push(closed.to_vec());
        served_flags.push(mask);
        weighted
    };
    push_state(&closed, &mut states, &mut served_flags, &mut kw);

    let mut actions = Vec::with_capacity(seq.len());
    for s in 1..=horizon {
        if let Some(&(e, action)) = seq.get(s - 1) {
            closed[e] = action == Action::Close;
            objective -= costs.rho_switch_for(red.edges[e].class);
            let slot = &timing.slots[s - 1];
            actions.push(SwitchAction {
                step: s as u32,
                line_id: red.edges[e].line_id.clone(),
                action,
                elapsed_min: timing.elapsed[s - 1],
                operator: slot.as_ref().map(|c| c.crew.clone()),
                arrival_min: slot.as_ref().map(|c| c.arrival),
                wait_min: slot.as_ref().map(|c| c.wait),
            });
        }
        let weighted = push_state(&closed, &mut states, &mut served_flags, &mut kw);
        objective += costs.rho_load * weighted;
    }

    let mut elapsed_min = Vec::with_capacity(horizon + 1);
    elapsed_min.push(0.0);
    elapsed_min.extend_from_slice(&timing.elapsed);

    Ok(SwitchingPlan {
        actions,
        per_step_states: states,
        per_step_served: served_flags,
        served_kw: kw,
        elapsed_min,
        crew_routes: timing.routes,
        objective,
        stats,
    })
}

/// Package an externally given operation list as a plan, without judging its
/// legality — feed the result to [`validate_plan`] for that. Fails only when
/// an operation cannot even be resolved or scheduled.
pub fn plan_from_ops(
    net: &Network,
    red: &ReducedNetwork,
    dmg: &ActiveDamage,
    gamma0: &[bool],
    ops: &[SwitchOp],
    horizon: usize,
    scenario: &DamageScenario,
    costs: &CostParams,
) -> Result<SwitchingPlan, SsopError> {
    let mut seq = Vec::with_capacity(ops.len());
    for op in ops {
        let e = rules::resolve_op(red, op).map_err(|v| SsopError::Infeasible {
            reason: v.to_string(),
        })?;
        seq.push((e, op.action));
    }
    assemble_plan(
        net,
        red,
        dmg,
        gamma0,
        &seq,
        horizon,
        scenario,
        costs,
        SolveStats {
            solver: "replay".to_string(),
            ..SolveStats::default()
        },
    )
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

const TIME_TOL: f64 = 1e-6;

/// Replay a plan step by step and report every violation: device rules,
/// fault-current bridging, breaking/making limits, step discipline, timing
/// arithmetic, bookkeeping consistency, and the final configuration. The
/// replay applies operations blindly — an illegal operation is reported and
/// its state change still happens, so later steps are judged in context.
#[allow(clippy::too_many_arguments)]
pub fn validate_plan(
    net: &Network,
    red: &ReducedNetwork,
    dmg: &ActiveDamage,
    gamma0: &[bool],
    gamma_target: &[bool],
    plan: &SwitchingPlan,
    voltages_sq_pu: &[Option<[f64; 3]>],
    scenario: &DamageScenario,
    costs: &CostParams,
) -> ValidationReport {
    let guard = StepGuard::new(net, red, dmg, voltages_sq_pu);
    let mut violations = Vec::new();
    let horizon = plan.horizon();

    let mut by_step: BTreeMap<u32, Vec<&SwitchAction>> = BTreeMap::new();
    for a in &plan.actions {
        by_step.entry(a.step).or_default().push(a);
    }
    for (&step, acts) in &by_step {
        if step == 0 || step as usize > horizon {
            violations.push(PlanViolation::Inconsistent {
                step,
                detail: format!("action step {step} is outside the 1..={horizon} horizon"),
            });
        }
        if acts.len() > 1 {
            violations.push(PlanViolation::MultipleActions {
                step,
                count: acts.len(),
            });
        }
    }

    let mut closed = gamma0.to_vec();
    let mut pre = guard.evaluate(&closed);
    let mut prev_elapsed = 0.0f64;
    // Crew positions for the travel-chain check: location key and release time.
    let mut crew_state: BTreeMap<String, (String, f64)> = BTreeMap::new();
    let depot = scenario.depot_key().to_string();

    let check_state = |step: usize, closed: &[bool], plan: &SwitchingPlan, violations: &mut Vec<PlanViolation>| {
        if let Some(recorded) = plan.per_step_states.get(step) {
            if recorded != closed {
                violations.push(PlanViolation::Inconsistent {
                    step: step as u32,
                    detail: "recorded switch states disagree with the replay".to_string(),
                });
            }
        }
        let prop = rules::propagate(red, closed, dmg);
        let mask = prop.served_mask();
        if let Some(recorded) = plan.per_step_served.get(step) {
            if recorded != &mask {
                violations.push(PlanViolation::Inconsistent {
                    step: step as u32,
                    detail: "recorded serving flags disagree with propagation".to_string(),
                });
            }
        }
        if let Some(&recorded) = plan.served_kw.get(step) {
            let actual = served_kw(red, &mask);
            if (recorded - actual).abs() > 1e-6 * actual.abs().max(1.0) {
                violations.push(PlanViolation::Inconsistent {
                    step: step as u32,
                    detail: format!("recorded {recorded:.3} kW served, replay gives {actual:.3}"),
                });
            }
        }
    };
    check_state(0, &closed, plan, &mut violations);

    for s in 1..=horizon {
        let acts: &[&SwitchAction] = by_step.get(&(s as u32)).map_or(&[], |v| v.as_slice());
        let mut applied: Vec<(usize, Action)> = Vec::new();
        for a in acts {
            match rules::resolve_op(red, &a.op()) {
                Err(violation) => {
                    violations.push(PlanViolation::Rule {
                        step: s as u32,
                        violation,
                    });
                }
                Ok(e) => {
                    if let Some(v) = guard.rule_check(&closed, &pre.prop, e, a.action, s as u32) {
                        violations.push(v);
                    }
                    closed[e] = a.action == Action::Close;
                    applied.push((e, a.action));
                }
            }
        }
        let post = guard.evaluate(&closed);
        for &(e, action) in &applied {
            if let Some(v) = guard.current_check(&pre, &post, e, action, s as u32) {
                violations.push(v);
            }
        }

        // Timing. The recorded numbers are checked for internal consistency,
        // not optimality: the clock may not run backwards, every operation
        // takes at least its operation time, and manual operations must fit
        // an operator's travel chain exactly.
        let step_elapsed = plan.elapsed_min.get(s).copied();
        match step_elapsed {
            None => violations.push(PlanViolation::Inconsistent {
                step: s as u32,
                detail: "no elapsed-time entry for this step".to_string(),
            }),
            Some(elapsed) => {
                if elapsed < prev_elapsed - TIME_TOL {
                    violations.push(PlanViolation::Timing {
                        step: s as u32,
                        detail: format!(
                            "clock runs backwards: {elapsed:.3} after {prev_elapsed:.3}"
                        ),
                    });
                }
                if acts.is_empty() && (elapsed - prev_elapsed).abs() > TIME_TOL {
                    violations.push(PlanViolation::Timing {
                        step: s as u32,
                        detail: "clock advances on a step with no operation".to_string(),
                    });
                }
                for a in acts {
                    if (a.elapsed_min - elapsed).abs() > TIME_TOL {
                        violations.push(PlanViolation::Inconsistent {
                            step: s as u32,
                            detail: "action and plan disagree on elapsed time".to_string(),
                        });
                    }
                    let Ok(e) = rules::resolve_op(red, &a.op()) else {
                        continue;
                    };
                    let Some(sw) = net.lines[red.edges[e].line].switch.as_ref() else {
                        continue;
                    };
                    let op_time = sw.op_time(costs);
                    if red.edges[e].remote {
                        if elapsed < prev_elapsed + op_time - TIME_TOL {
                            violations.push(PlanViolation::Timing {
                                step: s as u32,
                                detail: format!(
                                    "remote operation finished in under {op_time:.1} min"
                                ),
                            });
                        }
                        continue;
                    }
                    // Manual device: operator, arrival, and wait must be
                    // present and arithmetically consistent.
                    let (Some(op_id), Some(arrival), Some(wait)) =
                        (a.operator.as_ref(), a.arrival_min, a.wait_min)
                    else {
                        violations.push(PlanViolation::Timing {
                            step: s as u32,
                            detail: format!(
                                "manual switch {} has no operator/arrival/wait record",
                                a.line_id
                            ),
                        });
                        continue;
                    };
                    if !scenario
                        .crews
                        .iter()
                        .any(|c| c.kind == CrewKind::Operator && &c.id == op_id)
                    {
                        violations.push(PlanViolation::Timing {
                            step: s as u32,
                            detail: format!("{op_id} is not an operator crew"),
                        });
                    }
                    if !(-TIME_TOL..=costs.max_wait_min + TIME_TOL).contains(&wait) {
                        violations.push(PlanViolation::Timing {
                            step: s as u32,
                            detail: format!(
                                "wait of {wait:.1} min is outside 0..={:.0}",
                                costs.max_wait_min
                            ),
                        });
                    }
                    if arrival + wait < prev_elapsed - TIME_TOL {
                        violations.push(PlanViolation::Timing {
                            step: s as u32,
                            detail: "operation started before the previous step finished"
                                .to_string(),
                        });
                    }
                    if (elapsed - (arrival + wait + op_time)).abs() > TIME_TOL {
                        violations.push(PlanViolation::Timing {
                            step: s as u32,
                            detail: format!(
                                "completion is not arrival {arrival:.1} + wait {wait:.1} + {op_time:.1} min"
                            ),
                        });
                    }
                    // Travel chain: the crew must come straight from its last
                    // known position.
                    let key = switch_key(&a.line_id);
                    let (pos, release) = crew_state
                        .get(op_id)
                        .cloned()
                        .unwrap_or((depot.clone(), 0.0));
                    match scenario.travel(&pos, &key) {
                        None => violations.push(PlanViolation::Timing {
                            step: s as u32,
                            detail: format!("no travel time from {pos} to {key}"),
                        }),
                        Some(travel) => {
                            if (arrival - (release + travel)).abs() > TIME_TOL {
                                violations.push(PlanViolation::Timing {
                                    step: s as u32,
                                    detail: format!(
                                        "arrival {arrival:.1} is not departure {release:.1} + travel {travel:.1}"
                                    ),
                                });
                            }
                        }
                    }
                    crew_state.insert(op_id.clone(), (key, elapsed));
                }
                prev_elapsed = elapsed;
            }
        }

        check_state(s, &closed, plan, &mut violations);
        pre = post;
    }

    // Crew routes, if recorded, must match the actions.
    for (crew, (_, _)) in &crew_state {
        let derived: Vec<String> = std::iter::once(depot.clone())
            .chain(
                plan.actions
                    .iter()
                    .filter(|a| a.operator.as_deref() == Some(crew))
                    .map(|a| switch_key(&a.line_id)),
            )
            .collect();
        match plan.crew_routes.get(crew) {
            Some(route) if route == &derived => {}
            Some(_) => violations.push(PlanViolation::Inconsistent {
                step: 0,
                detail: format!("recorded route for {crew} disagrees with its actions"),
            }),
            None => violations.push(PlanViolation::Inconsistent {
                step: 0,
                detail: format!("no recorded route for operating crew {crew}"),
            }),
        }
    }

    for (e, edge) in red.edges.iter().enumerate() {
        if closed[e] != gamma_target[e] {
            violations.push(PlanViolation::FinalState {
                line_id: edge.line_id.clone(),
                expected_closed: gamma_target[e],
                found_closed: closed[e],
            });
        }
    }

    ValidationReport { violations }
}

// ---------------------------------------------------------------------------
// Restored-load trajectory
// ---------------------------------------------------------------------------

/// The plan's service level over time as a step function: (minutes, fraction
/// of total system load served). Steps completing at the same minute collapse
/// to the last value at that minute.
pub fn restored_curve(red: &ReducedNetwork, plan: &SwitchingPlan) -> Vec<(f64, f64)> {
    let total: f64 = red.blocks.iter().map(|b| b.total_load_kw()).sum();
    let frac = |kw: f64| if total > 0.0 { kw / total } else { 1.0 };
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (s, &kw) in plan.served_kw.iter().enumerate() {
        let minute = plan.elapsed_min.get(s).copied().unwrap_or(0.0);
        let value = frac(kw);
        match points.last_mut() {
            Some((m, v)) if (*m - minute).abs() <= TIME_TOL => *v = value,
            _ => points.push((minute, value)),
        }
    }
    points
}

// ---------------------------------------------------------------------------
// Shared feasibility precheck
// ---------------------------------------------------------------------------

/// Structural reasons no sequence can exist, caught before any search or
/// model build: frozen devices that would have to move, damaged lines that
/// would have to close, manual devices with nobody to operate them, more
/// changes than steps, or meaningless negative prices.
fn precheck(
    red: &ReducedNetwork,
    dmg: &ActiveDamage,
    gamma0: &[bool],
    gamma_target: &[bool],
    steps: usize,
    scenario: &DamageScenario,
    costs: &CostParams,
) -> Result<(), SsopError> {
    let infeasible = |reason: String| Err(SsopError::Infeasible { reason });
    if gamma0.len() != red.edges.len() || gamma_target.len() != red.edges.len() {
        return infeasible(format!(
            "configuration length {} / {} does not match the {} switch edges",
            gamma0.len(),
            gamma_target.len(),
            red.edges.len()
        ));
    }
    let mut negative = costs.rho_load < 0.0 || costs.rho_switch < 0.0 || costs.rho_time < 0.0;
    negative |= costs.rho_switch_overrides.values().any(|&v| v < 0.0);
    if negative {
        return infeasible("cost weights must be non-negative".to_string());
    }
    let has_operators = scenario.crews.iter().any(|c| c.kind == CrewKind::Operator);
    let mut ham = 0usize;
    for (e, edge) in red.edges.iter().enumerate() {
        if gamma0[e] == gamma_target[e] {
            continue;
        }
        ham += 1;
        if edge.class == SwitchClass::Fuse {
            return infeasible(format!("fuse {} cannot be switched", edge.line_id));
        }
        if edge.from_block == edge.to_block {
            return infeasible(format!(
                "switch {} connects a block to itself and is never operated",
                edge.line_id
            ));
        }
        if dmg.edge_damaged[e] && gamma_target[e] {
            return infeasible(format!("damaged line {} cannot be closed", edge.line_id));
        }
        if !edge.remote && !has_operators {
            return infeasible(format!(
                "manual switch {} needs an operator crew and none is available",
                edge.line_id
            ));
        }
    }
    if ham > steps {
        return infeasible(format!(
            "{ham} switch changes do not fit in {steps} steps"
        ));
    }
    Ok(())
}

/// Weighted load of every block that could ever be served: reachable from a
/// source through operable or initially closed switches, never crossing
/// damaged lines or damaged blocks. An admissible per-step serving bound.
fn reachable_weight(red: &ReducedNetwork, dmg: &ActiveDamage, gamma0: &[bool]) -> f64 {
    let nb = red.blocks.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for (e, edge) in red.edges.iter().enumerate() {
        if edge.from_block == edge.to_block
            || dmg.edge_damaged[e]
            || (edge.class == SwitchClass::Fuse && !gamma0[e])
        {
            continue;
        }
        adj[edge.from_block].push(edge.to_block);
        adj[edge.to_block].push(edge.from_block);
    }
    let mut seen = vec![false; nb];
    let mut stack: Vec<usize> = (0..nb)
        .filter(|&b| red.blocks[b].is_source() && !dmg.block_faulted[b])
        .collect();
    for &b in &stack {
        seen[b] = true;
    }
    while let Some(b) = stack.pop() {
        for &o in &adj[b] {
            if !seen[o] && !dmg.block_faulted[o] {
                seen[o] = true;
                stack.push(o);
            }
        }
    }
    red.blocks
        .iter()
        .enumerate()
        .filter(|(b, _)| seen[*b])
        .map(|(_, blk)| blk.weighted_load_kw)
        .sum()
}

// ---------------------------------------------------------------------------
// Exact sequential search
// ---------------------------------------------------------------------------

const EPS: f64 = 1e-9;
const NODE_LIMIT: u64 = 5_000_000;

struct BestPlan {
    value: f64,
    seq: Vec<(usize, Action)>,
}

/// Lexicographic order on sequences by (edge index, open before close);
/// a strict prefix sorts first.
fn seq_less(a: &[(usize, Action)], b: &[(usize, Action)]) -> bool {
    let key = |s: &(usize, Action)| (s.0, matches!(s.1, Action::Close) as u8);
    a.iter().map(key).lt(b.iter().map(key))
}

struct Searcher<'a> {
    net: &'a Network,
    red: &'a ReducedNetwork,
    dmg: &'a ActiveDamage,
    guard: &'a StepGuard<'a>,
    scenario: &'a DamageScenario,
    costs: &'a CostParams,
    steps: usize,
    target: u128,
    w_reach: f64,
    /// Per edge: can ever be operated in some direction.
    actionable: Vec<bool>,
    op_time: Vec<f64>,
    switch_cost: Vec<f64>,
    /// Dominance memo over (configuration, step): best seen
    /// (value-so-far, optimistic clock sum, optimistic clock). Disabled when
    /// manual devices are in play, because crew positions then carry state
    /// the label cannot see.
    memo_enabled: bool,
    memo: HashMap<(u128, u32), (f64, f64, f64)>,
    nodes: u64,
    limit_hit: bool,
    best: Option<BestPlan>,
}

impl<'a> Searcher<'a> {
    /// Switch-cost lower bound for the changes still needed from `bits`.
    fn remaining_cost(&self, bits: u128) -> f64 {
        let mut diff = bits ^ self.target;
        let mut cost = 0.0;
        while diff != 0 {
            let e = diff.trailing_zeros() as usize;
            cost += self.switch_cost[e];
            diff &= diff - 1;
        }
        cost
    }

    /// Record a completed sequence: exact timing, then tie-break on the
    /// lexicographically smaller sequence so reruns are stable. With the
    /// memo on, equal-value sequences hidden behind a dominated label may
    /// not be visited, so the tie-break is deterministic rather than a
    /// guarantee of the globally smallest sequence.
    fn complete(&mut self, t: usize, lp: f64, w_cur: f64, seq: &[(usize, Action)]) {
        let Ok(timing) = schedule_timing(
            self.net,
            self.red,
            seq,
            self.steps,
            self.scenario,
            self.costs,
        ) else {
            return;
        };
        let value = lp + (self.steps - t) as f64 * self.costs.rho_load * w_cur
            - self.costs.rho_time * timing.o_sum;
        let better = match &self.best {
            None => true,
            Some(b) => {
                value > b.value + EPS
                    || ((value - b.value).abs() <= EPS && seq_less(seq, &b.seq))
            }
        };
        if better {
            self.best = Some(BestPlan {
                value,
                seq: seq.to_vec(),
            });
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn rec(
        &mut self,
        closed: &mut Vec<bool>,
        bits: u128,
        t: usize,
        lp: f64,
        o_sum: f64,
        o_now: f64,
        flow_pre: &FlowState,
        seq: &mut Vec<(usize, Action)>,
    ) {
        let served = flow_pre.prop.served_mask();
        let w_cur = served_weight(self.red, &served);
        if bits == self.target {
            self.complete(t, lp, w_cur, seq);
        }
        if t == self.steps || self.limit_hit {
            return;
        }
        let step = (t + 1) as u32;

        // Candidates: every legal toggle, judged against the pre-op state
        // with cheap connectivity only; ordered by the load they serve.
        let mut cands: Vec<(usize, Action, f64)> = Vec::new();
        for e in 0..self.red.edges.len() {
            if !self.actionable[e] {
                continue;
            }
            let action = if closed[e] { Action::Open } else { Action::Close };
            if action == Action::Close && self.dmg.edge_damaged[e] {
                continue;
            }
            if self
                .guard
                .rule_check(closed, &flow_pre.prop, e, action, step)
                .is_some()
            {
                continue;
            }
            if action == Action::Open
                && self
                    .guard
                    .current_check(flow_pre, flow_pre, e, action, step)
                    .is_some()
            {
                continue;
            }
            closed[e] = !closed[e];
            let prop = rules::propagate(self.red, closed, self.dmg);
            closed[e] = !closed[e];
            let w_post = served_weight(self.red, &prop.served_mask());
            cands.push((e, action, w_post));
        }
        cands.sort_by(|a, b| {
            b.2.partial_cmp(&a.2)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });

        for (e, action, w_post) in cands {
            let child_bits = bits ^ (1u128 << e);
            let lp_child = lp + self.costs.rho_load * w_post - self.switch_cost[e];
            let o_now_child = o_now + self.op_time[e];
            let o_sum_child = o_sum + o_now_child;
            let rem = (self.steps - t - 1) as f64;
            let bound = lp_child + rem * self.costs.rho_load * self.w_reach
                - self.costs.rho_time * (o_sum_child + rem * o_now_child)
                - self.remaining_cost(child_bits);
            if let Some(best) = &self.best {
                if bound < best.value - EPS {
                    continue;
                }
            }
            if self.memo_enabled {
                if let Some(&(slp, ssum, snow)) = self.memo.get(&(child_bits, step)) {
                    if slp >= lp_child - EPS
                        && ssum <= o_sum_child + EPS
                        && snow <= o_now_child + EPS
                    {
                        continue;
                    }
                }
            }
            self.nodes += 1;
            if self.nodes > NODE_LIMIT {
                self.limit_hit = true;
                return;
            }
            closed[e] = action == Action::Close;
            let flow_child = self.guard.evaluate(closed);
            let legal = action != Action::Close
                || self
                    .guard
                    .current_check(flow_pre, &flow_child, e, action, step)
                    .is_none();
            if legal {
                if self.memo_enabled {
                    let entry = self
                        .memo
                        .entry((child_bits, step))
                        .or_insert((f64::NEG_INFINITY, f64::INFINITY, f64::INFINITY));
                    if lp_child >= entry.0 - EPS
                        && o_sum_child <= entry.1 + EPS
                        && o_now_child <= entry.2 + EPS
                    {
                        *entry = (lp_child, o_sum_child, o_now_child);
                    }
                }
                seq.push((e, action));
                self.rec(
                    closed,
                    child_bits,
                    t + 1,
                    lp_child,
                    o_sum_child,
                    o_now_child,
                    &flow_child,
                    seq,
                );
                seq.pop();
            }
            closed[e] = action != Action::Close;
            if self.limit_hit {
                return;
            }
        }
    }
}

/// Compute an optimal switching plan from `gamma0` to `gamma_target` in at
/// most `steps` single-switch steps, by exact search over legal sequences.
///
/// `voltages_sq_pu` are squared per-phase block voltages from the target
/// topology solution, used to convert device current ratings to power at
/// actual voltage; missing entries count as nominal. Timing comes from the
/// canonical crew schedule; states that transiently close loops are allowed
/// but carry no evaluated flows, so current checks cannot see them — device
/// rules still apply.
#[allow(clippy::too_many_arguments)]
pub fn solve_ssop(
    net: &Network,
    red: &ReducedNetwork,
    dmg: &ActiveDamage,
    gamma0: &[bool],
    gamma_target: &[bool],
    steps: usize,
    voltages_sq_pu: &[Option<[f64; 3]>],
    scenario: &DamageScenario,
    costs: &CostParams,
) -> Result<SwitchingPlan, SsopError> {
    let start = std::time::Instant::now();
    precheck(red, dmg, gamma0, gamma_target, steps, scenario, costs)?;
    if red.edges.len() > 128 {
        return Err(SsopError::Limit);
    }
    let stats = |nodes: u64, start: std::time::Instant| SolveStats {
        nodes,
        runtime: start.elapsed(),
        solver: "sequential-search".to_string(),
        ..SolveStats::default()
    };
    if gamma0 == gamma_target {
        return assemble_plan(
            net, red, dmg, gamma0, &[], steps, scenario, costs, stats(0, start),
        );
    }

    let has_operators = scenario.crews.iter().any(|c| c.kind == CrewKind::Operator);
    let actionable: Vec<bool> = red
        .edges
        .iter()
        .map(|e| {
            e.class != SwitchClass::Fuse
                && e.from_block != e.to_block
                && (e.remote || has_operators)
        })
        .collect();
    let op_time: Vec<f64> = red
        .edges
        .iter()
        .map(|e| {
            net.lines[e.line]
                .switch
                .as_ref()
                .map(|sw| sw.op_time(costs))
                .unwrap_or(0.0)
        })
        .collect();
    let switch_cost: Vec<f64> = red
        .edges
        .iter()
        .map(|e| costs.rho_switch_for(e.class))
        .collect();
    let manual_in_play = has_operators && red.edges.iter().any(|e| !e.remote);
    let guard = StepGuard::new(net, red, dmg, voltages_sq_pu);
    let mut bits = 0u128;
    let mut target = 0u128;
    for e in 0..red.edges.len() {
        if gamma0[e] {
            bits |= 1 << e;
        }
        if gamma_target[e] {
            target |= 1 << e;
        }
    }
    let mut searcher = Searcher {
        net,
        red,
        dmg,
        guard: &guard,
        scenario,
        costs,
        steps,
        target,
        w_reach: reachable_weight(red, dmg, gamma0),
        actionable,
        op_time,
        switch_cost,
        memo_enabled: !manual_in_play,
        memo: HashMap::new(),
        nodes: 0,
        limit_hit: false,
        best: None,
    };
    let mut closed = gamma0.to_vec();
    let root_flow = guard.evaluate(&closed);
    let mut seq = Vec::new();
    searcher.rec(&mut closed, bits, 0, 0.0, 0.0, 0.0, &root_flow, &mut seq);

    if searcher.limit_hit {
        return Err(SsopError::Limit);
    }
    let Some(best) = searcher.best else {
        return Err(SsopError::Infeasible {
            reason: format!(
                "no legal operation sequence reaches the target within {steps} steps"
            ),
        });
    };
    let plan = assemble_plan(
        net,
        red,
        dmg,
        gamma0,
        &best.seq,
        steps,
        scenario,
        costs,
        stats(searcher.nodes, start),
    )?;
    if (plan.objective - best.value).abs() > 1e-6 * (1.0 + best.value.abs()) {
        return Err(SsopError::Audit(format!(
            "assembled objective {} disagrees with the search value {}",
            plan.objective, best.value
        )));
    }
    Ok(plan)
}

// ---------------------------------------------------------------------------
// Step-sequencing MILP
// ---------------------------------------------------------------------------

/// The sequencing model plus handles into its variables, so answers can be
/// decoded and audited.
pub struct SsopBuild {
    pub model: MilpModel,
    pub steps: usize,
    /// Switch closed state per step (`[s][e]`, `s = 0..=steps`).
    pub u: Vec<Vec<VarId>>,
    /// Energized flag per step and block.
    pub xe: Vec<Vec<VarId>>,
    /// Damage-connected flag per step and block.
    pub xf: Vec<Vec<VarId>>,
    /// Served flag per step and block.
    pub y: Vec<Vec<VarId>>,
    /// Operation indicator per step and edge (`[s-1][e]`); `None` for
    /// devices that can never operate.
    pub gamma: Vec<Vec<Option<VarId>>>,
    /// Completion clock per step (`[s-1]`), minutes.
    pub o_step: Vec<VarId>,
}

/// Build the sequencing MILP: per-step switch states with exactly pinned
/// operation indicators, flow-backed energization and damage-reach flags,
/// per-phase linearized power flows with capacity and breaking/making
/// current rows, and a crew-routing block driving the completion clock of
/// manual operations. Minimization; negate the solved objective to compare
/// with plan objectives.
#[allow(clippy::too_many_arguments)]
pub fn build_ssop(
    net: &Network,
    red: &ReducedNetwork,
    dmg: &ActiveDamage,
    gamma0: &[bool],
    gamma_target: &[bool],
    steps: usize,
    voltages_sq_pu: &[Option<[f64; 3]>],
    scenario: &DamageScenario,
    costs: &CostParams,
) -> Result<SsopBuild, MilpError> {
    debug_assert_eq!(gamma0.len(), red.edges.len());
    debug_assert_eq!(gamma_target.len(), red.edges.len());
    let nb = red.blocks.len();
    let ne = red.edges.len();
    let s_base_kva = net.base_kva / 3.0;
    let sqrt_un = sqrt_un_table(red, voltages_sq_pu);
    let has_operators = scenario.crews.iter().any(|c| c.kind == CrewKind::Operator);
    let init = propagate(red, gamma0, dmg);

    // Devices that can never move: fuses, self-loops, manual switches with
    // no operator, and damaged lines that start open (they may never close).
    let frozen: Vec<bool> = red
        .edges
        .iter()
        .enumerate()
        .map(|(ei, e)| {
            e.class == SwitchClass::Fuse
                || e.from_block == e.to_block
                || (!e.remote && !has_operators)
                || (dmg.edge_damaged[ei] && !gamma0[ei])
        })
        .collect();
    // Supply ends of the fictitious damage-reach flow: blocks with internal
    // damage, and the from side of every damaged switch line, which counts
    // as damage-connected regardless of the switch state.
    let fault_supply: Vec<bool> = (0..nb)
        .map(|b| {
            dmg.block_faulted[b]
                || red
                    .edges
                    .iter()
                    .enumerate()
                    .any(|(ei, e)| dmg.edge_damaged[ei] && e.from_block == b)
        })
        .collect();

    let mut model = MilpModel::new("step-sequencing");

    // Switch states.
    let mut u: Vec<Vec<VarId>> = Vec::with_capacity(steps + 1);
    for s in 0..=steps {
        let mut row = Vec::with_capacity(ne);
        for (ei, e) in red.edges.iter().enumerate() {
            let var = model.add_binary(format!("u_{s}_{}", e.line_id), 0.0);
            let fix = if s == 0 || frozen[ei] {
                Some(gamma0[ei])
            } else if s == steps {
                Some(gamma_target[ei])
            } else {
                None
            };
            match fix {
                Some(v) => {
                    let v = if v { 1.0 } else { 0.0 };
                    model.set_bounds(var, v, v);
                }
                None => model.set_priority(var, 1),
            }
            row.push(var);
        }
        u.push(row);
    }
    // Damaged lines only ever open.
    for s in 1..=steps {
        for (ei, e) in red.edges.iter().enumerate() {
            if dmg.edge_damaged[ei] && !frozen[ei] {
                model.add_con(
                    format!("dmg_open_{s}_{}", e.line_id),
                    [(u[s][ei], 1.0), (u[s - 1][ei], -1.0)],
                    Sense::Le,
                    0.0,
                );
            }
        }
    }

    // Operation indicators, pinned exactly to |Δu| by four rows each; they
    // stay continuous because the pin forces integrality.
    let mut gamma: Vec<Vec<Option<VarId>>> = Vec::with_capacity(steps);
    for s in 1..=steps {
        let mut row = Vec::with_capacity(ne);
        for (ei, e) in red.edges.iter().enumerate() {
            if frozen[ei] {
                row.push(None);
                continue;
            }
            let g = model.add_continuous(
                format!("g_{s}_{}", e.line_id),
                0.0,
                1.0,
                costs.rho_switch_for(e.class),
            );
            let us = u[s][ei];
            let up = u[s - 1][ei];
            model.add_con(
                format!("g_up_{s}_{}", e.line_id),
                [(g, 1.0), (us, -1.0), (up, 1.0)],
                Sense::Ge,
                0.0,
            );
            model.add_con(
                format!("g_dn_{s}_{}", e.line_id),
                [(g, 1.0), (us, 1.0), (up, -1.0)],
                Sense::Ge,
                0.0,
            );
            model.add_con(
                format!("g_lo_{s}_{}", e.line_id),
                [(g, 1.0), (us, -1.0), (up, -1.0)],
                Sense::Le,
                0.0,
            );
            model.add_con(
                format!("g_hi_{s}_{}", e.line_id),
                [(g, 1.0), (us, 1.0), (up, 1.0)],
                Sense::Le,
                2.0,
            );
            row.push(Some(g));
        }
        gamma.push(row);
    }

    // One operation per step; no idle step before the last operation; each
    // manual device is driven to at most once.
    for s in 1..=steps {
        let terms: Vec<(VarId, f64)> = gamma[s - 1]
            .iter()
            .filter_map(|g| g.map(|g| (g, 1.0)))
            .collect();
        if terms.is_empty() {
            continue;
        }
        model.add_con(format!("one_op_{s}"), terms.clone(), Sense::Le, 1.0);
        if s > 1 {
            let mut taper = terms;
            taper.extend(
                gamma[s - 2]
                    .iter()
                    .filter_map(|g| g.map(|g| (g, -1.0))),
            );
            model.add_con(format!("frontload_{s}"), taper, Sense::Le, 0.0);
        }
    }
    for (ei, e) in red.edges.iter().enumerate() {
        if frozen[ei] || e.remote {
            continue;
        }
        let terms: Vec<(VarId, f64)> = gamma
            .iter()
            .filter_map(|row| row[ei].map(|g| (g, 1.0)))
            .collect();
        model.add_con(format!("one_visit_{}", e.line_id), terms, Sense::Le, 1.0);
    }

    // Energization, damage reach, and serving per step. Step 0 is fixed to
    // the propagated initial state; every row still covers it uniformly.
    let mut xe: Vec<Vec<VarId>> = Vec::with_capacity(steps + 1);
    let mut xf: Vec<Vec<VarId>> = Vec::with_capacity(steps + 1);
    let mut y: Vec<Vec<VarId>> = Vec::with_capacity(steps + 1);
    for s in 0..=steps {
        let mut xer = Vec::with_capacity(nb);
        let mut xfr = Vec::with_capacity(nb);
        let mut yr = Vec::with_capacity(nb);
        for (b, blk) in red.blocks.iter().enumerate() {
            let xeb = model.add_continuous(format!("xe_{s}_{}", blk.id), 0.0, 1.0, 0.0);
            let xfb = model.add_continuous(format!("xf_{s}_{}", blk.id), 0.0, 1.0, 0.0);
            let load_obj = if s == 0 {
                0.0
            } else {
                -costs.rho_load * blk.weighted_load_kw
            };
            let yb = model.add_continuous(format!("y_{s}_{}", blk.id), 0.0, 1.0, load_obj);
            if blk.is_source() {
                model.set_bounds(xeb, 1.0, 1.0);
            }
            if fault_supply[b] {
                model.set_bounds(xfb, 1.0, 1.0);
            }
            if s == 0 {
                let fix = |m: &mut MilpModel, var: VarId, v: bool| {
                    let v = if v { 1.0 } else { 0.0 };
                    m.set_bounds(var, v, v);
                };
                fix(&mut model, xeb, init.energized[b]);
                fix(&mut model, xfb, init.fault_reach[b]);
                fix(&mut model, yb, init.served[b]);
            } else {
                model.add_con(
                    format!("cold_fault_{s}_{}", blk.id),
                    [(xeb, 1.0), (xfb, 1.0)],
                    Sense::Le,
                    1.0,
                );
            }
            model.add_con(
                format!("serve_e_{s}_{}", blk.id),
                [(yb, 1.0), (xeb, -1.0)],
                Sense::Le,
                0.0,
            );
            model.add_con(
                format!("serve_f_{s}_{}", blk.id),
                [(yb, 1.0), (xfb, 1.0)],
                Sense::Le,
                1.0,
            );
            model.add_con(
                format!("serve_x_{s}_{}", blk.id),
                [(yb, 1.0), (xeb, -1.0), (xfb, 1.0)],
                Sense::Ge,
                0.0,
            );
            xer.push(xeb);
            xfr.push(xfb);
            yr.push(yb);
        }
        xe.push(xer);
        xf.push(xfr);
        y.push(yr);
    }

    // Closed switches equalize both flags across their ends; fictitious
    // unit-demand flows from the supply blocks keep the flags honest on the
    // disconnected side (a flag can only be 1 with a live path to supply).
    let flow_cap = nb as f64;
    for s in 0..=steps {
        for (fam, xs) in [("e", &xe[s]), ("f", &xf[s])] {
            let is_supply = |b: usize| -> bool {
                if fam == "e" {
                    red.blocks[b].is_source()
                } else {
                    fault_supply[b]
                }
            };
            let mut fvars: Vec<Option<VarId>> = Vec::with_capacity(ne);
            for (ei, e) in red.edges.iter().enumerate() {
                if e.from_block == e.to_block {
                    fvars.push(None);
                    continue;
                }
                let f = model.add_continuous(
                    format!("f{fam}_{s}_{}", e.line_id),
                    -flow_cap,
                    flow_cap,
                    0.0,
                );
                model.add_con(
                    format!("f{fam}_hi_{s}_{}", e.line_id),
                    [(f, 1.0), (u[s][ei], -flow_cap)],
                    Sense::Le,
                    0.0,
                );
                model.add_con(
                    format!("f{fam}_lo_{s}_{}", e.line_id),
                    [(f, 1.0), (u[s][ei], flow_cap)],
                    Sense::Ge,
                    0.0,
                );
                // Closed edges equalize the flag; open edges decouple it.
                for (tag, a, b2) in [
                    ("fw", e.from_block, e.to_block),
                    ("bw", e.to_block, e.from_block),
                ] {
                    model.add_con(
                        format!("x{fam}_prop_{tag}_{s}_{}", e.line_id),
                        [(xs[a], 1.0), (xs[b2], -1.0), (u[s][ei], 1.0)],
                        Sense::Le,
                        1.0,
                    );
                }
                fvars.push(Some(f));
            }
            for (b, blk) in red.blocks.iter().enumerate() {
                if is_supply(b) {
                    continue;
                }
                let mut terms = vec![(xs[b], -1.0)];
                for (ei, e) in red.edges.iter().enumerate() {
                    let Some(f) = fvars[ei] else { continue };
                    if e.to_block == b {
                        terms.push((f, 1.0));
                    }
                    if e.from_block == b {
                        terms.push((f, -1.0));
                    }
                }
                model.add_con(
                    format!("x{fam}_bal_{s}_{}", blk.id),
                    terms,
                    Sense::Eq,
                    0.0,
                );
            }
        }
    }

    // Sectionalizers may only operate with both ends de-energized before the
    // step; load-break switches must not bridge an energized end and a
    // damage-connected end when they operate.
    for s in 1..=steps {
        for (ei, e) in red.edges.iter().enumerate() {
            let Some(g) = gamma[s - 1][ei] else { continue };
            match e.class {
                SwitchClass::Sec => {
                    for (tag, b) in [("from", e.from_block), ("to", e.to_block)] {
                        model.add_con(
                            format!("sec_dead_{tag}_{s}_{}", e.line_id),
                            [(g, 1.0), (xe[s - 1][b], 1.0)],
                            Sense::Le,
                            1.0,
                        );
                    }
                }
                SwitchClass::Lbs => {
                    for (tag, be, bf) in [
                        ("fw", e.from_block, e.to_block),
                        ("bw", e.to_block, e.from_block),
                    ] {
                        model.add_con(
                            format!("lbs_fault_{tag}_{s}_{}", e.line_id),
                            [(g, 1.0), (xe[s - 1][be], 1.0), (xf[s - 1][bf], 1.0)],
                            Sense::Le,
                            2.0,
                        );
                    }
                }
                _ => {}
            }
        }
    }

    // Per-phase power flows, pu on the per-phase base; loads draw only when
    // served, sources inject within their ratings.
    let mut pq: Vec<Vec<[Option<(VarId, VarId)>; 3]>> = Vec::with_capacity(steps + 1);
    let m_cur = 2.0 * big_m_for(BigMFamily::CurrentCapacity, net, None);
    for s in 0..=steps {
        let mut step_pq = Vec::with_capacity(ne);
        for (ei, e) in red.edges.iter().enumerate() {
            let line = &net.lines[e.line];
            let cap_pu = line.capacity_kva / s_base_kva;
            let mut phases: [Option<(VarId, VarId)>; 3] = [None; 3];
            if e.from_block == e.to_block {
                step_pq.push(phases);
                continue;
            }
            for ph in line.phases.iter() {
                let p = model.add_continuous(
                    format!("p_{s}_{}_{}", e.line_id, ph.letter()),
                    -cap_pu,
                    cap_pu,
                    0.0,
                );
                let q = model.add_continuous(
                    format!("q_{s}_{}_{}", e.line_id, ph.letter()),
                    -cap_pu,
                    cap_pu,
                    0.0,
                );
                for (var, tag) in [(p, 'p'), (q, 'q')] {
                    model.add_con(
                        format!("cap_{tag}hi_{s}_{}_{}", e.line_id, ph.letter()),
                        [(var, 1.0), (u[s][ei], -cap_pu)],
                        Sense::Le,
                        0.0,
                    );
                    model.add_con(
                        format!("cap_{tag}lo_{s}_{}_{}", e.line_id, ph.letter()),
                        [(var, 1.0), (u[s][ei], cap_pu)],
                        Sense::Ge,
                        0.0,
                    );
                }
                for (m, (a, b, r)) in linearize_circle(cap_pu, costs.circle_segments)?
                    .into_iter()
                    .enumerate()
                {
                    if a.abs() < 1e-9 || b.abs() < 1e-9 {
                        continue; // the box rows already cover the axes
                    }
                    model.add_con(
                        format!("cap_poly{m}_{s}_{}_{}", e.line_id, ph.letter()),
                        [(p, a), (q, b)],
                        Sense::Le,
                        r,
                    );
                }
                phases[ph.index()] = Some((p, q));
            }
            step_pq.push(phases);
        }
        pq.push(step_pq);
    }
    let mut gen: Vec<Vec<Option<[(VarId, VarId); 3]>>> = Vec::with_capacity(steps + 1);
    for s in 0..=steps {
        let mut grow = Vec::with_capacity(nb);
        for blk in red.blocks.iter() {
            let (Some(pmax), Some(qmax)) = (blk.source_p_max_kw, blk.source_q_max_kvar) else {
                grow.push(None);
                continue;
            };
            let mut gb = [(VarId(0), VarId(0)); 3];
            for ph in Phase::ALL {
                let p = model.add_continuous(
                    format!("srcp_{s}_{}_{}", blk.id, ph.letter()),
                    0.0,
                    pmax[ph.index()] / s_base_kva,
                    0.0,
                );
                let q = model.add_continuous(
                    format!("srcq_{s}_{}_{}", blk.id, ph.letter()),
                    0.0,
                    qmax[ph.index()] / s_base_kva,
                    0.0,
                );
                gb[ph.index()] = (p, q);
            }
            grow.push(Some(gb));
        }
        gen.push(grow);
    }
    for s in 0..=steps {
        for (b, blk) in red.blocks.iter().enumerate() {
            for ph in Phase::ALL {
                let i = ph.index();
                let mut pterms = Vec::new();
                let mut qterms = Vec::new();
                for (ei, e) in red.edges.iter().enumerate() {
                    if e.from_block == e.to_block {
                        continue;
                    }
                    let Some((p, q)) = pq[s][ei][i] else { continue };
                    if e.to_block == b {
                        pterms.push((p, 1.0));
                        qterms.push((q, 1.0));
                    }
                    if e.from_block == b {
                        pterms.push((p, -1.0));
                        qterms.push((q, -1.0));
                    }
                }
                if let Some(gb) = gen[s][b] {
                    pterms.push((gb[i].0, 1.0));
                    qterms.push((gb[i].1, 1.0));
                }
                pterms.push((y[s][b], -blk.load_kw[i] / s_base_kva));
                qterms.push((y[s][b], -blk.load_kvar[i] / s_base_kva));
                model.add_con(
                    format!("pbal_{s}_{}_{}", blk.id, ph.letter()),
                    pterms,
                    Sense::Eq,
                    0.0,
                );
                model.add_con(
                    format!("qbal_{s}_{}_{}", blk.id, ph.letter()),
                    qterms,
                    Sense::Eq,
                    0.0,
                );
            }
        }
    }

    // Breaking and making current at the operating step, at the voltage the
    // target topology predicts for the device's location. Sectionalizers
    // operate dead and fuses never move, so neither needs a row.
    for (ei, e) in red.edges.iter().enumerate() {
        if frozen[ei]
            || e.from_block == e.to_block
            || !matches!(
                e.class,
                SwitchClass::Cb | SwitchClass::Rec | SwitchClass::Lbs
            )
        {
            continue;
        }
        let line = &net.lines[e.line];
        let Some(sw) = line.switch.as_ref() else { continue };
        for s in 1..=steps {
            for ph in line.phases.iter() {
                let i = ph.index();
                let r_break =
                    sqrt_un[ei][i] * net.amps_to_kva(sw.breaking_amps) / s_base_kva;
                let r_make = sqrt_un[ei][i] * net.amps_to_kva(sw.making_amps) / s_base_kva;
                let Some((p_pre, q_pre)) = pq[s - 1][ei][i] else { continue };
                let Some((p_post, q_post)) = pq[s][ei][i] else { continue };
                for (m, (a, b, r)) in linearize_circle(r_break, costs.circle_segments)?
                    .into_iter()
                    .enumerate()
                {
                    model.add_con(
                        format!("brk{m}_{s}_{}_{}", e.line_id, ph.letter()),
                        [
                            (p_pre, a),
                            (q_pre, b),
                            (u[s - 1][ei], m_cur),
                            (u[s][ei], -m_cur),
                        ],
                        Sense::Le,
                        r + m_cur,
                    );
                }
                if dmg.edge_damaged[ei] {
                    continue; // damaged lines never close, so no making rows
                }
                for (m, (a, b, r)) in linearize_circle(r_make, costs.circle_segments)?
                    .into_iter()
                    .enumerate()
                {
                    model.add_con(
                        format!("mk{m}_{s}_{}_{}", e.line_id, ph.letter()),
                        [
                            (p_post, a),
                            (q_post, b),
                            (u[s][ei], m_cur),
                            (u[s - 1][ei], -m_cur),
                        ],
                        Sense::Le,
                        r + m_cur,
                    );
                }
            }
        }
    }

    // Completion clock: remote operations take their operation time after
    // the previous step; manual operations wait for a crew, scheduled by the
    // routing block below.
    let m_t = big_m_for(BigMFamily::Timing, net, Some(scenario));
    let mut o_step = Vec::with_capacity(steps);
    for s in 1..=steps {
        let o = model.add_continuous(format!("o_{s}"), 0.0, m_t, costs.rho_time);
        o_step.push(o);
    }
    for s in 1..=steps {
        let mut terms = vec![(o_step[s - 1], 1.0)];
        if s > 1 {
            terms.push((o_step[s - 2], -1.0));
        }
        for (ei, e) in red.edges.iter().enumerate() {
            if !e.remote {
                continue;
            }
            if let Some(g) = gamma[s - 1][ei] {
                let t_op = net.lines[e.line]
                    .switch
                    .as_ref()
                    .map(|sw| sw.op_time(costs))
                    .unwrap_or(0.0);
                terms.push((g, -t_op));
            }
        }
        model.add_con(format!("clock_{s}"), terms, Sense::Ge, 0.0);
    }

    // Crew routing over manual devices: every crew leaves and re-enters the
    // depot once (a depot self-loop when idle), visits chain by driving
    // time, and a device is visited exactly as often as it is operated.
    let devices: Vec<usize> = (0..ne)
        .filter(|&ei| !frozen[ei] && !red.edges[ei].remote)
        .collect();
    if !devices.is_empty() {
        let operators: Vec<&str> = scenario
            .crews
            .iter()
            .filter(|c| c.kind == CrewKind::Operator)
            .map(|c| c.id.as_str())
            .collect();
        let depot = scenario.depot_key().to_string();
        let node_key = |n: usize| -> String {
            if n == 0 {
                depot.clone()
            } else {
                switch_key(&red.edges[devices[n - 1]].line_id)
            }
        };
        let nn = devices.len() + 1;
        let mut arrive = Vec::with_capacity(devices.len());
        let mut wait = Vec::with_capacity(devices.len());
        for &ei in &devices {
            let id = &red.edges[ei].line_id;
            arrive.push(model.add_continuous(format!("al_{id}"), 0.0, m_t, 0.0));
            wait.push(model.add_continuous(
                format!("w_{id}"),
                0.0,
                costs.max_wait_min,
                0.0,
            ));
        }
        let mut arcs: Vec<Vec<Vec<Option<VarId>>>> =
            vec![vec![vec![None; nn]; nn]; operators.len()];
        for (c, crew) in operators.iter().enumerate() {
            for k in 0..nn {
                for l in 0..nn {
                    if k == l && k != 0 {
                        continue;
                    }
                    if scenario.travel(&node_key(k), &node_key(l)).is_none() {
                        continue;
                    }
                    arcs[c][k][l] =
                        Some(model.add_binary(format!("tr_{crew}_{k}_{l}"), 0.0));
                }
            }
            let leave: Vec<(VarId, f64)> = (0..nn)
                .filter_map(|l| arcs[c][0][l].map(|v| (v, 1.0)))
                .collect();
            model.add_con(format!("leave_{crew}"), leave, Sense::Eq, 1.0);
            let back: Vec<(VarId, f64)> = (0..nn)
                .filter_map(|k| arcs[c][k][0].map(|v| (v, 1.0)))
                .collect();
            model.add_con(format!("return_{crew}"), back, Sense::Eq, 1.0);
            for l in 1..nn {
                let mut terms: Vec<(VarId, f64)> = (0..nn)
                    .filter_map(|k| arcs[c][k][l].map(|v| (v, 1.0)))
                    .collect();
                terms.extend((0..nn).filter_map(|m| arcs[c][l][m].map(|v| (v, -1.0))));
                model.add_con(
                    format!("chain_{crew}_{l}"),
                    terms,
                    Sense::Eq,
                    0.0,
                );
            }
        }
        for (d, &ei) in devices.iter().enumerate() {
            let l = d + 1;
            let mut terms: Vec<(VarId, f64)> = Vec::new();
            for c in 0..operators.len() {
                terms.extend((0..nn).filter_map(|k| arcs[c][k][l].map(|v| (v, 1.0))));
            }
            terms.extend(
                gamma
                    .iter()
                    .filter_map(|row| row[ei].map(|g| (g, -1.0))),
            );
            model.add_con(
                format!("visit_{}", red.edges[ei].line_id),
                terms,
                Sense::Eq,
                0.0,
            );
        }
        // Arrival chaining along used arcs; departures add wait and the
        // operation time, the depot departs at time zero.
        for l in 1..nn {
            let d_l = l - 1;
            for k in 0..nn {
                if k == l {
                    continue;
                }
                let Some(travel) = scenario.travel(&node_key(k), &node_key(l)) else {
                    continue;
                };
                let used: Vec<VarId> =
                    (0..operators.len()).filter_map(|c| arcs[c][k][l]).collect();
                if used.is_empty() {
                    continue;
                }
                let t_k = if k == 0 {
                    0.0
                } else {
                    let e = &red.edges[devices[k - 1]];
                    net.lines[e.line]
                        .switch
                        .as_ref()
                        .map(|sw| sw.op_time(costs))
                        .unwrap_or(0.0)
                };
                let mut hi = vec![(arrive[d_l], 1.0)];
                let mut lo = vec![(arrive[d_l], 1.0)];
                if k != 0 {
                    for terms in [&mut hi, &mut lo] {
                        terms.push((arrive[k - 1], -1.0));
                        terms.push((wait[k - 1], -1.0));
                    }
                }
                for &x in &used {
                    hi.push((x, m_t));
                    lo.push((x, -m_t));
                }
                model.add_con(
                    format!("arr_hi_{k}_{l}"),
                    hi,
                    Sense::Le,
                    travel + t_k + m_t,
                );
                model.add_con(
                    format!("arr_lo_{k}_{l}"),
                    lo,
                    Sense::Ge,
                    travel + t_k - m_t,
                );
            }
        }
        // A manual operation completes at arrival + wait + operation time,
        // and may not start before the previous step completes.
        for (d, &ei) in devices.iter().enumerate() {
            let t_op = net.lines[red.edges[ei].line]
                .switch
                .as_ref()
                .map(|sw| sw.op_time(costs))
                .unwrap_or(0.0);
            for s in 1..=steps {
                let Some(g) = gamma[s - 1][ei] else { continue };
                model.add_con(
                    format!("man_done_{s}_{}", red.edges[ei].line_id),
                    [
                        (o_step[s - 1], 1.0),
                        (arrive[d], -1.0),
                        (wait[d], -1.0),
                        (g, -m_t),
                    ],
                    Sense::Ge,
                    t_op - m_t,
                );
                let mut start = vec![(arrive[d], 1.0), (wait[d], 1.0), (g, -m_t)];
                if s > 1 {
                    start.push((o_step[s - 2], -1.0));
                }
                model.add_con(
                    format!("man_start_{s}_{}", red.edges[ei].line_id),
                    start,
                    Sense::Ge,
                    -m_t,
                );
            }
        }
    }

    Ok(SsopBuild {
        model,
        steps,
        u,
        xe,
        xf,
        y,
        gamma,
        o_step,
    })
}

/// Solve the sequencing MILP and decode the answer into a plan, auditing it
/// against connectivity propagation bit for bit, re-deriving its timing with
/// the canonical crew schedule, and replaying it through the validator. Any
/// disagreement is an error, never silently patched.
#[allow(clippy::too_many_arguments)]
pub fn solve_ssop_model(
    net: &Network,
    red: &ReducedNetwork,
    dmg: &ActiveDamage,
    gamma0: &[bool],
    gamma_target: &[bool],
    steps: usize,
    voltages_sq_pu: &[Option<[f64; 3]>],
    scenario: &DamageScenario,
    costs: &CostParams,
    solver: &Solver,
) -> Result<SwitchingPlan, SsopError> {
    precheck(red, dmg, gamma0, gamma_target, steps, scenario, costs)?;
    if gamma0 == gamma_target {
        return assemble_plan(
            net,
            red,
            dmg,
            gamma0,
            &[],
            steps,
            scenario,
            costs,
            SolveStats {
                solver: "trivial".to_string(),
                ..SolveStats::default()
            },
        );
    }
    let build = build_ssop(
        net,
        red,
        dmg,
        gamma0,
        gamma_target,
        steps,
        voltages_sq_pu,
        scenario,
        costs,
    )?;
    let solver = match solver {
        Solver::Builtin(cfg) => {
            let need = build.model.num_binaries();
            Solver::Builtin(cfg.clone().with_max_binaries(cfg.max_binaries.max(need)))
        }
        other => other.clone(),
    };
    let sol = solver.solve(&build.model)?;
    decode_ssop(
        net,
        red,
        dmg,
        gamma0,
        gamma_target,
        voltages_sq_pu,
        scenario,
        costs,
        &build,
        &sol,
    )
}

#[allow(clippy::too_many_arguments)]
fn decode_ssop(
    net: &Network,
    red: &ReducedNetwork,
    dmg: &ActiveDamage,
    gamma0: &[bool],
    gamma_target: &[bool],
    voltages_sq_pu: &[Option<[f64; 3]>],
    scenario: &DamageScenario,
    costs: &CostParams,
    build: &SsopBuild,
    sol: &Solution,
) -> Result<SwitchingPlan, SsopError> {
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            return Err(SsopError::Infeasible {
                reason: "the sequencing constraints admit no operation order".to_string(),
            })
        }
        SolveStatus::Limit => return Err(SsopError::Limit),
        SolveStatus::Unbounded => {
            return Err(SsopError::Audit(
                "model reported unbounded, which a bounded formulation cannot be".to_string(),
            ))
        }
    }
    let ne = red.edges.len();
    let states: Vec<Vec<bool>> = build
        .u
        .iter()
        .map(|row| row.iter().map(|id| round_binary(sol.values[id.0])).collect())
        .collect();

    // Extract the operation sequence from the state trajectory.
    let mut seq: Vec<(usize, Action)> = Vec::new();
    let mut idle_seen = false;
    for s in 1..=build.steps {
        let changed: Vec<usize> = (0..ne)
            .filter(|&e| states[s][e] != states[s - 1][e])
            .collect();
        match changed.len() {
            0 => idle_seen = true,
            1 => {
                if idle_seen {
                    return Err(SsopError::Audit(format!(
                        "operation at step {s} follows an idle step"
                    )));
                }
                let e = changed[0];
                let action = if states[s][e] {
                    Action::Close
                } else {
                    Action::Open
                };
                seq.push((e, action));
            }
            n => {
                return Err(SsopError::Audit(format!(
                    "{n} switches change in step {s}"
                )))
            }
        }
    }

    // The model's energization story must match connectivity propagation
    // exactly, step by step and block by block.
    for s in 0..=build.steps {
        let prop = propagate(red, &states[s], dmg);
        let xe: Vec<bool> = build.xe[s]
            .iter()
            .map(|id| round_binary(sol.values[id.0]))
            .collect();
        let xf: Vec<bool> = build.xf[s]
            .iter()
            .map(|id| round_binary(sol.values[id.0]))
            .collect();
        let y: Vec<bool> = build.y[s]
            .iter()
            .map(|id| round_binary(sol.values[id.0]))
            .collect();
        if xe != prop.energized || xf != prop.fault_reach || y != prop.served {
            return Err(SsopError::Audit(format!(
                "step {s} energization flags disagree with connectivity propagation"
            )));
        }
    }

    let plan = assemble_plan(
        net,
        red,
        dmg,
        gamma0,
        &seq,
        build.steps,
        scenario,
        costs,
        sol.stats.clone(),
    )?;
    let canonical = -sol.objective;
    if (plan.objective - canonical).abs() > 1e-6 * (1.0 + canonical.abs()) {
        return Err(SsopError::Audit(format!(
            "decoded objective {} disagrees with the model value {}",
            plan.objective, canonical
        )));
    }
    let report = validate_plan(
        net,
        red,
        dmg,
        gamma0,
        gamma_target,
        &plan,
        voltages_sq_pu,
        scenario,
        costs,
    );
    if !report.is_clean() {
        return Err(SsopError::Audit(format!(
            "decoded plan fails validation: {report}"
        )));
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::milp::Solver;
    use crate::model::Crew;
    use crate::otp;
    use crate::reduction::reduce;
    use crate::rules::initial_closed_states;

    fn setup(
        net: &Network,
        scenario: &DamageScenario,
    ) -> (Network, ReducedNetwork, Vec<bool>, ActiveDamage) {
        let damaged = net.with_damage(scenario);
        let red = reduce(&damaged);
        let closed = initial_closed_states(&damaged, &red, scenario);
        let dmg = ActiveDamage::full(&red);
        (damaged, red, closed, dmg)
    }

    fn no_voltages(red: &ReducedNetwork) -> Vec<Option<[f64; 3]>> {
        vec![None; red.blocks.len()]
    }

    /// Target switch states: `base` with the listed line ids overridden.
    fn target_with(red: &ReducedNetwork, base: &[bool], changes: &[(&str, bool)]) -> Vec<bool> {
        let mut t = base.to_vec();
        for (id, closed) in changes {
            t[red.edge_by_line_id(id).expect(id)] = *closed;
        }
        t
    }

    fn op(id: &str, action: Action) -> SwitchOp {
        SwitchOp {
            line_id: id.to_string(),
            action,
        }
    }

    fn seq_of(plan: &SwitchingPlan) -> Vec<(u32, String, Action)> {
        plan.actions
            .iter()
            .map(|a| (a.step, a.line_id.clone(), a.action))
            .collect()
    }

    fn seq(entries: &[(u32, &str, Action)]) -> Vec<(u32, String, Action)> {
        entries.iter().map(|(s, id, a)| (*s, id.to_string(), *a)).collect()
    }

    /// The walkthrough instance: fault on 3-4 with the 2-3 recloser tripped,
    /// and the target that boxes the damage in and picks block {7} up over
    /// the normally open 6-7 tie while keeping 5-6 closed.
    fn walkthrough() -> (
        Network,
        ReducedNetwork,
        Vec<bool>,
        ActiveDamage,
        DamageScenario,
        Vec<bool>,
    ) {
        let net = fixtures::seven_bus();
        let scenario = fixtures::seven_bus_fault();
        let (damaged, red, gamma0, dmg) = setup(&net, &scenario);
        let target = target_with(
            &red,
            &gamma0,
            &[("2-3", true), ("3-4", false), ("4-7", false), ("6-7", true)],
        );
        (damaged, red, gamma0, dmg, scenario, target)
    }

    #[test]
    fn walkthrough_sequence_is_the_known_optimum() {
        let (net, red, gamma0, dmg, scenario, target) = walkthrough();
        let costs = CostParams::default();
        let volts = no_voltages(&red);
        let plan = solve_ssop(
            &net, &red, &dmg, &gamma0, &target, 8, &volts, &scenario, &costs,
        )
        .expect("solvable");
        // The tie close must happen dead, so the load-break switch at 5-6 is
        // opened and re-closed around it; everything restorable first.
        assert_eq!(
            seq_of(&plan),
            seq(&[
                (1, "3-4", Action::Open),
                (2, "2-3", Action::Close),
                (3, "4-7", Action::Open),
                (4, "5-6", Action::Open),
                (5, "6-7", Action::Close),
                (6, "5-6", Action::Close),
            ])
        );
        assert!(
            (plan.objective - 5759.07).abs() < 1e-9,
            "objective {}",
            plan.objective
        );
        assert_eq!(
            plan.elapsed_min,
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 6.0, 6.0]
        );
        assert_eq!(
            plan.served_kw,
            vec![540.0, 540.0, 720.0, 720.0, 540.0, 540.0, 900.0, 900.0, 900.0]
        );
        let report = validate_plan(
            &net, &red, &dmg, &gamma0, &target, &plan, &volts, &scenario, &costs,
        );
        assert!(report.is_clean(), "{report}");
    }

    #[test]
    fn restored_curve_collapses_equal_minutes() {
        let (net, red, gamma0, dmg, scenario, target) = walkthrough();
        let costs = CostParams::default();
        let volts = no_voltages(&red);
        let plan = solve_ssop(
            &net, &red, &dmg, &gamma0, &target, 8, &volts, &scenario, &costs,
        )
        .unwrap();
        let curve = restored_curve(&red, &plan);
        let want = [
            (0.0, 0.5),
            (1.0, 0.5),
            (2.0, 2.0 / 3.0),
            (3.0, 2.0 / 3.0),
            (4.0, 0.5),
            (5.0, 0.5),
            (6.0, 5.0 / 6.0),
        ];
        assert_eq!(curve.len(), want.len(), "{curve:?}");
        for ((m, f), (wm, wf)) in curve.iter().zip(want.iter()) {
            assert!(
                (m - wm).abs() < 1e-9 && (f - wf).abs() < 1e-9,
                "curve {curve:?}"
            );
        }
    }

    #[test]
    fn already_at_target_is_a_trivial_plan() {
        let (net, red, gamma0, dmg, scenario, _) = walkthrough();
        let costs = CostParams::default();
        let volts = no_voltages(&red);
        let plan = solve_ssop(
            &net, &red, &dmg, &gamma0, &gamma0, 4, &volts, &scenario, &costs,
        )
        .unwrap();
        assert!(plan.actions.is_empty());
        assert_eq!(plan.elapsed_min, vec![0.0; 5]);
        assert!(
            (plan.objective - 2160.0).abs() < 1e-9,
            "objective {}",
            plan.objective
        );
        let report = validate_plan(
            &net, &red, &dmg, &gamma0, &gamma0, &plan, &volts, &scenario, &costs,
        );
        assert!(report.is_clean(), "{report}");
    }

    #[test]
    fn five_steps_cannot_reach_the_walkthrough_target() {
        let (net, red, gamma0, dmg, scenario, target) = walkthrough();
        let costs = CostParams::default();
        let volts = no_voltages(&red);
        // Four switches differ, but the dead tie close forces two extra
        // operations on 5-6, and a fifth step can never be spent without
        // ending away from the target.
        let err = solve_ssop(
            &net, &red, &dmg, &gamma0, &target, 5, &volts, &scenario, &costs,
        )
        .unwrap_err();
        assert!(matches!(err, SsopError::Infeasible { .. }), "{err:?}");
    }

    #[test]
    fn six_step_horizon_trims_the_padding() {
        let (net, red, gamma0, dmg, scenario, target) = walkthrough();
        let costs = CostParams::default();
        let volts = no_voltages(&red);
        let plan = solve_ssop(
            &net, &red, &dmg, &gamma0, &target, 6, &volts, &scenario, &costs,
        )
        .unwrap();
        assert_eq!(plan.actions.len(), 6);
        assert!(
            (plan.objective - (3960.0 - 0.6 - 0.21)).abs() < 1e-9,
            "objective {}",
            plan.objective
        );
    }

    fn manual_walkthrough(
        travel_min: f64,
    ) -> (
        Network,
        ReducedNetwork,
        Vec<bool>,
        ActiveDamage,
        DamageScenario,
        Vec<bool>,
    ) {
        let mut net = fixtures::seven_bus();
        net.lines
            .iter_mut()
            .find(|l| l.id == "6-7")
            .unwrap()
            .switch
            .as_mut()
            .unwrap()
            .remote = false;
        let mut scenario = fixtures::seven_bus_fault();
        scenario.crews.push(Crew {
            id: "op-1".to_string(),
            kind: CrewKind::Operator,
        });
        scenario
            .travel_minutes
            .entry("depot".to_string())
            .or_default()
            .insert("switch:6-7".to_string(), travel_min);
        let (damaged, red, gamma0, dmg) = setup(&net, &scenario);
        let target = target_with(
            &red,
            &gamma0,
            &[("2-3", true), ("3-4", false), ("4-7", false), ("6-7", true)],
        );
        (damaged, red, gamma0, dmg, scenario, target)
    }

    #[test]
    fn manual_tie_waits_for_the_operator() {
        let (net, red, gamma0, dmg, scenario, target) = manual_walkthrough(10.0);
        let costs = CostParams::default();
        let volts = no_voltages(&red);
        let plan = solve_ssop(
            &net, &red, &dmg, &gamma0, &target, 6, &volts, &scenario, &costs,
        )
        .unwrap();
        // Same order as the all-remote case; step 5 is now a manual close
        // whose completion waits on the crew's 10-minute drive.
        let tie = &plan.actions[4];
        assert_eq!(
            (tie.step, tie.line_id.as_str(), tie.action),
            (5, "6-7", Action::Close)
        );
        assert_eq!(tie.operator.as_deref(), Some("op-1"));
        assert_eq!(tie.arrival_min, Some(10.0));
        assert_eq!(tie.wait_min, Some(0.0));
        assert_eq!(plan.elapsed_min, vec![0.0, 1.0, 2.0, 3.0, 4.0, 25.0, 26.0]);
        assert!(
            (plan.objective - (3960.0 - 0.6 - 0.61)).abs() < 1e-9,
            "objective {}",
            plan.objective
        );
        assert_eq!(
            plan.crew_routes.get("op-1").unwrap(),
            &vec!["depot".to_string(), "switch:6-7".to_string()]
        );
        let report = validate_plan(
            &net, &red, &dmg, &gamma0, &target, &plan, &volts, &scenario, &costs,
        );
        assert!(report.is_clean(), "{report}");
    }

    #[test]
    fn manual_tie_operator_waits_out_an_early_arrival() {
        let (net, red, gamma0, dmg, scenario, target) = manual_walkthrough(2.0);
        let costs = CostParams::default();
        let volts = no_voltages(&red);
        let plan = solve_ssop(
            &net, &red, &dmg, &gamma0, &target, 6, &volts, &scenario, &costs,
        )
        .unwrap();
        let tie = &plan.actions[4];
        assert_eq!(tie.arrival_min, Some(2.0));
        assert_eq!(tie.wait_min, Some(2.0));
        assert_eq!(plan.elapsed_min, vec![0.0, 1.0, 2.0, 3.0, 4.0, 19.0, 20.0]);
        assert!(
            (plan.objective - (3960.0 - 0.6 - 0.49)).abs() < 1e-9,
            "objective {}",
            plan.objective
        );
        let report = validate_plan(
            &net, &red, &dmg, &gamma0, &target, &plan, &volts, &scenario, &costs,
        );
        assert!(report.is_clean(), "{report}");
    }

    #[test]
    fn plans_roundtrip_through_json() {
        let (net, red, gamma0, dmg, scenario, target) = walkthrough();
        let costs = CostParams::default();
        let volts = no_voltages(&red);
        let plan = solve_ssop(
            &net, &red, &dmg, &gamma0, &target, 8, &volts, &scenario, &costs,
        )
        .unwrap();
        let text = serde_json::to_string_pretty(&plan).unwrap();
        let back: SwitchingPlan = serde_json::from_str(&text).unwrap();
        assert_eq!(seq_of(&back), seq_of(&plan));
        assert_eq!(back.per_step_states, plan.per_step_states);
        assert_eq!(back.per_step_served, plan.per_step_served);
        assert_eq!(back.served_kw, plan.served_kw);
        assert_eq!(back.elapsed_min, plan.elapsed_min);
        assert_eq!(back.crew_routes, plan.crew_routes);
        assert!((back.objective - plan.objective).abs() < 1e-12);
    }

    #[test]
    fn validator_flags_a_doubled_step() {
        let (net, red, gamma0, dmg, scenario, target) = walkthrough();
        let costs = CostParams::default();
        let volts = no_voltages(&red);
        let plan = solve_ssop(
            &net, &red, &dmg, &gamma0, &target, 8, &volts, &scenario, &costs,
        )
        .unwrap();
        let mut bad = plan.clone();
        bad.actions[1].step = 1;
        let report = validate_plan(
            &net, &red, &dmg, &gamma0, &target, &bad, &volts, &scenario, &costs,
        );
        assert!(
            report
                .violations
                .iter()
                .any(|v| matches!(v, PlanViolation::MultipleActions { step: 1, count: 2 })),
            "{report}"
        );
    }

    #[test]
    fn validator_flags_a_fuse_operation() {
        let mut net = fixtures::seven_bus();
        net.lines
            .iter_mut()
            .find(|l| l.id == "5-6")
            .unwrap()
            .switch
            .as_mut()
            .unwrap()
            .class = SwitchClass::Fuse;
        let scenario = fixtures::seven_bus_fault();
        let (damaged, red, gamma0, dmg) = setup(&net, &scenario);
        let target = target_with(&red, &gamma0, &[("5-6", false)]);
        let costs = CostParams::default();
        let plan = plan_from_ops(
            &damaged,
            &red,
            &dmg,
            &gamma0,
            &[op("5-6", Action::Open)],
            1,
            &scenario,
            &costs,
        )
        .unwrap();
        let report = validate_plan(
            &damaged,
            &red,
            &dmg,
            &gamma0,
            &target,
            &plan,
            &no_voltages(&red),
            &scenario,
            &costs,
        );
        assert_eq!(report.violations.len(), 1, "{report}");
        assert!(
            matches!(
                &report.violations[0],
                PlanViolation::Rule {
                    step: 1,
                    violation: RuleViolation::FuseOperated { .. }
                }
            ),
            "{report}"
        );
    }

    #[test]
    fn validator_flags_an_overloaded_opening() {
        // Rate the 5-6 switch far below the ~67 kVA per phase it carries.
        let mut net = fixtures::seven_bus();
        net.lines
            .iter_mut()
            .find(|l| l.id == "5-6")
            .unwrap()
            .switch
            .as_mut()
            .unwrap()
            .breaking_amps = 20.0;
        let scenario = fixtures::seven_bus_fault();
        let (damaged, red, gamma0, dmg) = setup(&net, &scenario);
        let target = target_with(&red, &gamma0, &[("5-6", false)]);
        let costs = CostParams::default();
        let plan = plan_from_ops(
            &damaged,
            &red,
            &dmg,
            &gamma0,
            &[op("5-6", Action::Open)],
            1,
            &scenario,
            &costs,
        )
        .unwrap();
        let report = validate_plan(
            &damaged,
            &red,
            &dmg,
            &gamma0,
            &target,
            &plan,
            &no_voltages(&red),
            &scenario,
            &costs,
        );
        assert_eq!(report.violations.len(), 1, "{report}");
        match &report.violations[0] {
            PlanViolation::BreakingCurrent {
                step: 1,
                line_id,
                kva,
                limit_kva,
                ..
            } => {
                assert_eq!(line_id, "5-6");
                assert!((kva - 67.082).abs() < 0.01, "kva {kva}");
                assert!((limit_kva - 48.035).abs() < 0.01, "limit {limit_kva}");
            }
            other => panic!("unexpected violation {other:?}"),
        }
    }

    #[test]
    fn validator_flags_an_overloaded_pickup() {
        let mut net = fixtures::seven_bus();
        net.lines
            .iter_mut()
            .find(|l| l.id == "5-6")
            .unwrap()
            .switch
            .as_mut()
            .unwrap()
            .making_amps = 20.0;
        let scenario = fixtures::seven_bus_fault();
        let (damaged, red, mut gamma0, dmg) = setup(&net, &scenario);
        // Start with 5-6 open; closing it picks block {6} up at ~67 kVA.
        let e56 = red.edge_by_line_id("5-6").unwrap();
        gamma0[e56] = false;
        let target = target_with(&red, &gamma0, &[("5-6", true)]);
        let costs = CostParams::default();
        let plan = plan_from_ops(
            &damaged,
            &red,
            &dmg,
            &gamma0,
            &[op("5-6", Action::Close)],
            1,
            &scenario,
            &costs,
        )
        .unwrap();
        let report = validate_plan(
            &damaged,
            &red,
            &dmg,
            &gamma0,
            &target,
            &plan,
            &no_voltages(&red),
            &scenario,
            &costs,
        );
        assert_eq!(report.violations.len(), 1, "{report}");
        assert!(
            matches!(
                &report.violations[0],
                PlanViolation::MakingCurrent { step: 1, line_id, .. } if line_id.as_str() == "5-6"
            ),
            "{report}"
        );
    }

    #[test]
    fn validator_flags_opening_under_fault_current() {
        // Without the recloser trip the faulted spine is still energized,
        // and a load-break switch must not be the device that clears it.
        let net = fixtures::seven_bus();
        let mut scenario = fixtures::seven_bus_fault();
        scenario.post_protection_states.clear();
        let (damaged, red, gamma0, dmg) = setup(&net, &scenario);
        let target = target_with(&red, &gamma0, &[("5-6", false)]);
        let costs = CostParams::default();
        let plan = plan_from_ops(
            &damaged,
            &red,
            &dmg,
            &gamma0,
            &[op("5-6", Action::Open)],
            1,
            &scenario,
            &costs,
        )
        .unwrap();
        let report = validate_plan(
            &damaged,
            &red,
            &dmg,
            &gamma0,
            &target,
            &plan,
            &no_voltages(&red),
            &scenario,
            &costs,
        );
        assert_eq!(report.violations.len(), 1, "{report}");
        assert!(
            matches!(
                &report.violations[0],
                PlanViolation::FaultBridge { step: 1, line_id } if line_id.as_str() == "5-6"
            ),
            "{report}"
        );
    }

    #[test]
    fn validator_flags_a_live_sectionalizer_close() {
        let (net, red, gamma0, dmg, scenario, _) = walkthrough();
        let costs = CostParams::default();
        let target = target_with(&red, &gamma0, &[("6-7", true)]);
        let plan = plan_from_ops(
            &net,
            &red,
            &dmg,
            &gamma0,
            &[op("6-7", Action::Close)],
            1,
            &scenario,
            &costs,
        )
        .unwrap();
        let report = validate_plan(
            &net,
            &red,
            &dmg,
            &gamma0,
            &target,
            &plan,
            &no_voltages(&red),
            &scenario,
            &costs,
        );
        assert_eq!(report.violations.len(), 1, "{report}");
        assert!(
            matches!(
                &report.violations[0],
                PlanViolation::Rule {
                    step: 1,
                    violation: RuleViolation::SectionalizerEnergized { .. }
                }
            ),
            "{report}"
        );
    }

    #[test]
    fn validator_flags_a_backwards_clock() {
        let (net, red, gamma0, dmg, scenario, target) = walkthrough();
        let costs = CostParams::default();
        let volts = no_voltages(&red);
        let plan = solve_ssop(
            &net, &red, &dmg, &gamma0, &target, 8, &volts, &scenario, &costs,
        )
        .unwrap();
        let mut bad = plan.clone();
        bad.elapsed_min[3] = 0.5;
        bad.actions[2].elapsed_min = 0.5;
        let report = validate_plan(
            &net, &red, &dmg, &gamma0, &target, &bad, &volts, &scenario, &costs,
        );
        assert!(!report.is_clean());
        assert!(
            report
                .violations
                .iter()
                .all(|v| matches!(v, PlanViolation::Timing { step: 3, .. })),
            "{report}"
        );
        assert!(
            report.violations.iter().any(|v| matches!(
                v,
                PlanViolation::Timing { detail, .. } if detail.contains("backwards")
            )),
            "{report}"
        );
    }

    #[test]
    fn validator_flags_wrong_bookkeeping() {
        let (net, red, gamma0, dmg, scenario, target) = walkthrough();
        let costs = CostParams::default();
        let volts = no_voltages(&red);
        let plan = solve_ssop(
            &net, &red, &dmg, &gamma0, &target, 8, &volts, &scenario, &costs,
        )
        .unwrap();
        let mut bad = plan.clone();
        bad.served_kw[2] += 50.0;
        let report = validate_plan(
            &net, &red, &dmg, &gamma0, &target, &bad, &volts, &scenario, &costs,
        );
        assert_eq!(report.violations.len(), 1, "{report}");
        assert!(
            matches!(
                &report.violations[0],
                PlanViolation::Inconsistent { step: 2, detail } if detail.contains("served")
            ),
            "{report}"
        );
    }

    #[test]
    fn validator_flags_a_wrong_final_state() {
        let (net, red, gamma0, dmg, scenario, target) = walkthrough();
        let costs = CostParams::default();
        let volts = no_voltages(&red);
        let plan = solve_ssop(
            &net, &red, &dmg, &gamma0, &target, 8, &volts, &scenario, &costs,
        )
        .unwrap();
        // Drop the final re-close of 5-6: everything is legal but the plan
        // no longer ends in the target configuration.
        let ops: Vec<SwitchOp> = plan.actions[..5].iter().map(|a| a.op()).collect();
        let short = plan_from_ops(&net, &red, &dmg, &gamma0, &ops, 8, &scenario, &costs).unwrap();
        let report = validate_plan(
            &net, &red, &dmg, &gamma0, &target, &short, &volts, &scenario, &costs,
        );
        assert_eq!(report.violations.len(), 1, "{report}");
        assert!(
            matches!(
                &report.violations[0],
                PlanViolation::FinalState {
                    line_id,
                    expected_closed: true,
                    found_closed: false,
                } if line_id.as_str() == "5-6"
            ),
            "{report}"
        );
    }

    #[test]
    fn prechecks_reject_malformed_requests() {
        let (net, red, gamma0, dmg, scenario, target) = walkthrough();
        let costs = CostParams::default();
        let volts = no_voltages(&red);
        // Horizon shorter than the number of differing switches.
        let err = solve_ssop(
            &net, &red, &dmg, &gamma0, &target, 3, &volts, &scenario, &costs,
        )
        .unwrap_err();
        assert!(matches!(err, SsopError::Infeasible { .. }), "{err:?}");
        // A fuse cannot be switched to a different target state.
        {
            let mut net2 = fixtures::seven_bus();
            net2.lines
                .iter_mut()
                .find(|l| l.id == "5-6")
                .unwrap()
                .switch
                .as_mut()
                .unwrap()
                .class = SwitchClass::Fuse;
            let (damaged, red2, g0, dmg2) = setup(&net2, &scenario);
            let t = target_with(&red2, &g0, &[("5-6", false)]);
            let err = solve_ssop(
                &damaged,
                &red2,
                &dmg2,
                &g0,
                &t,
                8,
                &no_voltages(&red2),
                &scenario,
                &costs,
            )
            .unwrap_err();
            assert!(matches!(err, SsopError::Infeasible { .. }), "{err:?}");
        }
        // A manual switch with no operator crew cannot move.
        {
            let mut net2 = fixtures::seven_bus();
            net2.lines
                .iter_mut()
                .find(|l| l.id == "6-7")
                .unwrap()
                .switch
                .as_mut()
                .unwrap()
                .remote = false;
            let (damaged, red2, g0, dmg2) = setup(&net2, &scenario);
            let t = target_with(
                &red2,
                &g0,
                &[("2-3", true), ("3-4", false), ("4-7", false), ("6-7", true)],
            );
            let err = solve_ssop(
                &damaged,
                &red2,
                &dmg2,
                &g0,
                &t,
                8,
                &no_voltages(&red2),
                &scenario,
                &costs,
            )
            .unwrap_err();
            assert!(matches!(err, SsopError::Infeasible { .. }), "{err:?}");
        }
        // A damaged line that protection already opened cannot close again.
        {
            let net2 = fixtures::seven_bus();
            let mut scenario2 = fixtures::seven_bus_fault();
            scenario2
                .post_protection_states
                .insert("3-4".to_string(), false);
            let (damaged, red2, g0, dmg2) = setup(&net2, &scenario2);
            let t = target_with(&red2, &g0, &[("3-4", true)]);
            let err = solve_ssop(
                &damaged,
                &red2,
                &dmg2,
                &g0,
                &t,
                8,
                &no_voltages(&red2),
                &scenario2,
                &costs,
            )
            .unwrap_err();
            assert!(matches!(err, SsopError::Infeasible { .. }), "{err:?}");
        }
        // Negative weights are rejected outright.
        {
            let bad_costs = CostParams {
                rho_load: -1.0,
                ..CostParams::default()
            };
            let err = solve_ssop(
                &net, &red, &dmg, &gamma0, &target, 8, &volts, &scenario, &bad_costs,
            )
            .unwrap_err();
            assert!(matches!(err, SsopError::Infeasible { .. }), "{err:?}");
        }
    }

    #[test]
    fn triangle_model_and_search_agree() {
        let net = fixtures::mini_triangle();
        let scenario = fixtures::mini_triangle_fault();
        let (damaged, red, gamma0, dmg) = setup(&net, &scenario);
        let target = target_with(&red, &gamma0, &[("1-3", true), ("2-3", false)]);
        let costs = CostParams::default();
        let volts = no_voltages(&red);
        let plan = solve_ssop(
            &damaged, &red, &dmg, &gamma0, &target, 3, &volts, &scenario, &costs,
        )
        .expect("search route");
        // The sectionalizer must open before the backfeed recloser closes,
        // or the close would energize the damaged block.
        assert_eq!(
            seq_of(&plan),
            seq(&[(1, "2-3", Action::Open), (2, "1-3", Action::Close)])
        );
        assert!(
            (plan.objective - 299.75).abs() < 1e-9,
            "objective {}",
            plan.objective
        );
        let milp = solve_ssop_model(
            &damaged,
            &red,
            &dmg,
            &gamma0,
            &target,
            3,
            &volts,
            &scenario,
            &costs,
            &Solver::default(),
        )
        .expect("model route");
        assert_eq!(seq_of(&milp), seq_of(&plan));
        assert!(
            (milp.objective - plan.objective).abs() < 1e-6,
            "search {} vs model {}",
            plan.objective,
            milp.objective
        );
    }

    #[test]
    fn walkthrough_model_and_search_agree() {
        let (net, red, gamma0, dmg, scenario, target) = walkthrough();
        let costs = CostParams::default();
        let volts = no_voltages(&red);
        let plan = solve_ssop(
            &net, &red, &dmg, &gamma0, &target, 6, &volts, &scenario, &costs,
        )
        .unwrap();
        let milp = solve_ssop_model(
            &net,
            &red,
            &dmg,
            &gamma0,
            &target,
            6,
            &volts,
            &scenario,
            &costs,
            &Solver::default(),
        )
        .expect("model route");
        assert_eq!(seq_of(&milp), seq_of(&plan));
        assert!(
            (milp.objective - plan.objective).abs() < 1e-6,
            "search {} vs model {}",
            plan.objective,
            milp.objective
        );
    }

    #[test]
    fn large_feeder_sequence_reaches_the_chosen_target() {
        let net = fixtures::ieee123();
        let scenario = fixtures::test1_fault();
        let (damaged, red, gamma0, dmg) = setup(&net, &scenario);
        let costs = CostParams::default();
        let chosen = otp::solve_otp(
            &damaged,
            &red,
            &gamma0,
            &dmg,
            &costs,
            &Solver::default(),
        )
        .expect("target configuration");
        let steps = otp::estimate_steps(&chosen.ops, &red, &costs) as usize;
        let volts = no_voltages(&red);
        let plan = solve_ssop(
            &damaged,
            &red,
            &dmg,
            &gamma0,
            &chosen.closed,
            steps,
            &volts,
            &scenario,
            &costs,
        )
        .expect("sequence");
        assert!(!plan.actions.is_empty());
        assert!(plan.actions.len() <= steps);
        // The sequence ends serving exactly what the target serves.
        assert!(
            (plan.served_kw.last().unwrap() - chosen.served_kw).abs() < 1e-6,
            "sequence ends at {} kW, target serves {}",
            plan.served_kw.last().unwrap(),
            chosen.served_kw
        );
        let report = validate_plan(
            &damaged,
            &red,
            &dmg,
            &gamma0,
            &chosen.closed,
            &plan,
            &volts,
            &scenario,
            &costs,
        );
        assert!(report.is_clean(), "{report}");
    }
}
