//! Target-configuration optimization: pick the switch states that isolate
//! all active damage and restore as much load as possible over a radial
//! topology, before worrying about the order of operations.
//!
//! The model works on the reduced network. Per block there is an
//! energization indicator, per switchable line a closed/open decision.
//! Energization must be uniform across closed edges and is backed by a
//! fictitious single-commodity flow so it cannot be claimed without a path
//! to a substation. A parent-orientation assignment keeps every component
//! that contains a substation cycle-free, real per-phase power flows with
//! linearized voltage drops enforce equipment and substation limits, and
//! faulted blocks are pinned de-energized, which together with the
//! uniformity rows keeps damage out of every energized island.
//!
//! Solutions are decoded and re-audited by the independent connectivity and
//! power-flow checkers before being returned.

use crate::flow::{self, FlowTolerances};
use crate::milp::{
    big_m_for, linearize_circle, BigMFamily, MilpError, MilpModel, Sense, Solution, SolveStats,
    SolveStatus, Solver, VarId,
};
use crate::model::{CostParams, Network, SwitchClass};
use crate::reduction::ReducedNetwork;
use crate::rules::{propagate, ActiveDamage, Action, SwitchOp};

/// Why no target configuration was produced.
#[derive(Debug, thiserror::Error)]
pub enum OtpError {
    #[error("no feasible target configuration: {reason}")]
    Infeasible { reason: String },
    #[error("solver stopped at its limit before proving optimality")]
    Limit,
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error("solution failed re-audit: {0}")]
    Audit(String),
}

/// The assembled optimization model plus the variable handles needed to
/// seed and decode it.
pub struct OtpBuild {
    pub model: MilpModel,
    /// Per-block energization indicator.
    pub u: Vec<VarId>,
    /// Per-edge closed indicator.
    pub x: Vec<VarId>,
    beta: Vec<Option<(VarId, VarId)>>,
    g: Vec<Option<VarId>>,
    pq: Vec<[Option<(VarId, VarId)>; 3]>,
    v: Vec<[VarId; 3]>,
    gen: Vec<Option<[(VarId, VarId); 3]>>,
}

/// A chosen target configuration, audited and decoded.
#[derive(Debug, Clone)]
pub struct OtpResult {
    /// Target state per reduced edge.
    pub closed: Vec<bool>,
    /// Per-block energization in the target state.
    pub energized: Vec<bool>,
    /// Unordered switching operations from the given state to the target.
    pub ops: Vec<SwitchOp>,
    pub served_kw: f64,
    pub shed_kw: f64,
    /// Objective value: weighted shed load plus switching cost.
    pub cost: f64,
    pub stats: SolveStats,
}

/// Blocks that can never be cleanly served: a substation block with active
/// damage poisons every configuration, since the block is always both
/// energized and faulted.
fn doomed_source_block(red: &ReducedNetwork, dmg: &ActiveDamage) -> Option<u32> {
    for (b, blk) in red.blocks.iter().enumerate() {
        if blk.is_source() && dmg.block_faulted[b] {
            return Some(blk.id);
        }
    }
    for (ei, e) in red.edges.iter().enumerate() {
        if dmg.edge_damaged[ei] && red.blocks[e.from_block].is_source() {
            return Some(red.blocks[e.from_block].id);
        }
    }
    None
}

/// Build the target-configuration model against the given pre-plan switch
/// states and active damage.
pub fn build_otp(
    net: &Network,
    red: &ReducedNetwork,
    initial_closed: &[bool],
    dmg: &ActiveDamage,
    costs: &CostParams,
) -> Result<OtpBuild, MilpError> {
    let nb = red.blocks.len();
    let ne = red.edges.len();
    assert_eq!(initial_closed.len(), ne);
    let mut model = MilpModel::new("target-config");
    let s_base_kva = net.base_kva / 3.0;
    let z_base = net.z_base_ohm();

    // Energization indicators. Substations are always live; blocks with
    // active internal damage never are.
    let mut u = Vec::with_capacity(nb);
    for (b, blk) in red.blocks.iter().enumerate() {
        let var = model.add_binary(
            format!("u_{}", blk.id),
            -costs.rho_load * blk.weighted_load_kw,
        );
        if blk.is_source() {
            model.set_bounds(var, 1.0, 1.0);
        }
        if dmg.block_faulted[b] {
            model.set_bounds(var, 0.0, 0.0);
        }
        u.push(var);
    }

    // Switch decisions. Fuses are never operated; a switch line that loops
    // within one block would mesh it and is frozen too. Deviation from the
    // given state is what costs money, folded into the coefficient with the
    // constant part tracked separately.
    let mut x = Vec::with_capacity(ne);
    for (ei, e) in red.edges.iter().enumerate() {
        let init = initial_closed[ei];
        let frozen = e.class == SwitchClass::Fuse || e.from_block == e.to_block;
        let rho = costs.rho_switch_for(e.class);
        let obj = if frozen {
            0.0
        } else if init {
            model.obj_constant += rho;
            -rho
        } else {
            rho
        };
        let var = model.add_binary(format!("x_{}", e.line_id), obj);
        if frozen {
            let v = if init { 1.0 } else { 0.0 };
            model.set_bounds(var, v, v);
        }
        model.set_priority(var, 10);
        x.push(var);
        if dmg.edge_damaged[ei] {
            // A damaged switch line cannot be closed, and its from-side
            // block carries the damage whether the switch is open or not.
            if !init {
                model.set_bounds(var, 0.0, 0.0);
            }
            model.set_bounds(u[e.from_block], 0.0, 0.0);
            if e.from_block != e.to_block {
                model.add_con(
                    format!("dmg_{}", e.line_id),
                    [(u[e.to_block], 1.0), (var, 1.0)],
                    Sense::Le,
                    1.0,
                );
            }
        }
    }

    // Energization is uniform across every closed edge.
    for (ei, e) in red.edges.iter().enumerate() {
        if e.from_block == e.to_block {
            continue;
        }
        model.add_con(
            format!("ueq_a_{}", e.line_id),
            [(u[e.from_block], 1.0), (u[e.to_block], -1.0), (x[ei], 1.0)],
            Sense::Le,
            1.0,
        );
        model.add_con(
            format!("ueq_b_{}", e.line_id),
            [(u[e.to_block], 1.0), (u[e.from_block], -1.0), (x[ei], 1.0)],
            Sense::Le,
            1.0,
        );
    }

    // Parent orientation: every closed edge points one way, no block has
    // two parents, substations have none. Components containing a
    // substation therefore cannot close a cycle. The orientation variables
    // relax cleanly, so they stay continuous.
    let mut beta: Vec<Option<(VarId, VarId)>> = Vec::with_capacity(ne);
    for (ei, e) in red.edges.iter().enumerate() {
        if e.from_block == e.to_block {
            beta.push(None);
            continue;
        }
        let b0 = model.add_continuous(format!("par_to_{}", e.line_id), 0.0, 1.0, 0.0);
        let b1 = model.add_continuous(format!("par_from_{}", e.line_id), 0.0, 1.0, 0.0);
        model.add_con(
            format!("orient_{}", e.line_id),
            [(b0, 1.0), (b1, 1.0), (x[ei], -1.0)],
            Sense::Eq,
            0.0,
        );
        beta.push(Some((b0, b1)));
    }
    for (b, blk) in red.blocks.iter().enumerate() {
        let mut terms = Vec::new();
        for (ei, e) in red.edges.iter().enumerate() {
            let Some((b0, b1)) = beta[ei] else { continue };
            if e.to_block == b {
                terms.push((b0, 1.0));
            }
            if e.from_block == b {
                terms.push((b1, 1.0));
            }
        }
        if terms.is_empty() {
            continue;
        }
        if blk.is_source() {
            model.add_con(format!("noparent_{}", blk.id), terms, Sense::Eq, 0.0);
        } else {
            model.add_con(format!("oneparent_{}", blk.id), terms, Sense::Le, 1.0);
        }
    }

    // Fictitious connectivity flow: every energized block consumes one unit
    // that can only have come from a substation over closed edges.
    let mut g: Vec<Option<VarId>> = Vec::with_capacity(ne);
    let gcap = nb as f64;
    for (ei, e) in red.edges.iter().enumerate() {
        if e.from_block == e.to_block {
            g.push(None);
            continue;
        }
        let var = model.add_continuous(format!("conn_{}", e.line_id), -gcap, gcap, 0.0);
        model.add_con(
            format!("conn_ub_{}", e.line_id),
            [(var, 1.0), (x[ei], -gcap)],
            Sense::Le,
            0.0,
        );
        model.add_con(
            format!("conn_lb_{}", e.line_id),
            [(var, 1.0), (x[ei], gcap)],
            Sense::Ge,
            0.0,
        );
        g.push(Some(var));
    }
    for (b, blk) in red.blocks.iter().enumerate() {
        if blk.is_source() {
            continue;
        }
        let mut terms = Vec::new();
        for (ei, e) in red.edges.iter().enumerate() {
            let Some(var) = g[ei] else { continue };
            if e.to_block == b {
                terms.push((var, 1.0));
            }
            if e.from_block == b {
                terms.push((var, -1.0));
            }
        }
        terms.push((u[b], -1.0));
        model.add_con(format!("conn_bal_{}", blk.id), terms, Sense::Eq, 0.0);
    }

    // Real per-phase flows on switch lines with box rows active and the
    // finer polygon rows lazy; open lines carry nothing.
    let mut pq: Vec<[Option<(VarId, VarId)>; 3]> = Vec::with_capacity(ne);
    for (ei, e) in red.edges.iter().enumerate() {
        let line = &net.lines[e.line];
        let cap_pu = line.capacity_kva / s_base_kva;
        let mut phases: [Option<(VarId, VarId)>; 3] = [None; 3];
        for ph in line.phases.iter() {
            let pname = format!("p_{}_{}", e.line_id, ph.letter());
            let qname = format!("q_{}_{}", e.line_id, ph.letter());
            if e.from_block == e.to_block {
                let p = model.add_continuous(pname, 0.0, 0.0, 0.0);
                let q = model.add_continuous(qname, 0.0, 0.0, 0.0);
                phases[ph.index()] = Some((p, q));
                continue;
            }
            let p = model.add_continuous(pname, -cap_pu, cap_pu, 0.0);
            let q = model.add_continuous(qname, -cap_pu, cap_pu, 0.0);
            for (var, tag) in [(p, 'p'), (q, 'q')] {
                model.add_con(
                    format!("cap_{tag}hi_{}_{}", e.line_id, ph.letter()),
                    [(var, 1.0), (x[ei], -cap_pu)],
                    Sense::Le,
                    0.0,
                );
                model.add_con(
                    format!("cap_{tag}lo_{}_{}", e.line_id, ph.letter()),
                    [(var, 1.0), (x[ei], cap_pu)],
                    Sense::Ge,
                    0.0,
                );
            }
            for (m, (a, b, r)) in linearize_circle(cap_pu, costs.circle_segments)?
                .into_iter()
                .enumerate()
            {
                if a.abs() < 1e-9 || b.abs() < 1e-9 {
                    continue; // the active box rows already cover the axes
                }
                model.add_lazy_con(
                    format!("cap_poly{m}_{}_{}", e.line_id, ph.letter()),
                    [(p, a), (q, b), (x[ei], -r)],
                    Sense::Le,
                    0.0,
                );
            }
            phases[ph.index()] = Some((p, q));
        }
        pq.push(phases);
    }

    // Squared voltage magnitudes, nominal at substations, floored only when
    // energized.
    let mut v: Vec<[VarId; 3]> = Vec::with_capacity(nb);
    for (b, blk) in red.blocks.iter().enumerate() {
        let hi = blk.v_max_pu * blk.v_max_pu;
        let lo = blk.v_min_pu * blk.v_min_pu;
        let mut vb = [VarId(0); 3];
        for ph in crate::model::Phase::ALL {
            let var = model.add_continuous(format!("v_{}_{}", blk.id, ph.letter()), 0.0, hi, 0.0);
            if blk.is_source() {
                model.set_bounds(var, 1.0, 1.0);
            } else {
                model.add_con(
                    format!("vmin_{}_{}", blk.id, ph.letter()),
                    [(var, 1.0), (u[b], -lo)],
                    Sense::Ge,
                    0.0,
                );
            }
            vb[ph.index()] = var;
        }
        v.push(vb);
    }

    // Substation injections.
    let mut gen: Vec<Option<[(VarId, VarId); 3]>> = Vec::with_capacity(nb);
    for blk in red.blocks.iter() {
        let (Some(pmax), Some(qmax)) = (blk.source_p_max_kw, blk.source_q_max_kvar) else {
            gen.push(None);
            continue;
        };
        let mut gb = [(VarId(0), VarId(0)); 3];
        for ph in crate::model::Phase::ALL {
            let p = model.add_continuous(
                format!("src_p_{}_{}", blk.id, ph.letter()),
                0.0,
                pmax[ph.index()] / s_base_kva,
                0.0,
            );
            let q = model.add_continuous(
                format!("src_q_{}_{}", blk.id, ph.letter()),
                0.0,
                qmax[ph.index()] / s_base_kva,
                0.0,
            );
            gb[ph.index()] = (p, q);
        }
        gen.push(Some(gb));
    }

    // Power balance per block and phase: edge flows plus local generation
    // cover the block load exactly when energized.
    for (b, blk) in red.blocks.iter().enumerate() {
        for ph in crate::model::Phase::ALL {
            let i = ph.index();
            let mut pterms = Vec::new();
            let mut qterms = Vec::new();
            for (ei, e) in red.edges.iter().enumerate() {
                if e.from_block == e.to_block {
                    continue;
                }
                let Some((p, q)) = pq[ei][i] else { continue };
                if e.to_block == b {
                    pterms.push((p, 1.0));
                    qterms.push((q, 1.0));
                }
                if e.from_block == b {
                    pterms.push((p, -1.0));
                    qterms.push((q, -1.0));
                }
            }
            if let Some(gb) = gen[b] {
                pterms.push((gb[i].0, 1.0));
                qterms.push((gb[i].1, 1.0));
            }
            pterms.push((u[b], -blk.load_kw[i] / s_base_kva));
            qterms.push((u[b], -blk.load_kvar[i] / s_base_kva));
            model.add_con(
                format!("pbal_{}_{}", blk.id, ph.letter()),
                pterms,
                Sense::Eq,
                0.0,
            );
            model.add_con(
                format!("qbal_{}_{}", blk.id, ph.letter()),
                qterms,
                Sense::Eq,
                0.0,
            );
        }
    }

    // Linearized voltage drop across closed, energized switch lines.
    let m_v = big_m_for(BigMFamily::VoltageDecoupling, net, None);
    for (ei, e) in red.edges.iter().enumerate() {
        if e.from_block == e.to_block {
            continue;
        }
        let line = &net.lines[e.line];
        let zr = flow::rotated_impedance(&line.impedance_pu(z_base));
        for ph in line.phases.iter() {
            let i = ph.index();
            // v_from - v_to - sum_q 2(R P_q + X Q_q) = 0 when the edge is
            // closed and live, released by m_v otherwise.
            let mut base = vec![(v[e.from_block][i], 1.0), (v[e.to_block][i], -1.0)];
            for qh in line.phases.iter() {
                let Some((pvar, qvar)) = pq[ei][qh.index()] else { continue };
                let z = zr[i][qh.index()];
                base.push((pvar, -2.0 * z.re));
                base.push((qvar, -2.0 * z.im));
            }
            let mut up = base.clone();
            up.push((x[ei], m_v));
            up.push((u[e.from_block], m_v));
            model.add_con(
                format!("kvl_hi_{}_{}", e.line_id, ph.letter()),
                up,
                Sense::Le,
                2.0 * m_v,
            );
            let mut dn = base;
            dn.push((x[ei], -m_v));
            dn.push((u[e.from_block], -m_v));
            model.add_con(
                format!("kvl_lo_{}_{}", e.line_id, ph.letter()),
                dn,
                Sense::Ge,
                -2.0 * m_v,
            );
        }
    }

    Ok(OtpBuild {
        model,
        u,
        x,
        beta,
        g,
        pq,
        v,
        gen,
    })
}

/// A full variable assignment for the pre-plan configuration, used to give
/// the built-in solver a verified incumbent up front. Returns `None` when
/// the configuration itself is not representable (for instance a cycle).
fn warm_start(
    build: &OtpBuild,
    net: &Network,
    red: &ReducedNetwork,
    initial_closed: &[bool],
    dmg: &ActiveDamage,
) -> Option<Vec<f64>> {
    let state = flow::evaluate(net, red, initial_closed, dmg, FlowTolerances::default());
    if !state.ok() {
        return None;
    }
    let s_base_kva = net.base_kva / 3.0;
    let mut vals = vec![0.0; build.model.vars.len()];
    let served = state.prop.energized.clone();
    for (b, var) in build.u.iter().enumerate() {
        vals[var.0] = if served[b] { 1.0 } else { 0.0 };
    }
    for (ei, var) in build.x.iter().enumerate() {
        vals[var.0] = if initial_closed[ei] { 1.0 } else { 0.0 };
    }
    // Orientations and connectivity flow from a rooted walk of each
    // component; sourceless components root arbitrarily.
    let nb = red.blocks.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nb];
    for (ei, e) in red.edges.iter().enumerate() {
        if initial_closed[ei] && e.from_block != e.to_block {
            adj[e.from_block].push((ei, e.to_block));
            adj[e.to_block].push((ei, e.from_block));
        }
    }
    let mut seen = vec![false; nb];
    let mut roots: Vec<usize> = (0..nb).filter(|&b| red.blocks[b].is_source()).collect();
    roots.extend(0..nb);
    let mut parent_edge: Vec<Option<usize>> = vec![None; nb];
    let mut order = Vec::new();
    for root in roots {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![root];
        while let Some(b) = stack.pop() {
            order.push(b);
            for &(ei, other) in &adj[b] {
                if !seen[other] {
                    seen[other] = true;
                    parent_edge[other] = Some(ei);
                    stack.push(other);
                }
            }
        }
    }
    // A closed edge outside the walk forest means a cycle: not seedable.
    for (ei, e) in red.edges.iter().enumerate() {
        if !initial_closed[ei] || e.from_block == e.to_block {
            continue;
        }
        let in_forest = parent_edge[e.from_block] == Some(ei) || parent_edge[e.to_block] == Some(ei);
        if !in_forest {
            return None;
        }
        let (b0, b1) = build.beta[ei]?;
        if parent_edge[e.to_block] == Some(ei) {
            vals[b0.0] = 1.0;
        } else {
            vals[b1.0] = 1.0;
        }
    }
    // Connectivity flow: subtree sums of energization, child to parent.
    let mut usub: Vec<f64> = (0..nb).map(|b| if served[b] { 1.0 } else { 0.0 }).collect();
    for &b in order.iter().rev() {
        let Some(pe) = parent_edge[b] else { continue };
        let e = &red.edges[pe];
        let par = if e.from_block == b { e.to_block } else { e.from_block };
        usub[par] += usub[b];
        if let Some(gvar) = build.g[pe] {
            let sign = if e.to_block == b { 1.0 } else { -1.0 };
            vals[gvar.0] = sign * usub[b];
        }
    }
    // Physical flows and voltages from the independent evaluation.
    for (ei, phases) in build.pq.iter().enumerate() {
        for (i, slot) in phases.iter().enumerate() {
            let Some((p, q)) = slot else { continue };
            vals[p.0] = state.edge_p_kw[ei][i] / s_base_kva;
            vals[q.0] = state.edge_q_kvar[ei][i] / s_base_kva;
        }
    }
    for (b, vb) in build.v.iter().enumerate() {
        let vv = state.v_sq_pu[b].unwrap_or([1.0; 3]);
        for (i, var) in vb.iter().enumerate() {
            vals[var.0] = vv[i];
        }
    }
    for (b, slot) in build.gen.iter().enumerate() {
        let Some(gb) = slot else { continue };
        for (i, (p, q)) in gb.iter().enumerate() {
            vals[p.0] = state.source_p_kw[b][i] / s_base_kva;
            vals[q.0] = state.source_q_kvar[b][i] / s_base_kva;
        }
    }
    Some(vals)
}

/// The switching operations that move `from` to `to`, in edge order.
pub fn ops_between(red: &ReducedNetwork, from: &[bool], to: &[bool]) -> Vec<SwitchOp> {
    red.edges
        .iter()
        .enumerate()
        .filter(|(ei, _)| from[*ei] != to[*ei])
        .map(|(ei, e)| SwitchOp {
            line_id: e.line_id.clone(),
            action: if to[ei] { Action::Close } else { Action::Open },
        })
        .collect()
}

/// Step-count estimate for reaching a target: remotely commanded
/// fault-rated devices take one step each, while load-break switches and
/// sectionalizers may each need a protective open/close pair around them,
/// so they budget three. Capped at the configured step limit.
pub fn estimate_steps(ops: &[SwitchOp], red: &ReducedNetwork, costs: &CostParams) -> u32 {
    let mut steps = 0u32;
    for op in ops {
        let Some(ei) = red.edge_by_line_id(&op.line_id) else {
            continue;
        };
        steps += match red.edges[ei].class {
            SwitchClass::Cb | SwitchClass::Rec => 1,
            SwitchClass::Lbs | SwitchClass::Sec => 3,
            SwitchClass::Fuse => 0,
        };
    }
    steps.min(costs.max_steps)
}

fn round_binary(x: f64) -> bool {
    x > 0.5
}

/// Solve for the target configuration and audit the result.
pub fn solve_otp(
    net: &Network,
    red: &ReducedNetwork,
    initial_closed: &[bool],
    dmg: &ActiveDamage,
    costs: &CostParams,
    solver: &Solver,
) -> Result<OtpResult, OtpError> {
    if let Some(id) = doomed_source_block(red, dmg) {
        return Err(OtpError::Infeasible {
            reason: format!("substation block {id} contains unrepaired damage"),
        });
    }
    let mut build = build_otp(net, red, initial_closed, dmg, costs)?;
    let solver = match solver {
        Solver::Builtin(cfg) => {
            let mut cfg = cfg.clone().with_max_binaries(cfg.max_binaries.max(256));
            if let Some(seed) = warm_start(&build, net, red, initial_closed, dmg) {
                cfg = cfg.with_initial(seed);
            }
            Solver::Builtin(cfg)
        }
        other => other.clone(),
    };
    let sol = solver.solve_with_lazy(&mut build.model)?;
    decode(net, red, initial_closed, dmg, &build, &sol)
}

fn decode(
    net: &Network,
    red: &ReducedNetwork,
    initial_closed: &[bool],
    dmg: &ActiveDamage,
    build: &OtpBuild,
    sol: &Solution,
) -> Result<OtpResult, OtpError> {
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            return Err(OtpError::Infeasible {
                reason: "the isolation and restoration constraints admit no configuration"
                    .to_string(),
            })
        }
        SolveStatus::Limit => return Err(OtpError::Limit),
        SolveStatus::Unbounded => {
            return Err(OtpError::Audit(
                "model reported unbounded, which a bounded formulation cannot be".to_string(),
            ))
        }
    }
    let closed: Vec<bool> = build.x.iter().map(|id| round_binary(sol.values[id.0])).collect();
    let energized: Vec<bool> = build.u.iter().map(|id| round_binary(sol.values[id.0])).collect();

    // Audit 1: the model's energization must match independent propagation.
    let prop = propagate(red, &closed, dmg);
    if prop.energized != energized {
        return Err(OtpError::Audit(
            "energization flags disagree with connectivity propagation".to_string(),
        ));
    }
    // Audit 2: no energized island may touch active damage.
    if !prop.hot_fault_blocks().is_empty() {
        return Err(OtpError::Audit(format!(
            "configuration leaves damage energized at blocks {:?}",
            prop.hot_fault_blocks()
        )));
    }
    // Audit 3: the configuration must pass the independent radial power
    // flow check (radiality, capacities, voltages, substation limits).
    let state = flow::evaluate(net, red, &closed, dmg, FlowTolerances::default());
    if !state.ok() {
        return Err(OtpError::Audit(format!(
            "configuration fails flow audit: {}",
            state
                .violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        )));
    }

    let served_kw: f64 = red
        .blocks
        .iter()
        .enumerate()
        .filter(|(b, _)| energized[*b])
        .map(|(_, blk)| blk.total_load_kw())
        .sum();
    let total_kw: f64 = red.blocks.iter().map(|b| b.total_load_kw()).sum();
    Ok(OtpResult {
        ops: ops_between(red, initial_closed, &closed),
        closed,
        energized,
        served_kw,
        shed_kw: total_kw - served_kw,
        cost: sol.objective,
        stats: sol.stats.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::reduction::reduce;
    use crate::rules::initial_closed_states;

    fn setup(
        net: &Network,
        scenario: &crate::model::DamageScenario,
    ) -> (Network, ReducedNetwork, Vec<bool>, ActiveDamage) {
        let damaged = net.with_damage(scenario);
        let red = reduce(&damaged);
        let closed = initial_closed_states(&damaged, &red, scenario);
        let dmg = ActiveDamage::full(&red);
        (damaged, red, closed, dmg)
    }

    fn op_set(ops: &[SwitchOp]) -> std::collections::BTreeSet<String> {
        ops.iter()
            .map(|op| format!("{}{}", op.action.arrow(), op.line_id))
            .collect()
    }

    #[test]
    fn seven_bus_target_isolates_and_restores() {
        let net = fixtures::seven_bus();
        let scenario = fixtures::seven_bus_fault();
        let (damaged, red, closed, dmg) = setup(&net, &scenario);
        let result = solve_otp(
            &damaged,
            &red,
            &closed,
            &dmg,
            &CostParams::default(),
            &Solver::default(),
        )
        .expect("solvable");
        // Block {4} is lost; everything else comes back: open the damaged
        // line's own switch and the far-side recloser to box the damage in,
        // close the tripped recloser for {3}, and pick {7} up over the tie.
        assert!((result.shed_kw - 180.0).abs() < 1e-6, "shed {}", result.shed_kw);
        let b4 = red.block_by_id(4).unwrap();
        assert!(!result.energized[b4]);
        assert_eq!(
            op_set(&result.ops),
            ["↑3-4", "↓2-3", "↑4-7", "↓6-7"]
                .into_iter()
                .map(String::from)
                .collect()
        );
    }

    #[test]
    fn seven_bus_estimate_counts_device_classes() {
        let net = fixtures::seven_bus();
        let scenario = fixtures::seven_bus_fault();
        let (damaged, red, closed, dmg) = setup(&net, &scenario);
        let costs = CostParams::default();
        let result = solve_otp(&damaged, &red, &closed, &dmg, &costs, &Solver::default()).unwrap();
        // Two fault-rated devices at one step each, two dead-operated
        // sectionalizers at three each.
        assert_eq!(estimate_steps(&result.ops, &red, &costs), 2 + 3 * 2);
    }

    #[test]
    fn undamaged_network_needs_no_operations() {
        let net = fixtures::seven_bus();
        let red = reduce(&net);
        let closed: Vec<bool> = red
            .edges
            .iter()
            .map(|e| net.lines[e.line].switch.as_ref().unwrap().initial_closed)
            .collect();
        let dmg = ActiveDamage::none(&red);
        let result = solve_otp(
            &net,
            &red,
            &closed,
            &dmg,
            &CostParams::default(),
            &Solver::default(),
        )
        .unwrap();
        assert!(result.ops.is_empty(), "ops: {:?}", result.ops);
        assert!(result.shed_kw.abs() < 1e-9);
    }

    #[test]
    fn damaged_substation_block_is_reported_infeasible() {
        let mut net = fixtures::seven_bus();
        let idx = net.line_idx("2-5").unwrap();
        net.lines[idx].is_damaged = true;
        net.lines[idx].repair_time_min = Some(60.0);
        // Damage in the block of bus 2 is fine; damage in the source block
        // {1} is fatal. Rewire so the plain line sits inside block {1}: the
        // simplest is to damage a line that reduces into the source block.
        // Here 2-5 is inside block {2,5}, so first check that one solves...
        let red = reduce(&net);
        let closed: Vec<bool> = red
            .edges
            .iter()
            .map(|e| net.lines[e.line].switch.as_ref().unwrap().initial_closed)
            .collect();
        let dmg = ActiveDamage::full(&red);
        // {2,5} faulted and the breaker open isolates it: feasible, sheds
        // blocks {2,5} and {6}.
        let mut open = closed.clone();
        open[red.edge_by_line_id("1-2").unwrap()] = false;
        let result = solve_otp(
            &net,
            &red,
            &open,
            &dmg,
            &CostParams::default(),
            &Solver::default(),
        )
        .unwrap();
        let b2 = red.block_of(2).unwrap();
        assert!(!result.energized[b2]);

        // ...and a damaged switch line whose from side is the substation
        // block is reported as unservable.
        let mut net2 = fixtures::seven_bus();
        let idx2 = net2.line_idx("1-2").unwrap();
        net2.lines[idx2].is_damaged = true;
        let red2 = reduce(&net2);
        let closed2: Vec<bool> = red2
            .edges
            .iter()
            .map(|e| net2.lines[e.line].switch.as_ref().unwrap().initial_closed)
            .collect();
        let dmg2 = ActiveDamage::full(&red2);
        let err = solve_otp(
            &net2,
            &red2,
            &closed2,
            &dmg2,
            &CostParams::default(),
            &Solver::default(),
        )
        .unwrap_err();
        assert!(matches!(err, OtpError::Infeasible { .. }), "got {err:?}");
    }

    #[test]
    fn ieee123_single_fault_target_and_estimate() {
        let net = fixtures::ieee123();
        let scenario = fixtures::test1_fault();
        let (damaged, red, closed, dmg) = setup(&net, &scenario);
        let costs = CostParams::default();
        let result = solve_otp(&damaged, &red, &closed, &dmg, &costs, &Solver::default())
            .expect("solvable");
        // The faulted block 18 is boxed in by opening its two live
        // boundary devices; the recloser that tripped comes back for the
        // western blocks and the open sectionalizer 44-47 picks the rest up
        // from the east. Only block 18's load stays down.
        assert_eq!(
            op_set(&result.ops),
            ["↑18-135", "↑23-25", "↓25-28", "↓44-47"]
                .into_iter()
                .map(String::from)
                .collect()
        );
        assert!((result.shed_kw - 160.0).abs() < 1e-6, "shed {}", result.shed_kw);
        // One fault-rated device plus three dead/load-operated ones.
        assert_eq!(estimate_steps(&result.ops, &red, &costs), 10);
    }

    #[test]
    fn ops_between_reports_both_directions() {
        let net = fixtures::seven_bus();
        let red = reduce(&net);
        let a = vec![true, true, true, true, true, false];
        let b = vec![true, false, true, true, true, true];
        let ops = ops_between(&red, &a, &b);
        assert_eq!(op_set(&ops), op_set(&[
            SwitchOp { line_id: "2-3".into(), action: Action::Open },
            SwitchOp { line_id: "6-7".into(), action: Action::Close },
        ]));
    }
}
