//! Independent power-flow evaluation for a fixed switch configuration.
//!
//! Works purely on the reduced network by tree accumulation: each energized
//! island must be a tree rooted at its single source block, edge flows are
//! subtree load sums, and squared voltage magnitudes follow the linearized
//! three-phase drop equation along the tree. This is deliberately a second
//! implementation of the physics used by the optimization models, so that
//! optimizer output is audited by code that shares none of its structure.

use num_complex::Complex64;

use crate::model::{Network, Phase};
use crate::reduction::ReducedNetwork;
use crate::rules::{propagate, ActiveDamage, Propagation};

/// Acceptance slack for the checks, as fractions of the violated limit.
#[derive(Debug, Clone, Copy)]
pub struct FlowTolerances {
    pub rel: f64,
}

impl Default for FlowTolerances {
    fn default() -> Self {
        FlowTolerances { rel: 1e-6 }
    }
}

/// A limit breached by the configuration, in physical units.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowViolation {
    /// An energized island whose closed edges contain a cycle.
    NonRadialIsland { block_ids: Vec<u32> },
    /// An island fed by more than one substation.
    MultiSourceIsland { block_ids: Vec<u32> },
    /// Apparent power through a line above its rating on some phase.
    OverCapacity {
        line_id: String,
        phase: Phase,
        kva: f64,
        limit_kva: f64,
    },
    /// Squared voltage magnitude out of range at an energized block.
    VoltageOutOfRange {
        block_id: u32,
        phase: Phase,
        v_pu: f64,
        lo_pu: f64,
        hi_pu: f64,
    },
    /// Substation injection above its per-phase limit.
    SourceOverload {
        block_id: u32,
        phase: Phase,
        kw: f64,
        kvar: f64,
        p_limit_kw: f64,
        q_limit_kvar: f64,
    },
}

impl std::fmt::Display for FlowViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FlowViolation::NonRadialIsland { block_ids } => {
                write!(f, "island with blocks {block_ids:?} is not radial")
            }
            FlowViolation::MultiSourceIsland { block_ids } => {
                write!(f, "island with blocks {block_ids:?} ties substations together")
            }
            FlowViolation::OverCapacity {
                line_id,
                phase,
                kva,
                limit_kva,
            } => write!(
                f,
                "line {line_id} phase {} carries {kva:.1} kVA, rated {limit_kva:.1}",
                phase.letter()
            ),
            FlowViolation::VoltageOutOfRange {
                block_id,
                phase,
                v_pu,
                lo_pu,
                hi_pu,
            } => write!(
                f,
                "block {block_id} phase {} at {v_pu:.4} pu, limits [{lo_pu}, {hi_pu}]",
                phase.letter()
            ),
            FlowViolation::SourceOverload {
                block_id,
                phase,
                kw,
                kvar,
                p_limit_kw,
                q_limit_kvar,
            } => write!(
                f,
                "substation block {block_id} phase {} supplies {kw:.1} kW / {kvar:.1} kvar, \
                 limits {p_limit_kw:.1} / {q_limit_kvar:.1}",
                phase.letter()
            ),
        }
    }
}

/// Flows, voltages, and violations for one configuration.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub prop: Propagation,
    /// Per edge, per phase: active power through the switch line, kW,
    /// positive when flowing from the edge's `from` block to its `to` block.
    /// Zero for open edges and edges in dead or non-evaluated islands.
    pub edge_p_kw: Vec<[f64; 3]>,
    pub edge_q_kvar: Vec<[f64; 3]>,
    /// Per block, per phase: squared voltage magnitude, pu. `None` for dead
    /// blocks and for islands whose flows could not be evaluated.
    pub v_sq_pu: Vec<Option<[f64; 3]>>,
    /// Per block, per phase: substation injection, kW / kvar (source blocks
    /// of evaluated islands only).
    pub source_p_kw: Vec<[f64; 3]>,
    pub source_q_kvar: Vec<[f64; 3]>,
    pub violations: Vec<FlowViolation>,
}

impl FlowState {
    /// Total apparent power through an edge on its worst phase, kVA.
    pub fn edge_worst_kva(&self, edge: usize) -> f64 {
        (0..3)
            .map(|p| {
                (self.edge_p_kw[edge][p].powi(2) + self.edge_q_kvar[edge][p].powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Complex phase-shifted impedance used by the linearized drop equation:
/// `z[p][q] * exp(-j * 2π(q - p) / 3)`, so that the drop on phase `p` is
/// `2 * Σ_q (Re(ẑ) P_q + Im(ẑ) Q_q)`.
pub fn rotated_impedance(z_pu: &[[Complex64; 3]; 3]) -> [[Complex64; 3]; 3] {
    let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
    for (p, row) in out.iter_mut().enumerate() {
        for (q, cell) in row.iter_mut().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * ((q as f64) - (p as f64)) / 3.0;
            *cell = z_pu[p][q] * Complex64::from_polar(1.0, angle);
        }
    }
    out
}

/// Evaluate flows and voltages for a configuration, independently of any
/// optimization model. Islands that are not radial or tie substations
/// together are reported as violations and left unevaluated.
pub fn evaluate(
    net: &Network,
    red: &ReducedNetwork,
    closed: &[bool],
    dmg: &ActiveDamage,
    tol: FlowTolerances,
) -> FlowState {
    let prop = propagate(red, closed, dmg);
    let nb = red.blocks.len();
    let ne = red.edges.len();
    let mut state = FlowState {
        prop,
        edge_p_kw: vec![[0.0; 3]; ne],
        edge_q_kvar: vec![[0.0; 3]; ne],
        v_sq_pu: vec![None; nb],
        source_p_kw: vec![[0.0; 3]; nb],
        source_q_kvar: vec![[0.0; 3]; nb],
        violations: Vec::new(),
    };

    let n_islands = state.prop.island.iter().copied().max().map_or(0, |m| m + 1);
    let mut island_blocks: Vec<Vec<usize>> = vec![Vec::new(); n_islands];
    for b in 0..nb {
        island_blocks[state.prop.island[b]].push(b);
    }

    // Closed adjacency, excluding self-loops (they carry no net transfer).
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nb]; // (edge, other block)
    for (ei, e) in red.edges.iter().enumerate() {
        if closed[ei] && e.from_block != e.to_block {
            adj[e.from_block].push((ei, e.to_block));
            adj[e.to_block].push((ei, e.from_block));
        }
    }

    let s_base_kva = net.base_kva / 3.0; // per-phase power base
    let z_base = net.z_base_ohm();

    for blocks in &island_blocks {
        let sources: Vec<usize> = blocks
            .iter()
            .copied()
            .filter(|&b| red.blocks[b].is_source())
            .collect();
        if sources.is_empty() {
            continue; // dead island: nothing flows
        }
        let ids = |list: &[usize]| -> Vec<u32> {
            let mut v: Vec<u32> = list.iter().map(|&b| red.blocks[b].id).collect();
            v.sort_unstable();
            v
        };
        if sources.len() > 1 {
            state
                .violations
                .push(FlowViolation::MultiSourceIsland { block_ids: ids(blocks) });
            continue;
        }
        // Count closed non-self-loop edges inside the island; a tree has
        // exactly blocks-1. Self-loop closed edges are also cycles.
        let closed_inner = red
            .edges
            .iter()
            .enumerate()
            .filter(|(ei, e)| {
                closed[*ei] && state.prop.island[e.from_block] == state.prop.island[blocks[0]]
            })
            .count();
        if closed_inner != blocks.len() - 1 {
            state
                .violations
                .push(FlowViolation::NonRadialIsland { block_ids: ids(blocks) });
            continue;
        }

        // Root the tree at the source; children ordered by discovery.
        let root = sources[0];
        let mut parent_edge: Vec<Option<usize>> = vec![None; nb];
        let mut order = Vec::with_capacity(blocks.len());
        let mut stack = vec![root];
        let mut seen = vec![false; nb];
        seen[root] = true;
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

        // Subtree loads, leaves upward.
        let mut sub_p = vec![[0.0f64; 3]; nb];
        let mut sub_q = vec![[0.0f64; 3]; nb];
        for &b in order.iter().rev() {
            for ph in 0..3 {
                sub_p[b][ph] += red.blocks[b].load_kw[ph];
                sub_q[b][ph] += red.blocks[b].load_kvar[ph];
            }
            if let Some(pe) = parent_edge[b] {
                let e = &red.edges[pe];
                let par = if e.from_block == b { e.to_block } else { e.from_block };
                for ph in 0..3 {
                    sub_p[par][ph] += sub_p[b][ph];
                    sub_q[par][ph] += sub_q[b][ph];
                    // Edge flow is the whole subtree demand, signed by the
                    // edge's own orientation.
                    let sign = if e.to_block == b { 1.0 } else { -1.0 };
                    state.edge_p_kw[pe][ph] = sign * sub_p[b][ph];
                    state.edge_q_kvar[pe][ph] = sign * sub_q[b][ph];
                }
            }
        }
        state.source_p_kw[root] = sub_p[root];
        state.source_q_kvar[root] = sub_q[root];

        // Voltage sweep from the root.
        state.v_sq_pu[root] = Some([1.0; 3]);
        for &b in &order {
            let Some(pe) = parent_edge[b] else { continue };
            let e = &red.edges[pe];
            let par = if e.from_block == b { e.to_block } else { e.from_block };
            let vp = state.v_sq_pu[par].expect("parent visited first");
            let line = &net.lines[e.line];
            let zr = rotated_impedance(&line.impedance_pu(z_base));
            // Flow toward the child, pu.
            let sign = if e.to_block == b { 1.0 } else { -1.0 };
            let mut v = [0.0; 3];
            for ph in 0..3 {
                let mut drop = 0.0;
                for (q, zrow) in zr[ph].iter().enumerate() {
                    let p_pu = sign * state.edge_p_kw[pe][q] / s_base_kva;
                    let q_pu = sign * state.edge_q_kvar[pe][q] / s_base_kva;
                    drop += 2.0 * (zrow.re * p_pu + zrow.im * q_pu);
                }
                v[ph] = vp[ph] - drop;
            }
            state.v_sq_pu[b] = Some(v);
        }

        // Checks: capacity, voltage, source limits.
        for (ei, e) in red.edges.iter().enumerate() {
            if state.prop.island[e.from_block] != state.prop.island[root] || !closed[ei] {
                continue;
            }
            let line = &net.lines[e.line];
            for ph in Phase::ALL {
                let p = state.edge_p_kw[ei][ph.index()];
                let q = state.edge_q_kvar[ei][ph.index()];
                let kva = (p * p + q * q).sqrt();
                if kva > line.capacity_kva * (1.0 + tol.rel) {
                    state.violations.push(FlowViolation::OverCapacity {
                        line_id: line.id.clone(),
                        phase: ph,
                        kva,
                        limit_kva: line.capacity_kva,
                    });
                }
            }
        }
        for &b in blocks {
            let blk = &red.blocks[b];
            let v = state.v_sq_pu[b].expect("island evaluated");
            let (lo, hi) = (blk.v_min_pu * blk.v_min_pu, blk.v_max_pu * blk.v_max_pu);
            for ph in Phase::ALL {
                let vph = v[ph.index()];
                if vph < lo - tol.rel || vph > hi + tol.rel {
                    state.violations.push(FlowViolation::VoltageOutOfRange {
                        block_id: blk.id,
                        phase: ph,
                        v_pu: vph,
                        lo_pu: lo,
                        hi_pu: hi,
                    });
                }
            }
        }
        let blk = &red.blocks[root];
        let p_max = blk.source_p_max_kw.expect("source block");
        let q_max = blk.source_q_max_kvar.expect("source block");
        for ph in Phase::ALL {
            let p = state.source_p_kw[root][ph.index()];
            let q = state.source_q_kvar[root][ph.index()];
            let p_lim = p_max[ph.index()];
            let q_lim = q_max[ph.index()];
            if p > p_lim * (1.0 + tol.rel) + tol.rel || q > q_lim * (1.0 + tol.rel) + tol.rel {
                state.violations.push(FlowViolation::SourceOverload {
                    block_id: blk.id,
                    phase: ph,
                    kw: p,
                    kvar: q,
                    p_limit_kw: p_lim,
                    q_limit_kvar: q_lim,
                });
            }
        }
    }
    state
}
