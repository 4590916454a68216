//! Network reduction: collapse buses joined by non-switchable lines into
//! bus blocks.
//!
//! Every line carrying a switching device (of any class, fuses included) is
//! a block boundary; everything else merges. Restoration planning then works
//! on the reduced graph: blocks are the units that are energized, isolated,
//! or repaired, and switchable lines are its edges.
//!
//! Damage placement: a damaged non-switchable line puts the damage inside
//! the block containing it; a damaged switchable line assigns the damage to
//! the block of its `from` bus (the data format orients switch lines so the
//! damaged side comes first).

use std::collections::BTreeMap;

use crate::model::{Network, PhaseSet, SwitchClass};

/// A maximal set of buses connected through non-switchable lines, with
/// aggregated load and source data.
#[derive(Debug, Clone)]
pub struct BusBlock {
    /// Block id: the smallest member bus id.
    pub id: u32,
    /// Sorted member bus ids.
    pub buses: Vec<u32>,
    pub load_kw: [f64; 3],
    pub load_kvar: [f64; 3],
    /// Priority-weighted total active load, for restoration objectives.
    pub weighted_load_kw: f64,
    /// Aggregated source limits, present if any member bus is a source.
    pub source_p_max_kw: Option<[f64; 3]>,
    pub source_q_max_kvar: Option<[f64; 3]>,
    /// Union of member phases.
    pub phases: PhaseSet,
    /// Tightest voltage bounds over members.
    pub v_min_pu: f64,
    pub v_max_pu: f64,
    /// Damaged non-switchable lines inside this block.
    pub internal_damage: Vec<String>,
}

impl BusBlock {
    pub fn is_source(&self) -> bool {
        self.source_p_max_kw.is_some()
    }

    pub fn total_load_kw(&self) -> f64 {
        self.load_kw.iter().sum()
    }
}

/// A switchable line viewed as an edge of the reduced graph.
#[derive(Debug, Clone)]
pub struct SwitchEdge {
    /// Index into the source network's `lines`.
    pub line: usize,
    pub line_id: String,
    pub class: SwitchClass,
    pub remote: bool,
    pub from_block: usize,
    pub to_block: usize,
    pub is_damaged: bool,
}

#[derive(Debug, Clone)]
pub struct ReducedNetwork {
    /// Blocks sorted by block id.
    pub blocks: Vec<BusBlock>,
    pub edges: Vec<SwitchEdge>,
    pub block_of_bus: BTreeMap<u32, usize>,
}

impl ReducedNetwork {
    pub fn block_by_id(&self, id: u32) -> Option<usize> {
        self.blocks.iter().position(|b| b.id == id)
    }

    pub fn block_of(&self, bus: u32) -> Option<usize> {
        self.block_of_bus.get(&bus).copied()
    }

    pub fn edge_by_line_id(&self, line_id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.line_id == line_id)
    }

    /// Edges incident to a block (self-loops reported once).
    pub fn edges_of_block(&self, block: usize) -> impl Iterator<Item = (usize, &SwitchEdge)> {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.from_block == block || e.to_block == block)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, a: usize) -> usize {
        let mut root = a;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = a;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller index wins so roots stay stable and deterministic.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Collapse the network into bus blocks and switchable edges. Damage flags
/// on lines (set via `Network::with_damage`) are carried through.
pub fn reduce(net: &Network) -> ReducedNetwork {
    let n = net.buses.len();
    let mut uf = UnionFind::new(n);
    for line in &net.lines {
        if !line.is_switch() {
            let fi = net.bus_idx(line.from).expect("validated endpoint");
            let ti = net.bus_idx(line.to).expect("validated endpoint");
            uf.union(fi, ti);
        }
    }
    // Group bus indices by root.
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = uf.find(i);
        groups.entry(root).or_default().push(i);
    }
    // Build blocks keyed by minimal member bus id, then sort by that id.
    let mut blocks: Vec<BusBlock> = Vec::with_capacity(groups.len());
    let mut root_to_block: BTreeMap<usize, usize> = BTreeMap::new();
    let mut keyed: Vec<(u32, usize, Vec<usize>)> = groups
        .into_iter()
        .map(|(root, members)| {
            let min_id = members.iter().map(|&i| net.buses[i].id).min().unwrap();
            (min_id, root, members)
        })
        .collect();
    keyed.sort_by_key(|(id, _, _)| *id);
    for (block_idx, (min_id, root, members)) in keyed.into_iter().enumerate() {
        root_to_block.insert(root, block_idx);
        let mut buses: Vec<u32> = members.iter().map(|&i| net.buses[i].id).collect();
        buses.sort_unstable();
        let mut load_kw = [0.0; 3];
        let mut load_kvar = [0.0; 3];
        let mut weighted = 0.0;
        let mut src_p: Option<[f64; 3]> = None;
        let mut src_q: Option<[f64; 3]> = None;
        let mut phases = [false; 3];
        let mut v_min: f64 = 0.0;
        let mut v_max = f64::INFINITY;
        for &i in &members {
            let bus = &net.buses[i];
            for p in 0..3 {
                load_kw[p] += bus.load_kw[p];
                load_kvar[p] += bus.load_kvar[p];
                phases[p] |= bus.phases.0[p];
            }
            weighted += bus.priority * bus.total_load_kw();
            v_min = v_min.max(bus.v_min_pu);
            v_max = v_max.min(bus.v_max_pu);
            if let Some(src) = &bus.source {
                let p = src_p.get_or_insert([0.0; 3]);
                let q = src_q.get_or_insert([0.0; 3]);
                for k in 0..3 {
                    p[k] += src.p_max_kw[k];
                    q[k] += src.q_max_kvar[k];
                }
            }
        }
        blocks.push(BusBlock {
            id: min_id,
            buses,
            load_kw,
            load_kvar,
            weighted_load_kw: weighted,
            source_p_max_kw: src_p,
            source_q_max_kvar: src_q,
            phases: PhaseSet(phases),
            v_min_pu: v_min,
            v_max_pu: v_max,
            internal_damage: Vec::new(),
        });
    }
    let mut block_of_bus = BTreeMap::new();
    for i in 0..n {
        let b = root_to_block[&uf.find(i)];
        block_of_bus.insert(net.buses[i].id, b);
    }
    // Internal damage and switch edges.
    let mut edges = Vec::new();
    for (li, line) in net.lines.iter().enumerate() {
        let fb = block_of_bus[&line.from];
        let tb = block_of_bus[&line.to];
        match &line.switch {
            None => {
                debug_assert_eq!(fb, tb);
                if line.is_damaged {
                    blocks[fb].internal_damage.push(line.id.clone());
                }
            }
            Some(sw) => {
                edges.push(SwitchEdge {
                    line: li,
                    line_id: line.id.clone(),
                    class: sw.class,
                    remote: sw.remote,
                    from_block: fb,
                    to_block: tb,
                    is_damaged: line.is_damaged,
                });
            }
        }
    }
    for b in &mut blocks {
        b.internal_damage.sort();
    }
    ReducedNetwork {
        blocks,
        edges,
        block_of_bus,
    }
}

/// Blocks that contain damage: any block with an internal damaged line, plus
/// the `from`-side block of each damaged switchable line.
pub fn damaged_blocks(net: &Network, red: &ReducedNetwork) -> Vec<usize> {
    let mut out: Vec<usize> = red
        .blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| !b.internal_damage.is_empty())
        .map(|(i, _)| i)
        .collect();
    for e in &red.edges {
        if e.is_damaged {
            let from_bus = net.lines[e.line].from;
            out.push(red.block_of_bus[&from_bus]);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Total absolute mismatch between bus-level and block-level demand; the
/// reduction must conserve demand to numerical exactness.
pub fn demand_mismatch(net: &Network, red: &ReducedNetwork) -> f64 {
    let mut bus_tot = [0.0f64; 6];
    for b in &net.buses {
        for p in 0..3 {
            bus_tot[p] += b.load_kw[p];
            bus_tot[3 + p] += b.load_kvar[p];
        }
    }
    let mut blk_tot = [0.0f64; 6];
    for b in &red.blocks {
        for p in 0..3 {
            blk_tot[p] += b.load_kw[p];
            blk_tot[3 + p] += b.load_kvar[p];
        }
    }
    bus_tot
        .iter()
        .zip(blk_tot.iter())
        .map(|(a, b)| (a - b).abs())
        .sum()
}

/// Render the reduced network in Graphviz DOT form.
pub fn to_dot(_net: &Network, red: &ReducedNetwork) -> String {
    let mut out = String::from("graph reduced {\n  node [shape=box];\n");
    for b in &red.blocks {
        let mut marks = String::new();
        if b.is_source() {
            marks.push_str(" SOURCE");
        }
        if !b.internal_damage.is_empty() {
            marks.push_str(" DAMAGED");
        }
        out.push_str(&format!(
            "  b{} [label=\"block {}{}\\n{} buses, {:.1} kW\"{}];\n",
            b.id,
            b.id,
            marks,
            b.buses.len(),
            b.total_load_kw(),
            if b.internal_damage.is_empty() {
                ""
            } else {
                ", color=red"
            }
        ));
    }
    for e in &red.edges {
        let from = red.blocks[e.from_block].id;
        let to = red.blocks[e.to_block].id;
        out.push_str(&format!(
            "  b{} -- b{} [label=\"{} {}{}\"{}];\n",
            from,
            to,
            e.class.label(),
            e.line_id,
            if e.is_damaged { " DAMAGED" } else { "" },
            if e.is_damaged { ", color=red" } else { "" }
        ));
    }
    out.push_str("}\n");
    out
}
