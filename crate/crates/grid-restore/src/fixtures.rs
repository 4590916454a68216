//! Bundled networks, damage scenarios, and candidate plans used by the test
//! suite, the benchmarks, and the CLI examples, plus seeded generators for
//! the enumeration cross-check corpora.
//!
//! Everything is constructed programmatically so one definition drives both
//! the in-process tests and the JSON files shipped under `fixtures/`;
//! `write_fixture_files` materializes the JSON copies.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::model::{
    travel_matrix_from_points, Bus, CostParams, Crew, CrewKind, DamageScenario, Fault, Line,
    Network, PhaseSet, SourceLimits, SwitchClass, SwitchSpec,
};
use crate::rules::{Action, SwitchOp};

/// Per-phase kVA a breaker-class device must handle, used for every CB/REC.
const PROTECTION_AMPS: f64 = 6000.0;
/// Default load-break switch rating; the sensitivity study swaps in 50 A.
pub const LBS_AMPS_DEFAULT: f64 = 500.0;
pub const LBS_AMPS_LOW: f64 = 50.0;

fn bus(id: u32, load_kw_total: f64) -> Bus {
    let kw = load_kw_total / 3.0;
    Bus {
        id,
        phases: PhaseSet::all(),
        load_kw: [kw; 3],
        load_kvar: [kw / 2.0; 3],
        priority: 1.0,
        v_min_pu: 0.9,
        v_max_pu: 1.1,
        source: None,
    }
}

fn impedance(length_ft: f64) -> [[[f64; 2]; 3]; 3] {
    let miles = length_ft / 5280.0;
    let self_z = [0.06 * miles, 0.13 * miles];
    let mutual = [0.02 * miles, 0.05 * miles];
    let mut z = [[[0.0; 2]; 3]; 3];
    for (r, row) in z.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = if r == c { self_z } else { mutual };
        }
    }
    z
}

fn plain_line(id: &str, from: u32, to: u32, length_ft: f64, capacity_kva: f64) -> Line {
    Line {
        id: id.to_string(),
        from,
        to,
        phases: PhaseSet::all(),
        impedance_ohm: impedance(length_ft),
        capacity_kva,
        switch: None,
        is_damaged: false,
        repair_time_min: None,
    }
}

fn switch_line(
    id: &str,
    from: u32,
    to: u32,
    length_ft: f64,
    capacity_kva: f64,
    class: SwitchClass,
    remote: bool,
    amps: f64,
    initial_closed: bool,
) -> Line {
    let mut line = plain_line(id, from, to, length_ft, capacity_kva);
    line.switch = Some(SwitchSpec {
        class,
        remote,
        breaking_amps: amps,
        making_amps: amps,
        op_time_min: None,
        initial_closed,
    });
    line
}

fn mark_source(buses: &mut [Bus], id: u32, p_max_kw: f64, q_max_kvar: f64) {
    let bus = buses
        .iter_mut()
        .find(|b| b.id == id)
        .unwrap_or_else(|| panic!("no bus {id} to mark as source"));
    bus.source = Some(SourceLimits {
        bus: id,
        p_max_kw: [p_max_kw; 3],
        q_max_kvar: [q_max_kvar; 3],
    });
}

// ---------------------------------------------------------------------------
// Seven-bus walkthrough network
// ---------------------------------------------------------------------------

/// The small walkthrough feeder: substation at bus 1, a switched spine
/// 1-2-3-4-7, a plain branch 2-5 with a load-break switch at 5-6, and a
/// normally open sectionalizer tie 6-7. The sectionalizer between buses 3
/// and 4 is oriented with `from = 4` so damage on it lands in block {4}.
pub fn seven_bus() -> Network {
    let mut buses: Vec<Bus> = vec![
        bus(1, 0.0),
        bus(2, 180.0),
        bus(3, 180.0),
        bus(4, 180.0),
        bus(5, 180.0),
        bus(6, 180.0),
        bus(7, 180.0),
    ];
    mark_source(&mut buses, 1, 800.0, 400.0);
    let cap = 1500.0;
    let lines = vec![
        switch_line("1-2", 1, 2, 100.0, cap, SwitchClass::Cb, true, PROTECTION_AMPS, true),
        switch_line("2-3", 2, 3, 150.0, cap, SwitchClass::Rec, true, PROTECTION_AMPS, true),
        switch_line("3-4", 4, 3, 150.0, cap, SwitchClass::Sec, true, 0.0, true),
        switch_line("4-7", 4, 7, 150.0, cap, SwitchClass::Rec, true, PROTECTION_AMPS, true),
        plain_line("2-5", 2, 5, 200.0, cap),
        switch_line("5-6", 5, 6, 150.0, cap, SwitchClass::Lbs, true, LBS_AMPS_DEFAULT, true),
        switch_line("6-7", 6, 7, 150.0, cap, SwitchClass::Sec, true, 0.0, false),
    ];
    Network::from_parts(4.16, 1000.0, buses, lines).expect("seven-bus network")
}

/// Fault on the line between buses 3 and 4 (damage in block {4}); the
/// recloser at 2-3 tripped to clear it. One repair crew is available.
pub fn seven_bus_fault() -> DamageScenario {
    DamageScenario {
        faults: vec![Fault {
            line: "3-4".to_string(),
            repair_minutes: 120.0,
        }],
        melted_fuses: vec![],
        post_protection_states: [("2-3".to_string(), false)].into_iter().collect(),
        fault_interrupt_amps: 2000.0,
        crews: vec![Crew {
            id: "rep1".to_string(),
            kind: CrewKind::Repair,
        }],
        depot: Some("depot".to_string()),
        travel_minutes: [(
            "depot".to_string(),
            [("block:4".to_string(), 20.0)].into_iter().collect(),
        )]
        .into_iter()
        .collect(),
        costs: None,
    }
}

/// The smallest interesting sequencing instance: a three-bus triangle where
/// the normal feed 1-2 is damaged, so bus 3 must be picked up over the
/// normally open recloser 1-3 — but only after the sectionalizer 2-3 is
/// opened, or the close would energize the damaged block. Small enough for
/// exhaustive enumeration and for the step-indexed optimization model.
pub fn mini_triangle() -> Network {
    let mut buses: Vec<Bus> = vec![bus(1, 0.0), bus(2, 150.0), bus(3, 150.0)];
    mark_source(&mut buses, 1, 600.0, 300.0);
    let cap = 1500.0;
    let lines = vec![
        // `from = 2` so damage on this line lands in block {2}.
        switch_line("1-2", 2, 1, 200.0, cap, SwitchClass::Rec, true, PROTECTION_AMPS, true),
        switch_line("1-3", 1, 3, 200.0, cap, SwitchClass::Rec, true, PROTECTION_AMPS, false),
        switch_line("2-3", 2, 3, 200.0, cap, SwitchClass::Sec, true, 0.0, true),
    ];
    Network::from_parts(4.16, 1000.0, buses, lines).expect("triangle network")
}

/// Fault on line 1-2; its own recloser tripped. No crews.
pub fn mini_triangle_fault() -> DamageScenario {
    DamageScenario {
        faults: vec![Fault {
            line: "1-2".to_string(),
            repair_minutes: 60.0,
        }],
        melted_fuses: vec![],
        post_protection_states: [("1-2".to_string(), false)].into_iter().collect(),
        fault_interrupt_amps: 2000.0,
        crews: vec![],
        depot: None,
        travel_minutes: BTreeMap::new(),
        costs: None,
    }
}

// ---------------------------------------------------------------------------
// 123-bus variant
// ---------------------------------------------------------------------------

const P: u8 = b'P'; // plain line
const C: u8 = b'C'; // circuit breaker
const R: u8 = b'R'; // recloser
const L: u8 = b'L'; // load-break switch
const S: u8 = b'S'; // sectionalizer, remote
const M: u8 = b'M'; // sectionalizer, manual
const F: u8 = b'F'; // fuse

/// 123-bus variant line list: (id, from, to, length ft, kind, initially
/// closed). `from` is the side damage is attributed to for switchable lines,
/// oriented along the normal feed direction.
#[rustfmt::skip]
const IEEE123_LINES: &[(&str, u32, u32, f64, u8, bool)] = &[
    ("149-150", 150, 149, 10.0, C, true),
    ("149-1", 149, 1, 400.0, P, true),
    ("1-2", 1, 2, 175.0, F, true),
    ("1-3", 1, 3, 250.0, F, true),
    ("3-4", 3, 4, 200.0, P, true),
    ("3-5", 3, 5, 325.0, P, true),
    ("5-6", 5, 6, 250.0, P, true),
    ("1-7", 1, 7, 300.0, R, true),
    ("7-8", 7, 8, 200.0, R, true),
    ("8-12", 8, 12, 225.0, F, true),
    ("8-9", 8, 9, 225.0, S, true),
    ("9-14", 9, 14, 425.0, F, true),
    ("14-10", 14, 10, 250.0, P, true),
    ("14-11", 14, 11, 250.0, P, true),
    ("8-13", 8, 13, 300.0, L, true),
    ("13-34", 13, 34, 150.0, P, true),
    ("34-15", 34, 15, 100.0, P, true),
    ("15-16", 15, 16, 375.0, F, true),
    ("15-17", 15, 17, 350.0, F, true),
    ("13-18", 13, 18, 825.0, S, false),
    ("13-152", 13, 152, 10.0, S, true),
    ("152-52", 152, 52, 400.0, P, true),
    ("18-19", 18, 19, 250.0, P, true),
    ("19-20", 19, 20, 325.0, P, true),
    ("18-21", 18, 21, 300.0, P, true),
    ("21-22", 21, 22, 525.0, P, true),
    ("21-23", 21, 23, 250.0, P, true),
    ("23-24", 23, 24, 550.0, P, true),
    ("23-25", 25, 23, 275.0, L, true),
    ("25-26", 25, 26, 350.0, P, true),
    ("26-27", 26, 27, 275.0, F, true),
    ("27-33", 27, 33, 500.0, P, true),
    ("26-31", 26, 31, 225.0, P, true),
    ("31-32", 31, 32, 300.0, P, true),
    ("25-28", 28, 25, 200.0, R, true),
    ("28-29", 28, 29, 300.0, P, true),
    ("29-30", 29, 30, 350.0, P, true),
    ("30-250", 250, 30, 200.0, S, true),
    ("250-251", 251, 250, 10.0, C, true),
    ("18-135", 18, 135, 10.0, S, true),
    ("135-35", 135, 35, 375.0, P, true),
    ("35-36", 35, 36, 650.0, F, true),
    ("36-37", 36, 37, 300.0, P, true),
    ("36-38", 36, 38, 250.0, S, true),
    ("38-39", 38, 39, 325.0, P, true),
    ("35-40", 40, 35, 250.0, R, true),
    ("40-41", 40, 41, 325.0, P, true),
    ("40-42", 40, 42, 250.0, P, true),
    ("42-43", 42, 43, 500.0, F, true),
    ("42-44", 42, 44, 200.0, P, true),
    ("44-45", 44, 45, 200.0, F, true),
    ("45-46", 45, 46, 300.0, P, true),
    ("44-47", 44, 47, 250.0, S, false),
    ("47-48", 47, 48, 150.0, P, true),
    ("47-49", 47, 49, 250.0, P, true),
    ("49-50", 50, 49, 250.0, L, true),
    ("50-51", 50, 51, 250.0, P, true),
    ("51-151", 151, 51, 500.0, P, true),
    ("151-300", 300, 151, 350.0, P, true),
    ("300-350", 350, 300, 10.0, C, false),
    ("108-300", 108, 300, 1000.0, R, true),
    ("52-53", 52, 53, 200.0, P, true),
    ("53-54", 53, 54, 125.0, P, true),
    ("54-55", 54, 55, 275.0, P, true),
    ("55-56", 55, 56, 275.0, P, true),
    ("54-57", 54, 57, 350.0, R, true),
    ("57-58", 57, 58, 250.0, P, true),
    ("58-59", 58, 59, 250.0, F, true),
    ("57-60", 57, 60, 750.0, P, true),
    ("60-61", 60, 61, 550.0, P, true),
    ("60-62", 60, 62, 250.0, R, true),
    ("62-63", 62, 63, 175.0, S, true),
    ("63-64", 63, 64, 350.0, P, true),
    ("64-65", 64, 65, 425.0, F, true),
    ("65-66", 65, 66, 325.0, P, true),
    ("54-94", 54, 94, 10.0, M, false),
    ("60-160", 60, 160, 10.0, M, false),
    ("160-67", 160, 67, 350.0, P, true),
    ("67-68", 67, 68, 200.0, P, true),
    ("68-69", 68, 69, 275.0, F, true),
    ("69-70", 69, 70, 325.0, P, true),
    ("70-71", 70, 71, 275.0, P, true),
    ("67-72", 67, 72, 275.0, P, true),
    ("72-73", 72, 73, 275.0, P, true),
    ("73-74", 73, 74, 350.0, P, true),
    ("74-75", 74, 75, 400.0, P, true),
    ("72-76", 72, 76, 200.0, R, true),
    ("76-77", 76, 77, 400.0, P, true),
    ("77-78", 77, 78, 100.0, P, true),
    ("78-79", 78, 79, 225.0, P, true),
    ("78-80", 78, 80, 475.0, M, true),
    ("80-81", 80, 81, 475.0, P, true),
    ("81-82", 81, 82, 250.0, P, true),
    ("82-83", 82, 83, 250.0, F, true),
    ("81-84", 81, 84, 675.0, S, true),
    ("84-85", 84, 85, 475.0, P, true),
    ("76-86", 76, 86, 700.0, S, true),
    ("86-87", 86, 87, 450.0, P, true),
    ("87-88", 87, 88, 175.0, P, true),
    ("87-89", 87, 89, 275.0, P, true),
    ("89-90", 89, 90, 225.0, P, true),
    ("89-91", 89, 91, 225.0, L, true),
    ("91-92", 91, 92, 300.0, P, true),
    ("91-93", 91, 93, 225.0, R, true),
    ("93-94", 93, 94, 275.0, P, true),
    ("93-95", 93, 95, 300.0, P, true),
    ("95-96", 95, 96, 200.0, P, true),
    ("95-195", 195, 95, 10.0, C, false),
    ("67-97", 97, 67, 250.0, S, true),
    ("97-98", 98, 97, 275.0, P, true),
    ("98-99", 99, 98, 550.0, R, true),
    ("99-100", 100, 99, 300.0, P, true),
    ("100-450", 450, 100, 800.0, P, true),
    ("450-451", 451, 450, 10.0, C, true),
    ("97-197", 97, 197, 10.0, S, true),
    ("101-197", 197, 101, 250.0, C, true),
    ("101-102", 101, 102, 225.0, P, true),
    ("102-103", 102, 103, 175.0, P, true),
    ("103-104", 103, 104, 700.0, P, true),
    ("101-105", 101, 105, 275.0, P, true),
    ("105-106", 105, 106, 225.0, S, true),
    ("106-107", 106, 107, 575.0, P, true),
    ("105-108", 105, 108, 325.0, P, true),
    ("108-109", 108, 109, 450.0, P, true),
    ("109-110", 109, 110, 300.0, R, true),
    ("110-111", 110, 111, 575.0, P, true),
    ("110-112", 110, 112, 125.0, S, true),
    ("112-113", 112, 113, 525.0, P, true),
    ("113-114", 113, 114, 325.0, P, true),
];

/// Spot loads, total kW per bus (split evenly over the three phases, with
/// reactive load at half the active value). Buses absent here carry none.
#[rustfmt::skip]
const IEEE123_LOADS: &[(u32, f64)] = &[
    (1, 40.0), (2, 20.0), (4, 40.0), (5, 20.0), (6, 40.0), (7, 20.0),
    (9, 40.0), (10, 20.0), (11, 40.0), (12, 20.0), (16, 40.0), (17, 20.0),
    (19, 40.0), (20, 40.0), (22, 40.0), (24, 40.0), (28, 40.0), (29, 40.0),
    (30, 40.0), (31, 20.0), (32, 20.0), (33, 40.0), (34, 40.0), (35, 40.0),
    (37, 40.0), (38, 20.0), (39, 20.0), (41, 20.0), (42, 20.0), (43, 40.0),
    (45, 20.0), (46, 20.0), (47, 105.0), (48, 210.0), (49, 140.0),
    (50, 40.0), (51, 20.0), (52, 40.0), (53, 40.0), (55, 20.0), (56, 20.0),
    (58, 20.0), (59, 20.0), (60, 20.0), (62, 40.0), (63, 40.0), (64, 75.0),
    (65, 140.0), (66, 75.0), (68, 20.0), (69, 40.0), (70, 20.0), (71, 40.0),
    (73, 40.0), (74, 40.0), (75, 40.0), (76, 245.0), (77, 40.0), (79, 40.0),
    (80, 40.0), (82, 40.0), (83, 20.0), (84, 20.0), (85, 40.0), (86, 20.0),
    (87, 40.0), (88, 40.0), (90, 40.0), (92, 40.0), (94, 40.0), (95, 20.0),
    (96, 20.0), (98, 40.0), (99, 40.0), (100, 40.0), (102, 20.0),
    (103, 40.0), (104, 40.0), (106, 40.0), (107, 40.0), (109, 40.0),
    (111, 20.0), (112, 20.0), (113, 40.0), (114, 20.0),
];

/// Substation buses; each supplies up to 2 MW and 1 Mvar per phase. In the
/// normal configuration 150, 251, and 451 carry the feeder while 350 and 195
/// stand by behind open breakers.
const IEEE123_SOURCES: &[u32] = &[150, 195, 251, 350, 451];

/// The 123-bus study network: five substations, 6 breakers, 11 reclosers,
/// 4 load-break switches, 17 sectionalizers (three manual: 54-94, 60-160,
/// 78-80), and 14 fuses — 51 bus blocks in all.
pub fn ieee123() -> Network {
    ieee123_with_lbs(LBS_AMPS_DEFAULT)
}

/// Same network with every load-break switch rated at `lbs_amps`.
pub fn ieee123_with_lbs(lbs_amps: f64) -> Network {
    let mut ids = BTreeSet::new();
    for &(_, from, to, _, _, _) in IEEE123_LINES {
        ids.insert(from);
        ids.insert(to);
    }
    let mut buses: Vec<Bus> = ids
        .into_iter()
        .map(|id| {
            let kw = IEEE123_LOADS
                .iter()
                .find(|(b, _)| *b == id)
                .map_or(0.0, |(_, kw)| *kw);
            bus(id, kw)
        })
        .collect();
    for &id in IEEE123_SOURCES {
        mark_source(&mut buses, id, 2000.0, 1000.0);
    }
    let cap = 3000.0;
    let lines = IEEE123_LINES
        .iter()
        .map(|&(id, from, to, len, kind, closed)| match kind {
            P => plain_line(id, from, to, len, cap),
            C => switch_line(id, from, to, len, cap, SwitchClass::Cb, true, PROTECTION_AMPS, closed),
            R => switch_line(id, from, to, len, cap, SwitchClass::Rec, true, PROTECTION_AMPS, closed),
            L => switch_line(id, from, to, len, cap, SwitchClass::Lbs, true, lbs_amps, closed),
            S => switch_line(id, from, to, len, cap, SwitchClass::Sec, true, 0.0, closed),
            M => switch_line(id, from, to, len, cap, SwitchClass::Sec, false, 0.0, closed),
            F => switch_line(id, from, to, len, cap, SwitchClass::Fuse, false, 0.0, closed),
            other => unreachable!("unknown line kind {other}"),
        })
        .collect();
    Network::from_parts(4.16, 5000.0, buses, lines).expect("123-bus network")
}

/// Single fault on line 18-21; the recloser at 25-28 tripped to clear it.
/// No crews — this scenario exercises topology and sequencing only.
pub fn test1_fault() -> DamageScenario {
    DamageScenario {
        faults: vec![Fault {
            line: "18-21".to_string(),
            repair_minutes: 240.0,
        }],
        melted_fuses: vec![],
        post_protection_states: [("25-28".to_string(), false)].into_iter().collect(),
        fault_interrupt_amps: 2000.0,
        crews: vec![],
        depot: None,
        travel_minutes: Default::default(),
        costs: None,
    }
}

/// Four simultaneous faults (28-29, 51-151, 99-100, 105-108). Protection
/// opened the breakers at 250-251 and 450-451 and the recloser at 108-300,
/// blacking out the whole 251 region and everything east.
pub fn test2_fault() -> DamageScenario {
    DamageScenario {
        faults: vec![
            Fault {
                line: "28-29".to_string(),
                repair_minutes: 240.0,
            },
            Fault {
                line: "51-151".to_string(),
                repair_minutes: 180.0,
            },
            Fault {
                line: "99-100".to_string(),
                repair_minutes: 200.0,
            },
            Fault {
                line: "105-108".to_string(),
                repair_minutes: 220.0,
            },
        ],
        melted_fuses: vec![],
        post_protection_states: [
            ("250-251".to_string(), false),
            ("108-300".to_string(), false),
            ("450-451".to_string(), false),
        ]
        .into_iter()
        .collect(),
        fault_interrupt_amps: 2000.0,
        crews: vec![],
        depot: None,
        travel_minutes: Default::default(),
        costs: None,
    }
}

/// The benchmark sequence computed as if every device were a remotely
/// operated breaker. Two of its closures drive sectionalizers that still
/// have an energized terminal.
pub fn test2_uniform_sequence() -> Vec<SwitchOp> {
    ops(&[
        ("67-97", Action::Open),
        ("95-195", Action::Close),
        ("25-28", Action::Open),
        ("13-18", Action::Close),
        ("49-50", Action::Open),
        ("44-47", Action::Close),
    ])
}

/// The device-aware sequence for the same scenario: dead-side closures are
/// arranged by opening the load-break switch at 8-13 around the 13-18
/// closure, and 44-47 closes while both regions are still dark.
pub fn test2_proposed_sequence() -> Vec<SwitchOp> {
    ops(&[
        ("67-97", Action::Open),
        ("95-195", Action::Close),
        ("44-47", Action::Close),
        ("25-28", Action::Open),
        ("49-50", Action::Open),
        ("8-13", Action::Open),
        ("13-18", Action::Close),
        ("8-13", Action::Close),
    ])
}

fn ops(steps: &[(&str, Action)]) -> Vec<SwitchOp> {
    steps
        .iter()
        .map(|(id, action)| SwitchOp {
            line_id: id.to_string(),
            action: *action,
        })
        .collect()
}

/// Seven faults in five bus blocks with the west breaker, the east breaker,
/// and two reclosers tripped and the fuse at 35-36 melted. Two operator
/// crews drive the manual sectionalizers; three repair crews work the
/// damage.
pub fn test3_fault() -> DamageScenario {
    let points: Vec<(String, f64, f64)> = vec![
        ("depot".to_string(), 0.0, 0.0),
        ("block:1".to_string(), -4.0, 1.0),
        ("block:36".to_string(), -1.0, 3.0),
        ("block:67".to_string(), 2.0, -2.0),
        ("block:86".to_string(), 4.0, -2.0),
        ("block:99".to_string(), 4.0, 2.0),
        ("switch:54-94".to_string(), 0.0, -3.0),
        ("switch:60-160".to_string(), 1.0, -1.0),
        ("switch:78-80".to_string(), 3.0, -3.0),
    ];
    DamageScenario {
        faults: vec![
            Fault {
                line: "149-1".to_string(),
                repair_minutes: 90.0,
            },
            Fault {
                line: "36-37".to_string(),
                repair_minutes: 45.0,
            },
            Fault {
                line: "73-74".to_string(),
                repair_minutes: 120.0,
            },
            Fault {
                line: "74-75".to_string(),
                repair_minutes: 60.0,
            },
            Fault {
                line: "86-87".to_string(),
                repair_minutes: 150.0,
            },
            Fault {
                line: "89-90".to_string(),
                repair_minutes: 100.0,
            },
            Fault {
                line: "99-100".to_string(),
                repair_minutes: 75.0,
            },
        ],
        melted_fuses: vec!["35-36".to_string()],
        post_protection_states: [
            ("149-150".to_string(), false),
            ("450-451".to_string(), false),
            ("98-99".to_string(), false),
            ("72-76".to_string(), false),
        ]
        .into_iter()
        .collect(),
        fault_interrupt_amps: 2000.0,
        crews: vec![
            Crew {
                id: "op1".to_string(),
                kind: CrewKind::Operator,
            },
            Crew {
                id: "op2".to_string(),
                kind: CrewKind::Operator,
            },
            Crew {
                id: "rep1".to_string(),
                kind: CrewKind::Repair,
            },
            Crew {
                id: "rep2".to_string(),
                kind: CrewKind::Repair,
            },
            Crew {
                id: "rep3".to_string(),
                kind: CrewKind::Repair,
            },
        ],
        depot: Some("depot".to_string()),
        travel_minutes: travel_matrix_from_points(&points, 5.0, 30.0),
        costs: None,
    }
}

// ---------------------------------------------------------------------------
// Eighteen-bus reduction example
// ---------------------------------------------------------------------------

/// A two-substation chain used by the reduction examples: eight bus blocks
/// formed by seven devices on a straight 18-bus feeder, normally split at
/// the open load-break tie between buses 10 and 11.
pub fn eighteen_bus() -> Network {
    let mut buses: Vec<Bus> = (1..=18)
        .map(|id| bus(id, if id == 1 || id == 18 { 0.0 } else { 90.0 }))
        .collect();
    mark_source(&mut buses, 1, 1000.0, 500.0);
    mark_source(&mut buses, 18, 1000.0, 500.0);
    let cap = 1500.0;
    let mut lines = Vec::new();
    for a in 1..18u32 {
        let b = a + 1;
        let id = format!("{a}-{b}");
        lines.push(match (a, b) {
            (1, _) | (17, _) => {
                switch_line(&id, a, b, 100.0, cap, SwitchClass::Cb, true, PROTECTION_AMPS, true)
            }
            (7, _) | (16, _) => {
                switch_line(&id, a, b, 150.0, cap, SwitchClass::Rec, true, PROTECTION_AMPS, true)
            }
            (4, _) | (13, _) => switch_line(&id, a, b, 150.0, cap, SwitchClass::Sec, true, 0.0, true),
            (10, _) => {
                switch_line(&id, a, b, 150.0, cap, SwitchClass::Lbs, true, LBS_AMPS_DEFAULT, false)
            }
            _ => plain_line(&id, a, b, 200.0, cap),
        });
    }
    Network::from_parts(4.16, 2000.0, buses, lines).expect("eighteen-bus network")
}

// ---------------------------------------------------------------------------
// Forty-block stress network
// ---------------------------------------------------------------------------

/// A long two-source chain of 40 two-bus blocks for step-budget stress
/// tests: 39 spine devices (reclosers roughly every sixth position,
/// sectionalizers elsewhere, normally split mid-chain) plus two open
/// load-break ties.
pub fn forty_block() -> Network {
    let mut buses: Vec<Bus> = (1..=80).map(|id| bus(id, 90.0)).collect();
    mark_source(&mut buses, 1, 2500.0, 1250.0);
    mark_source(&mut buses, 80, 2500.0, 1250.0);
    let cap = 3000.0;
    let mut lines = Vec::new();
    for k in 0..40u32 {
        let (a, b) = (2 * k + 1, 2 * k + 2);
        lines.push(plain_line(&format!("b{a}-{b}"), a, b, 250.0, cap));
    }
    for k in 0..39u32 {
        let (a, b) = (2 * k + 2, 2 * k + 3);
        let id = format!("t{a}-{b}");
        let breaker = k % 6 == 0 || k == 38;
        lines.push(if breaker {
            switch_line(&id, a, b, 100.0, cap, SwitchClass::Rec, true, PROTECTION_AMPS, true)
        } else {
            switch_line(&id, a, b, 100.0, cap, SwitchClass::Sec, true, 0.0, k != 20)
        });
    }
    lines.push(switch_line("t11-70", 11, 70, 100.0, cap, SwitchClass::Lbs, true, LBS_AMPS_DEFAULT, false));
    lines.push(switch_line("t31-50", 31, 50, 100.0, cap, SwitchClass::Lbs, true, LBS_AMPS_DEFAULT, false));
    Network::from_parts(4.16, 5000.0, buses, lines).expect("forty-block network")
}

/// Eight faults spread over the forty-block chain, every sixth-position
/// recloser between a source and a fault tripped.
pub fn forty_block_fault() -> DamageScenario {
    let fault_blocks = [2u32, 7, 12, 17, 22, 27, 32, 37];
    let faults = fault_blocks
        .iter()
        .map(|k| Fault {
            line: format!("b{}-{}", 2 * k + 1, 2 * k + 2),
            repair_minutes: 120.0,
        })
        .collect();
    let tripped = [0u32, 6, 12, 24, 30, 36, 38];
    DamageScenario {
        faults,
        melted_fuses: vec![],
        post_protection_states: tripped
            .iter()
            .map(|k| (format!("t{}-{}", 2 * k + 2, 2 * k + 3), false))
            .collect(),
        fault_interrupt_amps: 2000.0,
        crews: vec![],
        depot: None,
        travel_minutes: Default::default(),
        costs: None,
    }
}

// ---------------------------------------------------------------------------
// Seeded random instances for the enumeration cross-checks
// ---------------------------------------------------------------------------

struct RandomNetParams {
    min_bus: u32,
    max_bus: u32,
    max_switches: usize,
    tie_chance: f64,
    second_source_chance: f64,
}

/// Random radial network: a spanning tree over a random bus count, every
/// source guarded by a breaker on its first edge, optional open switched
/// ties, device classes mixed. Deterministic in the RNG state.
fn random_net(rng: &mut ChaCha8Rng, p: &RandomNetParams) -> Network {
    let n = rng.gen_range(p.min_bus..=p.max_bus);
    let mut buses: Vec<Bus> = (1..=n)
        .map(|id| bus(id, rng.gen_range(30.0..120.0)))
        .collect();
    mark_source(&mut buses, 1, 3000.0, 1500.0);
    let cap = 2500.0;
    let mut lines = Vec::new();
    let mut parent = vec![0u32; n as usize + 1];
    // Edge 1-2 is always the source breaker; the rest of the tree hangs off
    // random earlier buses.
    for child in 2..=n {
        let par = if child == 2 {
            1
        } else {
            rng.gen_range(1..child)
        };
        parent[child as usize] = par;
        let id = format!("{par}-{child}");
        let switches_so_far = lines.iter().filter(|l: &&Line| l.is_switch()).count();
        let line = if child == 2 {
            switch_line(&id, par, child, 150.0, cap, SwitchClass::Cb, true, PROTECTION_AMPS, true)
        } else if switches_so_far < p.max_switches && rng.gen_bool(0.55) {
            let class = match rng.gen_range(0..10) {
                0..=2 => SwitchClass::Rec,
                3..=5 => SwitchClass::Lbs,
                _ => SwitchClass::Sec,
            };
            let amps = match class {
                SwitchClass::Rec => PROTECTION_AMPS,
                SwitchClass::Lbs => rng.gen_range(200.0..600.0),
                _ => 0.0,
            };
            switch_line(&id, par, child, 200.0, cap, class, true, amps, true)
        } else {
            plain_line(&id, par, child, 200.0, cap)
        };
        lines.push(line);
    }
    // Optional open tie between two unconnected buses.
    if n >= 5 && rng.gen_bool(p.tie_chance) {
        let a = rng.gen_range(2..=n);
        let b = rng.gen_range(2..=n);
        let id = format!("t{a}-{b}");
        if a != b
            && parent[a as usize] != b
            && parent[b as usize] != a
            && !lines.iter().any(|l| l.id == id)
        {
            let class = if rng.gen_bool(0.5) {
                SwitchClass::Lbs
            } else {
                SwitchClass::Sec
            };
            let amps = if class == SwitchClass::Lbs { 400.0 } else { 0.0 };
            lines.push(switch_line(&id, a, b, 200.0, cap, class, true, amps, false));
        }
    }
    // Optional second source at the deepest leaf, isolated by opening the
    // first switch on its path toward bus 1 (stays radial, one source per
    // island). Without such a switch the second source is skipped.
    if rng.gen_bool(p.second_source_chance) {
        let mut depth = vec![0u32; n as usize + 1];
        for busid in 2..=n {
            depth[busid as usize] = depth[parent[busid as usize] as usize] + 1;
        }
        let leaf = (2..=n).max_by_key(|&b| depth[b as usize]).unwrap();
        let mut cur = leaf;
        let mut cut = None;
        while cur != 1 {
            let par = parent[cur as usize];
            let id = format!("{par}-{cur}");
            if let Some(line) = lines.iter_mut().find(|l| l.id == id) {
                if let Some(sw) = line.switch.as_mut() {
                    if sw.class != SwitchClass::Cb {
                        sw.initial_closed = false;
                        cut = Some(());
                        break;
                    }
                }
            }
            cur = par;
        }
        if cut.is_some() {
            mark_source(&mut buses, leaf, 3000.0, 1500.0);
        }
    }
    Network::from_parts(4.16, 2000.0, buses, lines).expect("random network")
}

/// Protection response: for each fault, the breaker-class device closest to
/// the fault on the initially closed path from each source opens. The fault
/// line itself never counts as its own protection.
fn protection_trips(net: &Network, fault_lines: &[String]) -> Vec<String> {
    use std::collections::VecDeque;
    let closed_adj = |exclude: &str| {
        let mut adj: std::collections::BTreeMap<u32, Vec<&Line>> = Default::default();
        for line in &net.lines {
            let closed = line
                .switch
                .as_ref()
                .map(|sw| sw.initial_closed)
                .unwrap_or(true);
            if closed && line.id != exclude {
                adj.entry(line.from).or_default().push(line);
                adj.entry(line.to).or_default().push(line);
            }
        }
        adj
    };
    let mut tripped = BTreeSet::new();
    for fid in fault_lines {
        let fault = net.line(fid).expect("fault line");
        let adj = closed_adj(fid);
        for source in net.source_buses() {
            // BFS from the fault's `from` bus back to this source over
            // initially closed lines, then take the breaker nearest the
            // fault on that path.
            let mut prev: std::collections::BTreeMap<u32, &Line> = Default::default();
            let mut seen = BTreeSet::from([fault.from]);
            let mut queue = VecDeque::from([fault.from]);
            while let Some(busid) = queue.pop_front() {
                if busid == source.id {
                    break;
                }
                for line in adj.get(&busid).into_iter().flatten() {
                    let other = if line.from == busid { line.to } else { line.from };
                    if seen.insert(other) {
                        prev.insert(other, line);
                        queue.push_back(other);
                    }
                }
            }
            if !seen.contains(&source.id) {
                continue;
            }
            let mut cur = source.id;
            let mut nearest = None;
            while cur != fault.from {
                let line = prev[&cur];
                if line
                    .switch
                    .as_ref()
                    .is_some_and(|sw| sw.class.is_breaker_class())
                {
                    nearest = Some(line.id.clone());
                }
                cur = if line.from == cur { line.to } else { line.from };
            }
            // Walking from the source toward the fault keeps the last
            // breaker seen, i.e. the one nearest the fault.
            if let Some(id) = nearest {
                tripped.insert(id);
            }
        }
    }
    tripped.into_iter().collect()
}

fn random_faults(rng: &mut ChaCha8Rng, net: &Network, count: usize) -> Vec<Fault> {
    let mut picked = BTreeSet::new();
    while picked.len() < count {
        let line = &net.lines[rng.gen_range(0..net.lines.len())];
        picked.insert(line.id.clone());
    }
    picked
        .into_iter()
        .map(|line| Fault {
            line,
            repair_minutes: rng.gen_range(60.0..240.0),
        })
        .collect()
}

fn scenario_for(net: &Network, faults: Vec<Fault>) -> DamageScenario {
    let ids: Vec<String> = faults.iter().map(|f| f.line.clone()).collect();
    DamageScenario {
        faults,
        melted_fuses: vec![],
        post_protection_states: protection_trips(net, &ids)
            .into_iter()
            .map(|id| (id, false))
            .collect(),
        fault_interrupt_amps: 2000.0,
        crews: vec![],
        depot: None,
        travel_minutes: Default::default(),
        costs: None,
    }
}

/// Random instance for the topology enumeration cross-check: at most 13
/// switch edges, one or two faults, protection already acted.
pub fn random_topology_instance(seed: u64) -> (Network, DamageScenario) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(1));
    let net = random_net(
        &mut rng,
        &RandomNetParams {
            min_bus: 6,
            max_bus: 10,
            max_switches: 11,
            tie_chance: 0.7,
            second_source_chance: 0.25,
        },
    );
    let count = if rng.gen_bool(0.3) { 2 } else { 1 };
    let faults = random_faults(&mut rng, &net, count);
    let scenario = scenario_for(&net, faults);
    (net, scenario)
}

/// Random instance for the sequence enumeration cross-check: at most six
/// switch edges and a single fault.
pub fn random_sequence_instance(seed: u64) -> (Network, DamageScenario) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x51_7c_c1b7).wrapping_add(2));
    let net = random_net(
        &mut rng,
        &RandomNetParams {
            min_bus: 5,
            max_bus: 8,
            max_switches: 4,
            tie_chance: 0.5,
            second_source_chance: 0.2,
        },
    );
    let faults = random_faults(&mut rng, &net, 1);
    let scenario = scenario_for(&net, faults);
    (net, scenario)
}

/// Random instance for the routing enumeration cross-check: two or three
/// damaged blocks, one or two repair crews, random symmetric travel times.
pub fn random_routing_instance(seed: u64) -> (Network, DamageScenario) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_f491).wrapping_add(3));
    loop {
        let net = random_net(
            &mut rng,
            &RandomNetParams {
                min_bus: 7,
                max_bus: 10,
                max_switches: 8,
                tie_chance: 0.4,
                second_source_chance: 0.2,
            },
        );
        let target = rng.gen_range(2..=3usize);
        let faults = random_faults(&mut rng, &net, target);
        let red = crate::reduction::reduce(&net.with_damage(&DamageScenario {
            faults: faults.clone(),
            melted_fuses: vec![],
            post_protection_states: Default::default(),
            fault_interrupt_amps: 2000.0,
            crews: vec![],
            depot: None,
            travel_minutes: Default::default(),
            costs: None,
        }));
        let damaged = crate::reduction::damaged_blocks(
            &net.with_damage(&DamageScenario {
                faults: faults.clone(),
                melted_fuses: vec![],
                post_protection_states: Default::default(),
                fault_interrupt_amps: 2000.0,
                crews: vec![],
                depot: None,
                travel_minutes: Default::default(),
                costs: None,
            }),
            &red,
        );
        if damaged.len() < 2 || damaged.len() > 3 {
            continue;
        }
        let mut scenario = scenario_for(&net, faults);
        let crews = rng.gen_range(1..=2);
        for c in 1..=crews {
            scenario.crews.push(Crew {
                id: format!("rep{c}"),
                kind: CrewKind::Repair,
            });
        }
        scenario.depot = Some("depot".to_string());
        let mut points: Vec<(String, f64, f64)> =
            vec![("depot".to_string(), 0.0, 0.0)];
        for b in &damaged {
            points.push((
                format!("block:{}", red.blocks[*b].id),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            ));
        }
        scenario.travel_minutes = travel_matrix_from_points(&points, 5.0, 30.0);
        return (net, scenario);
    }
}

// ---------------------------------------------------------------------------
// File materialization
// ---------------------------------------------------------------------------

fn write_json(dir: &Path, name: &str, text: String) -> io::Result<()> {
    let mut text = text;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    std::fs::write(dir.join(name), text)
}

/// Write every bundled fixture as JSON under `dir` (created if missing).
pub fn write_fixture_files(dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let pretty = |v: &DamageScenario| serde_json::to_string_pretty(v).expect("scenario json");
    let plan = |v: &[SwitchOp]| serde_json::to_string_pretty(v).expect("plan json");
    write_json(dir, "seven_bus.json", seven_bus().to_json())?;
    write_json(dir, "seven_bus_fault.json", pretty(&seven_bus_fault()))?;
    write_json(dir, "ieee123.json", ieee123().to_json())?;
    write_json(dir, "ieee123_lbs50.json", ieee123_with_lbs(LBS_AMPS_LOW).to_json())?;
    write_json(dir, "eighteen_bus.json", eighteen_bus().to_json())?;
    write_json(dir, "forty_block.json", forty_block().to_json())?;
    write_json(dir, "forty_block_fault.json", pretty(&forty_block_fault()))?;
    write_json(dir, "test1_fault.json", pretty(&test1_fault()))?;
    write_json(dir, "test2_fault.json", pretty(&test2_fault()))?;
    write_json(dir, "test3_fault.json", pretty(&test3_fault()))?;
    write_json(dir, "test2_uniform_plan.json", plan(&test2_uniform_sequence()))?;
    write_json(dir, "test2_proposed_plan.json", plan(&test2_proposed_sequence()))?;
    write_json(
        dir,
        "costs_default.json",
        serde_json::to_string_pretty(&CostParams::default()).expect("costs json"),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_network, parse_scenario, validate_scenario};
    use crate::reduction::{damaged_blocks, reduce};
    use crate::rules::{initial_closed_states, propagate, ActiveDamage};

    fn census(net: &Network) -> std::collections::BTreeMap<SwitchClass, usize> {
        let mut out = std::collections::BTreeMap::new();
        for line in &net.lines {
            if let Some(sw) = &line.switch {
                *out.entry(sw.class).or_insert(0) += 1;
            }
        }
        out
    }

    /// Closed lines must form a forest with every bus energized by exactly
    /// one substation — the normal operating state of each fixture.
    fn assert_normal_state_radial_and_served(net: &Network) {
        let red = reduce(net);
        let closed: Vec<bool> = red
            .edges
            .iter()
            .map(|e| net.lines[e.line].switch.as_ref().unwrap().initial_closed)
            .collect();
        let prop = propagate(&red, &closed, &ActiveDamage::none(&red));
        for (b, block) in red.blocks.iter().enumerate() {
            assert!(
                prop.energized[b],
                "block {} not energized in the normal state",
                block.id
            );
        }
        // Radial: per island, closed switch edges + internal plain lines
        // must come to island size minus one.
        let mut island_blocks: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (b, island) in prop.island.iter().enumerate() {
            island_blocks.entry(*island).or_default().push(b);
        }
        for blocks in island_blocks.values() {
            let buses: usize = blocks.iter().map(|b| red.blocks[*b].buses.len()).sum();
            let in_island: std::collections::BTreeSet<usize> =
                blocks.iter().copied().collect();
            let closed_edges = red
                .edges
                .iter()
                .enumerate()
                .filter(|(i, e)| {
                    closed[*i] && in_island.contains(&e.from_block) && in_island.contains(&e.to_block)
                })
                .count();
            let plain_edges = net.lines.iter().filter(|l| l.switch.is_none()).filter(|l| {
                red.block_of(l.from)
                    .is_some_and(|b| in_island.contains(&b))
            });
            let total = closed_edges + plain_edges.count();
            assert_eq!(
                total,
                buses - 1,
                "island with blocks {blocks:?} is not a tree"
            );
            let sources = blocks
                .iter()
                .filter(|b| red.blocks[**b].is_source())
                .count();
            assert_eq!(sources, 1, "island with blocks {blocks:?} needs one source");
        }
    }

    #[test]
    fn seven_bus_shape() {
        let net = seven_bus();
        assert_eq!(net.buses.len(), 7);
        assert_eq!(net.lines.len(), 7);
        let red = reduce(&net);
        assert_eq!(red.blocks.len(), 6);
        assert_normal_state_radial_and_served(&net);
        let scenario = seven_bus_fault();
        assert!(validate_scenario(&net, &scenario).is_empty());
        let damaged = damaged_blocks(&net.with_damage(&scenario), &reduce(&net.with_damage(&scenario)));
        let red = reduce(&net.with_damage(&scenario));
        assert_eq!(damaged.len(), 1);
        assert_eq!(red.blocks[damaged[0]].buses, vec![4]);
    }

    #[test]
    fn ieee123_counts_and_census() {
        let net = ieee123();
        assert_eq!(net.buses.len(), 128);
        assert_eq!(net.lines.len(), 129);
        let census = census(&net);
        assert_eq!(census[&SwitchClass::Cb], 6);
        assert_eq!(census[&SwitchClass::Rec], 11);
        assert_eq!(census[&SwitchClass::Lbs], 4);
        assert_eq!(census[&SwitchClass::Sec], 17);
        assert_eq!(census[&SwitchClass::Fuse], 14);
        let manual: Vec<&str> = net
            .lines
            .iter()
            .filter(|l| {
                l.switch
                    .as_ref()
                    .is_some_and(|sw| sw.class == SwitchClass::Sec && !sw.remote)
            })
            .map(|l| l.id.as_str())
            .collect();
        assert_eq!(manual, vec!["54-94", "60-160", "78-80"]);
        let total_kw: f64 = net.buses.iter().map(|b| b.total_load_kw()).sum();
        assert!((total_kw - 3490.0).abs() < 1e-9);
        assert_eq!(net.source_buses().count(), 5);
    }

    #[test]
    fn ieee123_reduces_to_51_blocks() {
        let red = reduce(&ieee123());
        assert_eq!(red.blocks.len(), 51);
        assert_eq!(red.edges.len(), 52);
    }

    #[test]
    fn ieee123_normal_state_is_radial_and_fully_served() {
        assert_normal_state_radial_and_served(&ieee123());
    }

    #[test]
    fn ieee123_round_trips_through_json() {
        let net = ieee123();
        let parsed = parse_network(&net.to_json(), "mem").expect("round trip");
        assert_eq!(parsed.buses.len(), net.buses.len());
        assert_eq!(parsed.lines.len(), net.lines.len());
        assert_eq!(parsed.source_buses().count(), 5);
    }

    #[test]
    fn test1_outage_region_matches_the_tripped_recloser() {
        let net = ieee123();
        let scenario = test1_fault();
        assert!(validate_scenario(&net, &scenario).is_empty());
        let damaged_net = net.with_damage(&scenario);
        let red = reduce(&damaged_net);
        let closed = initial_closed_states(&damaged_net, &red, &scenario);
        let prop = propagate(&red, &closed, &ActiveDamage::full(&red));
        let dark: BTreeSet<u32> = red
            .blocks
            .iter()
            .enumerate()
            .filter(|(b, _)| !prop.energized[*b])
            .flat_map(|(_, blk)| blk.buses.iter().copied())
            .collect();
        // Everything fed through the tripped recloser at 25-28 is dark; the
        // standby substations behind open breakers stay live on their own.
        let expected: BTreeSet<u32> = [
            25, 26, 27, 31, 32, 33, 23, 24, 21, 22, 18, 19, 20, 135, 35, 36, 37, 38, 39, 40, 41,
            42, 43, 44, 45, 46,
        ]
        .into_iter()
        .collect();
        assert_eq!(dark, expected);
        let damaged = damaged_blocks(&damaged_net, &red);
        assert_eq!(damaged.len(), 1);
        assert_eq!(
            red.blocks[damaged[0]].buses,
            vec![18, 19, 20, 21, 22, 23, 24]
        );
    }

    #[test]
    fn test2_blackout_covers_the_east_and_the_251_region() {
        let net = ieee123();
        let scenario = test2_fault();
        assert!(validate_scenario(&net, &scenario).is_empty());
        let damaged_net = net.with_damage(&scenario);
        let red = reduce(&damaged_net);
        let closed = initial_closed_states(&damaged_net, &red, &scenario);
        let prop = propagate(&red, &closed, &ActiveDamage::full(&red));
        let energized: BTreeSet<u32> = red
            .blocks
            .iter()
            .enumerate()
            .filter(|(b, _)| prop.energized[*b])
            .flat_map(|(_, blk)| blk.buses.iter().copied())
            .collect();
        // Only the 150 feed survives protection; the other substation buses
        // stay live on their own but feed nothing.
        let expected: BTreeSet<u32> = [
            150, 149, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 34, 152, 52, 53,
            54, 55, 56, 57, 58, 59, 60, 61, 62, 63, 64, 65, 66, 195, 251, 350, 451,
        ]
        .into_iter()
        .collect();
        assert_eq!(energized, expected);
        assert_eq!(damaged_blocks(&damaged_net, &red).len(), 4);
    }

    #[test]
    fn test3_has_five_damaged_blocks_and_consistent_travel() {
        let net = ieee123();
        let scenario = test3_fault();
        assert!(validate_scenario(&net, &scenario).is_empty());
        let damaged_net = net.with_damage(&scenario);
        let red = reduce(&damaged_net);
        let damaged = damaged_blocks(&damaged_net, &red);
        let ids: Vec<u32> = damaged.iter().map(|b| red.blocks[*b].id).collect();
        assert_eq!(ids, vec![1, 36, 67, 86, 99]);
        // Every damaged block and every manual switch is reachable from the
        // depot in the travel table.
        for id in &ids {
            assert!(
                scenario.travel("depot", &format!("block:{id}")).is_some(),
                "no travel time to block {id}"
            );
        }
        for sw in ["54-94", "60-160", "78-80"] {
            assert!(scenario.travel("depot", &format!("switch:{sw}")).is_some());
        }
        let times: Vec<f64> = scenario
            .travel_minutes
            .values()
            .flat_map(|row| row.values().copied())
            .collect();
        assert!(times.iter().all(|t| (5.0..=30.0).contains(t)));
    }

    #[test]
    fn eighteen_bus_shape() {
        let net = eighteen_bus();
        assert_eq!(net.buses.len(), 18);
        let red = reduce(&net);
        assert_eq!(red.blocks.len(), 8);
        assert_normal_state_radial_and_served(&net);
    }

    #[test]
    fn forty_block_shape() {
        let net = forty_block();
        let red = reduce(&net);
        assert_eq!(red.blocks.len(), 40);
        assert_normal_state_radial_and_served(&net);
        let scenario = forty_block_fault();
        assert!(validate_scenario(&net, &scenario).is_empty());
        let damaged_net = net.with_damage(&scenario);
        assert_eq!(damaged_blocks(&damaged_net, &reduce(&damaged_net)).len(), 8);
    }

    #[test]
    fn random_instances_are_valid_and_within_bounds() {
        for seed in 0..40 {
            let (net, scenario) = random_topology_instance(seed);
            assert!(validate_scenario(&net, &scenario).is_empty(), "seed {seed}");
            let switches = net.lines.iter().filter(|l| l.is_switch()).count();
            assert!(switches <= 16, "seed {seed}: {switches} switches");

            let (net, scenario) = random_sequence_instance(seed);
            assert!(validate_scenario(&net, &scenario).is_empty(), "seed {seed}");
            let switches = net.lines.iter().filter(|l| l.is_switch()).count();
            assert!(switches <= 6, "seed {seed}: {switches} switches");
            assert_eq!(scenario.faults.len(), 1);

            let (net, scenario) = random_routing_instance(seed);
            assert!(validate_scenario(&net, &scenario).is_empty(), "seed {seed}");
            let damaged_net = net.with_damage(&scenario);
            let red = reduce(&damaged_net);
            let damaged = damaged_blocks(&damaged_net, &red);
            assert!((2..=3).contains(&damaged.len()), "seed {seed}");
            assert!(!scenario.crews.is_empty());
            for b in damaged {
                let key = format!("block:{}", red.blocks[b].id);
                assert!(
                    scenario.travel(scenario.depot_key(), &key).is_some(),
                    "seed {seed}: no travel to {key}"
                );
            }
        }
    }

    #[test]
    fn random_instances_are_deterministic() {
        let (a1, s1) = random_topology_instance(7);
        let (a2, s2) = random_topology_instance(7);
        assert_eq!(a1.to_json(), a2.to_json());
        assert_eq!(
            serde_json::to_string(&s1).unwrap(),
            serde_json::to_string(&s2).unwrap()
        );
    }

    #[test]
    fn scenarios_round_trip_through_json() {
        let net = ieee123();
        for scenario in [test1_fault(), test2_fault(), test3_fault()] {
            let text = serde_json::to_string_pretty(&scenario).unwrap();
            let parsed = parse_scenario(&text, "mem", &net).expect("scenario parse");
            assert_eq!(parsed.faults.len(), scenario.faults.len());
            assert_eq!(parsed.crews.len(), scenario.crews.len());
        }
    }

    #[test]
    fn materialize_fixture_files() {
        if std::env::var_os("GRIDRESTORE_WRITE_FIXTURES").is_none() {
            return;
        }
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
        write_fixture_files(&dir).expect("write fixtures");
    }
}
