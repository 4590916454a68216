//! Domain types for the physical network, damage scenarios, crews, and cost
//! parameters, plus JSON loading and validation.
//!
//! Conventions used throughout the library:
//!
//! * Loads and generation limits are kept in kW / kvar as loaded; model
//!   builders convert to per-unit on `base_kva` where needed.
//! * Line impedances are entered in ohms as 3x3 phase matrices (row-major,
//!   `[re, im]` pairs) and converted to per-unit internally.
//! * Bus voltages are handled as squared per-unit magnitudes.
//! * Switch ratings are amperes; a de-energized bus is treated as 1.0 pu when
//!   converting a rating into a squared-power bound.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use num_complex::Complex64;

/// One of the three phases. Used to index per-phase arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    A = 0,
    B = 1,
    C = 2,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            Phase::A => 'a',
            Phase::B => 'b',
            Phase::C => 'c',
        }
    }
}

/// Presence mask over the three phases, serialized as a string like `"abc"`
/// or `"ca"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseSet(pub [bool; 3]);

impl PhaseSet {
    pub fn all() -> Self {
        PhaseSet([true, true, true])
    }

    pub fn contains(&self, p: Phase) -> bool {
        self.0[p.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = Phase> + '_ {
        Phase::ALL.into_iter().filter(|p| self.contains(*p))
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn is_subset_of(&self, other: &PhaseSet) -> bool {
        Phase::ALL
            .into_iter()
            .all(|p| !self.contains(p) || other.contains(p))
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in Phase::ALL {
            if self.contains(p) {
                write!(f, "{}", p.letter())?;
            }
        }
        Ok(())
    }
}

impl Serialize for PhaseSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PhaseSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let mut mask = [false; 3];
        for ch in text.chars() {
            match ch.to_ascii_lowercase() {
                'a' => mask[0] = true,
                'b' => mask[1] = true,
                'c' => mask[2] = true,
                other => {
                    return Err(serde::de::Error::custom(format!(
                        "invalid phase letter '{other}' (expected a, b, c)"
                    )))
                }
            }
        }
        if mask == [false; 3] {
            return Err(serde::de::Error::custom("empty phase set"));
        }
        Ok(PhaseSet(mask))
    }
}

fn default_priority() -> f64 {
    1.0
}
fn default_v_min() -> f64 {
    0.9
}
fn default_v_max() -> f64 {
    1.1
}
fn default_phases() -> PhaseSet {
    PhaseSet::all()
}

/// A network bus. Source limits are filled in from the document's `sources`
/// array by `load_network`; they are zero for ordinary buses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    #[serde(default = "default_phases")]
    pub phases: PhaseSet,
    /// Active load per phase, kW.
    #[serde(default)]
    pub load_kw: [f64; 3],
    /// Reactive load per phase, kvar.
    #[serde(default)]
    pub load_kvar: [f64; 3],
    /// Load priority weight (the per-kW weight this bus's shed load carries
    /// in objectives).
    #[serde(default = "default_priority")]
    pub priority: f64,
    /// Lower voltage bound, per unit (not squared).
    #[serde(default = "default_v_min")]
    pub v_min_pu: f64,
    /// Upper voltage bound, per unit (not squared).
    #[serde(default = "default_v_max")]
    pub v_max_pu: f64,
    /// Filled from the `sources` document array.
    #[serde(skip)]
    pub source: Option<SourceLimits>,
}

impl Bus {
    pub fn is_source(&self) -> bool {
        self.source.is_some()
    }

    pub fn total_load_kw(&self) -> f64 {
        self.load_kw.iter().sum()
    }
}

/// Per-phase generation limits for a substation bus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceLimits {
    pub bus: u32,
    pub p_max_kw: [f64; 3],
    pub q_max_kvar: [f64; 3],
}

/// Switching device classes. Breakers and reclosers can operate under fault
/// current; load-break switches interrupt load current only; sectionalizers
/// operate de-energized; fuses are never operated, only replaced by a repair
/// crew after melting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchClass {
    Cb,
    Rec,
    Lbs,
    Sec,
    Fuse,
}

impl SwitchClass {
    pub fn label(self) -> &'static str {
        match self {
            SwitchClass::Cb => "CB",
            SwitchClass::Rec => "REC",
            SwitchClass::Lbs => "LBS",
            SwitchClass::Sec => "SEC",
            SwitchClass::Fuse => "FUSE",
        }
    }

    /// Counts toward the step estimate as a breaker-class device (one step)
    /// rather than a three-step device.
    pub fn is_breaker_class(self) -> bool {
        matches!(self, SwitchClass::Cb | SwitchClass::Rec)
    }
}

fn default_true() -> bool {
    true
}

/// A switching device attached to a line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwitchSpec {
    pub class: SwitchClass,
    /// Remotely operable. Manual devices need a crew on site.
    #[serde(default = "default_true")]
    pub remote: bool,
    /// Maximum current the device may interrupt when opening, amperes.
    #[serde(default)]
    pub breaking_amps: f64,
    /// Maximum current the device may establish when closing, amperes.
    #[serde(default)]
    pub making_amps: f64,
    /// Time to drive the device once on site (or remotely), minutes.
    /// Defaults per class: 1 for remote devices, 15 for manual ones.
    #[serde(default)]
    pub op_time_min: Option<f64>,
    #[serde(default = "default_true")]
    pub initial_closed: bool,
}

impl SwitchSpec {
    pub fn op_time(&self, costs: &CostParams) -> f64 {
        self.op_time_min.unwrap_or(if self.remote {
            costs.remote_op_min
        } else {
            costs.manual_op_min
        })
    }
}

/// A line between two buses, optionally carrying a switch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from: u32,
    pub to: u32,
    #[serde(default = "default_phases")]
    pub phases: PhaseSet,
    /// 3x3 phase impedance matrix in ohms, row-major, entries as `[re, im]`.
    /// Rows/columns for absent phases are zero.
    pub impedance_ohm: [[[f64; 2]; 3]; 3],
    /// Apparent-power capacity per phase, kVA.
    pub capacity_kva: f64,
    #[serde(default)]
    pub switch: Option<SwitchSpec>,
    /// Set from the active damage scenario, never by `load_network`.
    #[serde(skip)]
    pub is_damaged: bool,
    /// Repair duration in minutes; present iff damaged.
    #[serde(skip)]
    pub repair_time_min: Option<f64>,
}

impl Line {
    pub fn is_switch(&self) -> bool {
        self.switch.is_some()
    }

    pub fn impedance_pu(&self, z_base_ohm: f64) -> [[Complex64; 3]; 3] {
        let mut z = [[Complex64::new(0.0, 0.0); 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                z[r][c] = Complex64::new(self.impedance_ohm[r][c][0], self.impedance_ohm[r][c][1])
                    / z_base_ohm;
            }
        }
        z
    }
}

/// Crew kinds: operators drive manual switches, repair crews fix damaged
/// lines and replace melted fuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrewKind {
    Operator,
    Repair,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Crew {
    pub id: String,
    pub kind: CrewKind,
}

/// A single faulted line and how long its repair takes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fault {
    pub line: String,
    pub repair_minutes: f64,
}

fn default_fault_amps() -> f64 {
    2000.0
}

/// A damage scenario: what is faulted, what protection already did, and which
/// crews are available from where.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DamageScenario {
    pub faults: Vec<Fault>,
    #[serde(default)]
    pub melted_fuses: Vec<String>,
    /// Switch states after protection acted, keyed by line id; `true` means
    /// closed. Switches not listed keep their configured initial state.
    #[serde(default)]
    pub post_protection_states: BTreeMap<String, bool>,
    /// Fault current the protection-class devices must be rated to interrupt.
    #[serde(default = "default_fault_amps")]
    pub fault_interrupt_amps: f64,
    #[serde(default)]
    pub crews: Vec<Crew>,
    /// Location key the crews start from; must appear in `travel_minutes`.
    #[serde(default)]
    pub depot: Option<String>,
    /// Travel times in minutes between location keys. Keys are `depot`,
    /// `switch:<line-id>` for manual switches, `block:<block-id>` for bus
    /// blocks.
    #[serde(default)]
    pub travel_minutes: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub costs: Option<CostParams>,
}

impl DamageScenario {
    pub fn depot_key(&self) -> &str {
        self.depot.as_deref().unwrap_or("depot")
    }

    pub fn travel(&self, from: &str, to: &str) -> Option<f64> {
        if from == to {
            return Some(0.0);
        }
        self.travel_minutes
            .get(from)
            .and_then(|row| row.get(to))
            .or_else(|| self.travel_minutes.get(to).and_then(|row| row.get(from)))
            .copied()
    }

    pub fn fault_line_ids(&self) -> BTreeSet<&str> {
        self.faults.iter().map(|f| f.line.as_str()).collect()
    }
}

fn default_rho_load() -> f64 {
    1.0
}
fn default_rho_switch() -> f64 {
    0.1
}
fn default_rho_time() -> f64 {
    0.01
}
fn default_rho_travel() -> f64 {
    0.01
}
fn default_max_wait() -> f64 {
    30.0
}
fn default_max_steps() -> u32 {
    25
}
fn default_dt() -> f64 {
    30.0
}
fn default_remote_op() -> f64 {
    1.0
}
fn default_manual_op() -> f64 {
    15.0
}
fn default_segments() -> u32 {
    12
}

/// Objective weights and global operational parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostParams {
    /// Weight per kW of shed load (scaled further by each bus's priority).
    #[serde(default = "default_rho_load")]
    pub rho_load: f64,
    /// Cost per switching operation.
    #[serde(default = "default_rho_switch")]
    pub rho_switch: f64,
    /// Per-class overrides of `rho_switch`.
    #[serde(default)]
    pub rho_switch_overrides: BTreeMap<SwitchClass, f64>,
    /// Weight per minute of elapsed sequence time.
    #[serde(default = "default_rho_time")]
    pub rho_time: f64,
    /// Weight per minute of crew travel in repair routing.
    #[serde(default = "default_rho_travel")]
    pub rho_travel: f64,
    /// Longest a crew may wait at a manual switch, minutes.
    #[serde(default = "default_max_wait")]
    pub max_wait_min: f64,
    /// Hard cap on switching steps per sequence.
    #[serde(default = "default_max_steps")]
    pub max_steps: u32,
    /// Repair-schedule period length, minutes.
    #[serde(default = "default_dt")]
    pub dt_min: f64,
    #[serde(default = "default_remote_op")]
    pub remote_op_min: f64,
    #[serde(default = "default_manual_op")]
    pub manual_op_min: f64,
    /// Segment count for the outer polygon approximating circular limits.
    #[serde(default = "default_segments")]
    pub circle_segments: u32,
}

impl Default for CostParams {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl CostParams {
    pub fn rho_switch_for(&self, class: SwitchClass) -> f64 {
        self.rho_switch_overrides
            .get(&class)
            .copied()
            .unwrap_or(self.rho_switch)
    }
}

/// The loaded network: buses, lines, and bases. Construct through
/// `load_network` (or `Network::from_parts` in tests) so that indices and
/// validation are consistent; treat as immutable afterwards.
#[derive(Debug, Clone)]
pub struct Network {
    pub base_kv: f64,
    pub base_kva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    bus_index: BTreeMap<u32, usize>,
    line_index: BTreeMap<String, usize>,
}

#[derive(Debug, Deserialize)]
struct NetworkDoc {
    base_kv: f64,
    base_kva: f64,
    buses: Vec<Bus>,
    lines: Vec<Line>,
    #[serde(default)]
    sources: Vec<SourceLimits>,
}

#[derive(Debug, Serialize)]
struct NetworkDocOut<'a> {
    base_kv: f64,
    base_kva: f64,
    buses: &'a [Bus],
    lines: &'a [Line],
    sources: Vec<&'a SourceLimits>,
}

impl Network {
    pub fn from_parts(
        base_kv: f64,
        base_kva: f64,
        buses: Vec<Bus>,
        lines: Vec<Line>,
    ) -> Result<Self, ModelError> {
        let mut bus_index = BTreeMap::new();
        for (i, b) in buses.iter().enumerate() {
            if bus_index.insert(b.id, i).is_some() {
                return Err(ModelError::Invalid(vec![format!(
                    "duplicate bus id {}",
                    b.id
                )]));
            }
        }
        let mut line_index = BTreeMap::new();
        for (i, l) in lines.iter().enumerate() {
            if line_index.insert(l.id.clone(), i).is_some() {
                return Err(ModelError::Invalid(vec![format!(
                    "duplicate line id {}",
                    l.id
                )]));
            }
        }
        let net = Network {
            base_kv,
            base_kva,
            buses,
            lines,
            bus_index,
            line_index,
        };
        let issues = validate_network(&net);
        let errors: Vec<String> = issues
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .map(|d| d.message.clone())
            .collect();
        if errors.is_empty() {
            Ok(net)
        } else {
            Err(ModelError::Invalid(errors))
        }
    }

    pub fn bus(&self, id: u32) -> Option<&Bus> {
        self.bus_index.get(&id).map(|&i| &self.buses[i])
    }

    pub fn bus_idx(&self, id: u32) -> Option<usize> {
        self.bus_index.get(&id).copied()
    }

    pub fn line(&self, id: &str) -> Option<&Line> {
        self.line_index.get(id).map(|&i| &self.lines[i])
    }

    pub fn line_idx(&self, id: &str) -> Option<usize> {
        self.line_index.get(id).copied()
    }

    /// Base impedance in ohms for converting entered impedances to per unit.
    pub fn z_base_ohm(&self) -> f64 {
        self.base_kv * self.base_kv * 1000.0 / self.base_kva
    }

    /// Nominal line-to-neutral voltage, kV, for converting ampere ratings
    /// into per-phase apparent powers.
    pub fn v_ln_kv(&self) -> f64 {
        self.base_kv / 3f64.sqrt()
    }

    /// kVA equivalent of an ampere rating at nominal phase voltage.
    pub fn amps_to_kva(&self, amps: f64) -> f64 {
        amps * self.v_ln_kv()
    }

    pub fn source_buses(&self) -> impl Iterator<Item = &Bus> {
        self.buses.iter().filter(|b| b.is_source())
    }

    /// A copy of the network with the scenario's damage applied to lines.
    pub fn with_damage(&self, scenario: &DamageScenario) -> Network {
        let mut net = self.clone();
        for f in &scenario.faults {
            if let Some(&i) = net.line_index.get(&f.line) {
                net.lines[i].is_damaged = true;
                net.lines[i].repair_time_min = Some(f.repair_minutes);
            }
        }
        net
    }

    pub fn to_json(&self) -> String {
        let doc = NetworkDocOut {
            base_kv: self.base_kv,
            base_kva: self.base_kva,
            buses: &self.buses,
            lines: &self.lines,
            sources: self.buses.iter().filter_map(|b| b.source.as_ref()).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("network serialization")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A validation finding with enough context to act on.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(message: String) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message,
        }
    }

    fn warning(message: String) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            message,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid input:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

/// Structural validation of a network. Returns all findings; errors make the
/// network unusable, warnings flag suspicious but workable data.
pub fn validate_network(net: &Network) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if net.base_kv <= 0.0 || net.base_kva <= 0.0 {
        out.push(Diagnostic::error(format!(
            "bases must be positive (base_kv={}, base_kva={})",
            net.base_kv, net.base_kva
        )));
    }
    if net.source_buses().next().is_none() {
        out.push(Diagnostic::error("network has no source buses".into()));
    }
    for bus in &net.buses {
        if !(bus.v_min_pu > 0.0 && bus.v_min_pu < bus.v_max_pu) {
            out.push(Diagnostic::error(format!(
                "bus {}: voltage bounds [{}, {}] are not an increasing positive pair",
                bus.id, bus.v_min_pu, bus.v_max_pu
            )));
        }
        for p in Phase::ALL {
            let (kw, kvar) = (bus.load_kw[p.index()], bus.load_kvar[p.index()]);
            if (kw != 0.0 || kvar != 0.0) && !bus.phases.contains(p) {
                out.push(Diagnostic::error(format!(
                    "bus {}: load on absent phase {}",
                    bus.id,
                    p.letter()
                )));
            }
            if kw < 0.0 {
                out.push(Diagnostic::error(format!(
                    "bus {}: negative load {} kW on phase {}",
                    bus.id,
                    kw,
                    p.letter()
                )));
            }
        }
        if bus.priority < 0.0 {
            out.push(Diagnostic::error(format!(
                "bus {}: negative priority {}",
                bus.id, bus.priority
            )));
        }
        if let Some(src) = &bus.source {
            if src.p_max_kw.iter().chain(src.q_max_kvar.iter()).any(|v| *v < 0.0) {
                out.push(Diagnostic::error(format!(
                    "source at bus {}: negative generation limit",
                    bus.id
                )));
            }
        }
    }
    for line in &net.lines {
        if line.from == line.to {
            out.push(Diagnostic::error(format!(
                "line {}: connects bus {} to itself",
                line.id, line.from
            )));
        }
        for (end, bus_id) in [("from", line.from), ("to", line.to)] {
            match net.bus(bus_id) {
                None => out.push(Diagnostic::error(format!(
                    "line {}: {} bus {} does not exist",
                    line.id, end, bus_id
                ))),
                Some(bus) => {
                    if !line.phases.is_subset_of(&bus.phases) {
                        out.push(Diagnostic::error(format!(
                            "line {}: phases {} not all present at {} bus {} (bus has {})",
                            line.id, line.phases, end, bus_id, bus.phases
                        )));
                    }
                }
            }
        }
        if line.capacity_kva <= 0.0 {
            out.push(Diagnostic::error(format!(
                "line {}: capacity must be positive, got {}",
                line.id, line.capacity_kva
            )));
        }
        for p in Phase::ALL {
            let diag = line.impedance_ohm[p.index()][p.index()];
            if line.phases.contains(p) && diag[0] == 0.0 && diag[1] == 0.0 {
                out.push(Diagnostic::warning(format!(
                    "line {}: zero self-impedance on present phase {}",
                    line.id,
                    p.letter()
                )));
            }
        }
        if let Some(sw) = &line.switch {
            if sw.class == SwitchClass::Sec && sw.breaking_amps != 0.0 {
                out.push(Diagnostic::warning(format!(
                    "line {}: sectionalizer with nonzero breaking rating {} A (treated as written)",
                    line.id, sw.breaking_amps
                )));
            }
            if sw.class == SwitchClass::Fuse && sw.remote {
                out.push(Diagnostic::error(format!(
                    "line {}: fuse marked remotely operable",
                    line.id
                )));
            }
            if sw.breaking_amps < 0.0 || sw.making_amps < 0.0 {
                out.push(Diagnostic::error(format!(
                    "line {}: negative switch rating",
                    line.id
                )));
            }
        }
    }
    out
}

/// Validate a scenario against its network. Returns errors only (no warning
/// class here).
pub fn validate_scenario(net: &Network, scenario: &DamageScenario) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for f in &scenario.faults {
        if !seen.insert(f.line.as_str()) {
            out.push(Diagnostic::error(format!(
                "fault listed twice for line {}",
                f.line
            )));
        }
        match net.line(&f.line) {
            None => out.push(Diagnostic::error(format!(
                "fault on unknown line {}",
                f.line
            ))),
            Some(_) => {
                if f.repair_minutes <= 0.0 {
                    out.push(Diagnostic::error(format!(
                        "fault on line {}: repair time must be positive, got {}",
                        f.line, f.repair_minutes
                    )));
                }
            }
        }
    }
    for id in &scenario.melted_fuses {
        match net.line(id) {
            None => out.push(Diagnostic::error(format!(
                "melted fuse on unknown line {id}"
            ))),
            Some(line) => match &line.switch {
                Some(sw) if sw.class == SwitchClass::Fuse => {}
                _ => out.push(Diagnostic::error(format!(
                    "melted fuse declared on line {id}, which carries no fuse"
                ))),
            },
        }
    }
    for (id, _) in &scenario.post_protection_states {
        match net.line(id) {
            None => out.push(Diagnostic::error(format!(
                "post-protection state for unknown line {id}"
            ))),
            Some(line) if !line.is_switch() => out.push(Diagnostic::error(format!(
                "post-protection state for line {id}, which has no switch"
            ))),
            _ => {}
        }
    }
    if scenario.fault_interrupt_amps <= 0.0 {
        out.push(Diagnostic::error(format!(
            "fault_interrupt_amps must be positive, got {}",
            scenario.fault_interrupt_amps
        )));
    }
    for line in &net.lines {
        if let Some(sw) = &line.switch {
            if sw.class.is_breaker_class() && sw.breaking_amps < scenario.fault_interrupt_amps {
                out.push(Diagnostic::error(format!(
                    "line {}: {} rated {} A cannot interrupt the declared fault level {} A",
                    line.id,
                    sw.class.label(),
                    sw.breaking_amps,
                    scenario.fault_interrupt_amps
                )));
            }
        }
    }
    let mut ids = BTreeSet::new();
    for crew in &scenario.crews {
        if !ids.insert(crew.id.as_str()) {
            out.push(Diagnostic::error(format!("duplicate crew id {}", crew.id)));
        }
    }
    for (from, row) in &scenario.travel_minutes {
        for (to, minutes) in row {
            if *minutes < 0.0 {
                out.push(Diagnostic::error(format!(
                    "negative travel time {minutes} from {from} to {to}"
                )));
            }
        }
    }
    out
}

fn read_to_string(path: &Path) -> Result<String, ModelError> {
    std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load and validate a network document from JSON text.
pub fn parse_network(text: &str, origin: &str) -> Result<Network, ModelError> {
    let doc: NetworkDoc = serde_json::from_str(text).map_err(|source| ModelError::Parse {
        path: origin.to_string(),
        source,
    })?;
    let NetworkDoc {
        base_kv,
        base_kva,
        mut buses,
        lines,
        sources,
    } = doc;
    let mut errors = Vec::new();
    for src in sources {
        match buses.iter_mut().find(|b| b.id == src.bus) {
            Some(bus) => {
                if bus.source.is_some() {
                    errors.push(format!("bus {} listed twice under sources", src.bus));
                }
                bus.source = Some(src);
            }
            None => errors.push(format!("sources entry references unknown bus {}", src.bus)),
        }
    }
    if !errors.is_empty() {
        return Err(ModelError::Invalid(errors));
    }
    Network::from_parts(base_kv, base_kva, buses, lines)
}

/// Load and validate a network from a JSON file.
pub fn load_network(path: impl AsRef<Path>) -> Result<Network, ModelError> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    parse_network(&text, &path.display().to_string())
}

/// Parse and validate a scenario document against a network.
pub fn parse_scenario(
    text: &str,
    origin: &str,
    net: &Network,
) -> Result<DamageScenario, ModelError> {
    let scenario: DamageScenario =
        serde_json::from_str(text).map_err(|source| ModelError::Parse {
            path: origin.to_string(),
            source,
        })?;
    let issues = validate_scenario(net, &scenario);
    let errors: Vec<String> = issues
        .iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| d.message.clone())
        .collect();
    if errors.is_empty() {
        Ok(scenario)
    } else {
        Err(ModelError::Invalid(errors))
    }
}

/// Load and validate a scenario from a JSON file.
pub fn load_scenario(
    path: impl AsRef<Path>,
    net: &Network,
) -> Result<DamageScenario, ModelError> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    parse_scenario(&text, &path.display().to_string(), net)
}

/// Load cost parameters from a JSON file.
pub fn load_costs(path: impl AsRef<Path>) -> Result<CostParams, ModelError> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| ModelError::Parse {
        path: path.display().to_string(),
        source,
    })
}

/// Build a symmetric travel-time matrix from named points by scaling
/// Euclidean distances into `[min_minutes, max_minutes]` (single point pairs
/// land on the midpoint; identical points get `min_minutes`).
pub fn travel_matrix_from_points(
    points: &[(String, f64, f64)],
    min_minutes: f64,
    max_minutes: f64,
) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut dist = Vec::new();
    for (i, a) in points.iter().enumerate() {
        for b in points.iter().skip(i + 1) {
            dist.push(((a.1 - b.1).powi(2) + (a.2 - b.2).powi(2)).sqrt());
        }
    }
    let lo = dist.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = dist.iter().cloned().fold(0.0f64, f64::max);
    let scale = |d: f64| {
        if hi <= lo {
            (min_minutes + max_minutes) / 2.0
        } else {
            min_minutes + (d - lo) / (hi - lo) * (max_minutes - min_minutes)
        }
    };
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (i, a) in points.iter().enumerate() {
        for (j, b) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = ((a.1 - b.1).powi(2) + (a.2 - b.2).powi(2)).sqrt();
            let minutes = if d == 0.0 { min_minutes } else { scale(d) };
            out.entry(a.0.clone())
                .or_default()
                .insert(b.0.clone(), minutes);
        }
    }
    out
}
