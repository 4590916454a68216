//! Repair-and-restoration planning for faulted power distribution networks.
//!
//! Given a network model (buses, lines, switching devices, sources) and a
//! damage scenario (faulted lines, melted fuses, post-protection switch
//! states, available crews), this library computes:
//!
//! * a target network configuration that isolates damage and restores as
//!   much load as possible over a radial topology,
//! * an ordered switching sequence reaching that configuration without ever
//!   violating device interrupting ratings, network limits, or crew travel
//!   constraints for manually operated switches, and
//! * a repair crew schedule, with the switching plan re-evaluated after
//!   each repair so newly fixed equipment is put back to work.
//!
//! Switching devices are modeled by class: circuit breakers and reclosers
//! may operate under fault current, load-break switches interrupt load
//! current only, sectionalizers operate de-energized, and fuses are never
//! operated — a melted fuse is replaced by a repair crew.
//!
//! Optimization runs on an exact built-in solver (bounded-variable simplex
//! with branch and bound) or any external MILP solver reachable through LP
//! files. Large sequencing and routing instances are handled by specialized
//! exact searches that are cross-checked against the optimization models on
//! small instances. Every solution is re-validated by independent rule
//! checkers before it is reported.

pub mod fixtures;
pub mod flow;
pub mod milp;
pub mod model;
pub mod otp;
pub mod reduction;
pub mod rules;
pub mod ssop;

pub use milp::{MilpError, MilpModel, Solution, SolveStatus, Solver};
pub use model::{
    Bus, CostParams, Crew, DamageScenario, Line, ModelError, Network, Phase, SwitchClass,
    SwitchSpec,
};
pub use reduction::{damaged_blocks, reduce, BusBlock, ReducedNetwork};
