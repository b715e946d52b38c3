//! Switched simulation of the support modes and guard-based switching
//! synthesis.

mod analysis;
mod automaton;
mod export;
mod simulate;

pub use analysis::{
    critical_deadband, deactivation_check, deactivation_window, earliest_deactivation, guard_crossings,
    recovery_sequence_check, rotor_recovery_check, simulated_critical_switch, zero_crossings, CriticalDeadband,
    Crossing, CrossingDirection, DeactivationCheck, DeactivationWindow, RecoveryReport, SequenceCheck, AREA_TOL,
    ROTOR_TOL,
};
pub use automaton::{EventScenario, HybridAutomaton, Mode};
pub use export::{read_events_json, write_csv, write_events_json};
pub use simulate::{
    simulate, DeadbandRule, Event, EventKind, GuardRule, Policy, ScheduledSwitch, Trajectory, CHATTER_LIMIT, EVENT_TOL,
};

use thiserror::Error;

use crate::barrier::BarrierError;
use crate::plant::PlantError;

#[derive(Debug, Error)]
pub enum HybridError {
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("guard mismatch: {0}")]
    Guard(String),
    #[error("event chattering: {events} events in the second before t = {time:.6} s")]
    Chattering { time: f64, events: usize },
    #[error("guard never entered: {0}")]
    NeverEntered(String),
    #[error("guard never becomes negative: {0}")]
    NeverNegative(String),
    #[error("empty switching window: {0}")]
    EmptyWindow(String),
    #[error("horizon too short: {0}")]
    HorizonTooShort(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
