//! Barrier certificates and iterative region-of-safety estimation.

mod algorithm;
mod grid;
mod scenario;
mod validate;

pub use algorithm::{
    estimate_ros, expand, find_safe_seeds, initialization_program, initialize, verify_safety, AlgorithmSettings,
    BarrierCertificate, CertificateStats, ContainmentSign, IterationRecord, RosEstimate, Verification, KKT_TOL,
};
pub use grid::{ProbeGrid, DEFAULT_PROBE_POINTS};
pub use scenario::{
    Disturbance, Propagator, SafetyScenario, SimSettings, UnsafeSpec, DEFAULT_HI, DEFAULT_LO, DISTURBANCE_VAR,
    RELEVANT_NAMES, SAFETY_LIMIT,
};
pub use validate::{sample_validate, soundness_check, ClassResult, ScheduleClass, SoundnessReport, ValidationReport};

use thiserror::Error;

use crate::plant::PlantError;
use crate::polyalg::PolyError;
use crate::sos::SosError;

#[derive(Debug, Error)]
pub enum BarrierError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no safe seed: {0}")]
    NoneFound(String),
    #[error("initialization infeasible: {0}")]
    InfeasibleInit(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sos(#[from] SosError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
