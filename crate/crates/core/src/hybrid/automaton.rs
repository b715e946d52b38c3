use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::HybridError;
use crate::barrier::{RosEstimate, RELEVANT_NAMES, SAFETY_LIMIT};
use crate::plant::{ClosedLoopModel, ModeGains, ModelOrder, PlantAnalysis};

/// One operating mode with its closed loops.
#[derive(Clone, Debug)]
pub struct Mode {
    pub gains: ModeGains,
    pub full: ClosedLoopModel,
    pub reduced: ClosedLoopModel,
}

impl Mode {
    pub fn id(&self) -> u8 {
        self.gains.id
    }

    pub fn model(&self, order: ModelOrder) -> &ClosedLoopModel {
        match order {
            ModelOrder::Full => &self.full,
            ModelOrder::Reduced => &self.reduced,
        }
    }
}

/// Modes, the model order used for simulation, and the safety guards
/// `B_dk` keyed by mode id.
#[derive(Clone, Debug)]
pub struct HybridAutomaton {
    pub modes: Vec<Mode>,
    pub order: ModelOrder,
    pub guards: BTreeMap<u8, RosEstimate>,
}

impl HybridAutomaton {
    pub fn new(analysis: &PlantAnalysis, gains: &[ModeGains], order: ModelOrder) -> Result<Self, HybridError> {
        let mut modes = Vec::with_capacity(gains.len());
        for g in gains {
            if modes.iter().any(|m: &Mode| m.id() == g.id) {
                return Err(HybridError::Policy(format!("duplicate mode id {}", g.id)));
            }
            modes.push(Mode {
                gains: *g,
                full: analysis.closed_loop(g, ModelOrder::Full)?,
                reduced: analysis.closed_loop(g, ModelOrder::Reduced)?,
            });
        }
        Ok(HybridAutomaton {
            modes,
            order,
            guards: BTreeMap::new(),
        })
    }

    pub fn mode(&self, id: u8) -> Result<&Mode, HybridError> {
        self.modes
            .iter()
            .find(|m| m.id() == id)
            .ok_or_else(|| HybridError::Policy(format!("unknown mode {id}")))
    }

    pub fn model(&self, id: u8) -> Result<&ClosedLoopModel, HybridError> {
        Ok(self.mode(id)?.model(self.order))
    }

    /// Installs `ros` as the guard of mode `id`.
    pub fn set_guard(&mut self, id: u8, ros: RosEstimate) -> Result<(), HybridError> {
        self.mode(id)?;
        check_guard(&ros)?;
        self.guards.insert(id, ros);
        Ok(())
    }

    pub fn guard(&self, id: u8) -> Result<&RosEstimate, HybridError> {
        self.guards
            .get(&id)
            .ok_or_else(|| HybridError::Guard(format!("no guard for mode {id}")))
    }
}

pub(crate) fn check_guard(ros: &RosEstimate) -> Result<(), HybridError> {
    if ros.state_names.iter().map(String::as_str).ne(RELEVANT_NAMES) {
        return Err(HybridError::Guard(format!(
            "guard variables {:?} are not the relevant states {:?}",
            ros.state_names, RELEVANT_NAMES
        )));
    }
    Ok(())
}

/// Load-step schedule and simulation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EventScenario {
    /// `(time, ΔP_d)` steps; `ΔP_d = 0` before the first.
    pub steps: Vec<(f64, f64)>,
    pub horizon: f64,
    pub dt: f64,
    /// Frequency limit (Hz).
    pub limit: f64,
}

impl Default for EventScenario {
    fn default() -> Self {
        EventScenario {
            steps: vec![(1.0, 0.15)],
            horizon: 60.0,
            dt: 1e-3,
            limit: SAFETY_LIMIT,
        }
    }
}

impl EventScenario {
    pub fn with_horizon(horizon: f64) -> Self {
        EventScenario {
            horizon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), HybridError> {
        if !(self.dt > 0.0) || !(self.horizon > self.dt) || !(self.limit > 0.0) {
            return Err(HybridError::Scenario(
                "need 0 < dt < horizon and a positive limit".into(),
            ));
        }
        if self.steps.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(HybridError::Scenario(
                "disturbance steps must be strictly increasing in time".into(),
            ));
        }
        if self
            .steps
            .iter()
            .any(|&(t, d)| !(t >= 0.0 && t < self.horizon) || !d.is_finite())
        {
            return Err(HybridError::Scenario(
                "disturbance steps must lie inside the horizon".into(),
            ));
        }
        Ok(())
    }

    pub fn disturbance_at(&self, t: f64) -> f64 {
        let k = self.steps.partition_point(|&(t0, _)| t0 <= t);
        if k == 0 {
            0.0
        } else {
            self.steps[k - 1].1
        }
    }

    /// Time of the first load step.
    pub fn event_time(&self) -> f64 {
        self.steps.first().map(|s| s.0).unwrap_or(0.0)
    }

    /// Final load.
    pub fn final_disturbance(&self) -> f64 {
        self.steps.last().map(|s| s.1).unwrap_or(0.0)
    }
}
