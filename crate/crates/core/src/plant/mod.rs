//! DFIG wind-turbine and system-frequency-response modelling chain: the
//! nonlinear DAE, its equilibrium and linearization, Kron and selective
//! modal reduction, per-mode closed loops and support quantification.

mod closed_loop;
mod dae;
mod equilibrium;
mod linear;
mod params;
mod quantify;

pub use closed_loop::{assemble_closed_loop, ClosedLoopModel, ModelOrder, SfrModel, WtgDynamics};
pub use dae::{
    turbine_torque, SupportInput, TurbineOutput, WtgAlgebraic, WtgModel, WtgState, ALGEBRAIC_NAMES, N_ALGEBRAIC,
    N_STATES, OMEGA_R, P_GEN, STATE_NAMES,
};
pub use equilibrium::{
    calibrate, solve_equilibrium, solve_equilibrium_from, Equilibrium, EQUILIBRIUM_TOL, MAX_NEWTON_ITER,
};
pub use linear::{
    kron_reduce, linearize, linearize_with_step, sma_reduce, sma_reduce_state, LinearDae, ReducedCoefficients,
    SmaReduction, StateSpace, FD_RELATIVE_STEP, PARTICIPATION_TIE_TOL,
};
pub use params::{
    default_modes, Calibration, ModeGains, OperatingCondition, PlantParameters, DEFAULT_TIP_SPEED_SCALE,
    RELEVANT_EIGENVALUE_TARGET,
};
pub use quantify::{
    cross_check_inertia, emulated_damping, emulated_inertia, quantify, InertiaCheck, SupportQuantification,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no convergence after {iterations} iterations (max residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular: {0}")]
    Singular(String),
    #[error("not Hurwitz: {0}")]
    NotHurwitz(String),
    #[error("ambiguous relevant mode: {0}")]
    AmbiguousMode(String),
    #[error("ill-posed closed loop: {0}")]
    IllPosed(String),
    #[error("calibration rejected: A_rd = {a_rd:.5} differs from {target} by more than {tol}")]
    CalibrationRejected { a_rd: f64, target: f64, tol: f64 },
}

/// Largest accepted distance between the calibrated `A_rd` and its target.
pub const CALIBRATION_TOL: f64 = 5e-3;

/// Every stage of the modelling chain at one operating condition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlantAnalysis {
    pub equilibrium: Equilibrium,
    pub dae: LinearDae,
    pub state_space: StateSpace,
    pub sma: SmaReduction,
    pub sfr: SfrModel,
}

impl PlantAnalysis {
    pub fn run(params: &PlantParameters, op: &OperatingCondition, cal: &Calibration) -> Result<Self, PlantError> {
        let equilibrium = calibrate(params, op, cal)?;
        let dae = linearize(&equilibrium)?;
        let state_space = kron_reduce(&dae)?;
        let sma = sma_reduce(&state_space)?;
        Ok(PlantAnalysis {
            equilibrium,
            dae,
            state_space,
            sma,
            sfr: SfrModel::from_params(params),
        })
    }

    /// As [`PlantAnalysis::run`], rejecting calibrations whose `A_rd` misses
    /// the reference value.
    pub fn run_checked(
        params: &PlantParameters,
        op: &OperatingCondition,
        cal: &Calibration,
    ) -> Result<Self, PlantError> {
        let a = Self::run(params, op, cal)?;
        let a_rd = a.sma.unit.a_rd;
        if (a_rd - RELEVANT_EIGENVALUE_TARGET).abs() > CALIBRATION_TOL {
            return Err(PlantError::CalibrationRejected {
                a_rd,
                target: RELEVANT_EIGENVALUE_TARGET,
                tol: CALIBRATION_TOL,
            });
        }
        Ok(a)
    }

    pub fn default_checked() -> Result<Self, PlantError> {
        Self::run_checked(
            &PlantParameters::default(),
            &OperatingCondition::default(),
            &Calibration::default(),
        )
    }

    pub fn closed_loop(&self, gains: &ModeGains, order: ModelOrder) -> Result<ClosedLoopModel, PlantError> {
        let wtg = match order {
            ModelOrder::Reduced => WtgDynamics::Reduced(&self.sma),
            ModelOrder::Full => WtgDynamics::Full(&self.state_space),
        };
        assemble_closed_loop(&self.sfr, wtg, gains)
    }

    /// Gain-table analogue: reduced coefficients per mode.
    pub fn table(&self, modes: &[ModeGains]) -> Vec<TableRow> {
        modes
            .iter()
            .map(|m| {
                let c = self.sma.coefficients(m.k_ie, m.k_pc);
                TableRow {
                    mode: m.id,
                    name: m.name().to_string(),
                    k_ie: m.k_ie,
                    k_pc: m.k_pc,
                    b_rd1: c.b_rd1,
                    d_rd1: c.d_rd1,
                    b_rd2: c.b_rd2,
                    d_rd2: c.d_rd2,
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableRow {
    pub mode: u8,
    pub name: String,
    pub k_ie: f64,
    pub k_pc: f64,
    pub b_rd1: f64,
    pub d_rd1: f64,
    pub b_rd2: f64,
    pub d_rd2: f64,
}

pub fn format_table(rows: &[TableRow]) -> String {
    let mut s = format!(
        "{:<5} {:<6} {:>8} {:>8} {:>9} {:>9} {:>9} {:>9}\n",
        "mode", "type", "K_ie", "K_pc", "B_rd1", "D_rd1", "B_rd2", "D_rd2"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<5} {:<6} {:>8.3} {:>8.3} {:>9.4} {:>9.4} {:>9.4} {:>9.4}\n",
            r.mode, r.name, r.k_ie, r.k_pc, r.b_rd1, r.d_rd1, r.b_rd2, r.d_rd2
        ));
    }
    s
}

/// Finds the tip-speed multiplier for which the calibrated model's `A_rd`
/// equals `target`, by bracketing on `[lo, hi]` and bisection.
pub fn calibrate_tip_speed_scale(
    params: &PlantParameters,
    op: &OperatingCondition,
    target: f64,
    lo: f64,
    hi: f64,
) -> Result<f64, PlantError> {
    let f = |s: f64| -> Result<f64, PlantError> {
        let cal = Calibration {
            tip_speed_scale: s,
            ..Calibration::default()
        };
        Ok(PlantAnalysis::run(params, op, &cal)?.sma.unit.a_rd - target)
    };
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a)?, f(b)?);
    if fa * fb > 0.0 {
        return Err(PlantError::InvalidParameter(format!(
            "target A_rd = {target} is not bracketed by scales [{lo}, {hi}]"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        let fm = f(mid)?;
        if fa * fm <= 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
        if b - a < 1e-7 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}
