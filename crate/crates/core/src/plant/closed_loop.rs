use serde::{Deserialize, Serialize};

use super::dae::{N_STATES, OMEGA_R, STATE_NAMES};
use super::linear::{ReducedCoefficients, SmaReduction, StateSpace};
use super::params::{ModeGains, PlantParameters};
use super::PlantError;
use crate::linalg::{Mat, Vector};

/// Three-state system frequency response: swing, turbine and governor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfrModel {
    pub omega_s: f64,
    pub h: f64,
    pub d: f64,
    pub tau_ch: f64,
    pub tau_g: f64,
    pub r: f64,
}

impl SfrModel {
    pub fn from_params(p: &PlantParameters) -> Self {
        SfrModel {
            omega_s: p.omega_s,
            h: p.h,
            d: p.d,
            tau_ch: p.tau_ch,
            tau_g: p.tau_g,
            r: p.r,
        }
    }

    /// Steady-state deviation (Hz) after a load step `ΔP_d` without support.
    /// The governor acts on the per-unit deviation `Δω/ω_s`.
    pub fn steady_state_deviation(&self, delta_pd: f64) -> f64 {
        -delta_pd * self.omega_s / (1.0 / self.r + self.d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelOrder {
    Reduced,
    Full,
}

/// WTG dynamics with the support gains applied:
/// `ẋ = A x + b1 Δω̇ + b2 Δω`, `ΔP_gen = cᵀ x + d1 Δω̇ + d2 Δω`.
struct WtgBlock {
    a: Mat,
    b1: Vector,
    b2: Vector,
    c: Vector,
    d1: f64,
    d2: f64,
    names: Vec<String>,
    omega_r: usize,
}

impl WtgBlock {
    fn reduced(r: &ReducedCoefficients) -> Self {
        WtgBlock {
            a: Mat::from_element(1, 1, r.a_rd),
            b1: Vector::from_element(1, r.b_rd1),
            b2: Vector::from_element(1, r.b_rd2),
            c: Vector::from_element(1, r.c_rd),
            d1: r.d_rd1,
            d2: r.d_rd2,
            names: vec!["d_omega_r".into()],
            omega_r: 0,
        }
    }

    fn full(ss: &StateSpace, g: &ModeGains) -> Self {
        WtgBlock {
            a: ss.a_sys.clone(),
            b1: &ss.b_sys1 * g.k_ie,
            b2: &ss.b_sys2 * g.k_pc,
            c: ss.c_sys.clone(),
            d1: ss.d_sys1 * g.k_ie,
            d2: ss.d_sys2 * g.k_pc,
            names: STATE_NAMES.iter().map(|s| format!("d_{s}")).collect(),
            omega_r: OMEGA_R,
        }
    }
}

/// Affine closed loop `ẋ = A x + E ΔP_d` with the `Δω̇` feedthrough
/// eliminated, plus the output maps for `ΔP_gen` and `Δω̇`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosedLoopModel {
    pub mode: ModeGains,
    pub order: ModelOrder,
    pub states: Vec<String>,
    pub a: Mat,
    pub e: Vector,
    /// `ΔP_gen = pgen_row · x + pgen_d · ΔP_d`.
    pub pgen_row: Vector,
    pub pgen_d: f64,
    /// Indices of `(Δω, ΔP_m, ΔP_v, Δω_r)`.
    pub relevant: [usize; 4],
    /// Effective swing-row inertia `H + H_e(0)` (s).
    pub effective_inertia: f64,
}

impl ClosedLoopModel {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn rocof(&self, x: &Vector, delta_pd: f64) -> f64 {
        self.a.row(0).transpose().dot(x) + self.e[0] * delta_pd
    }

    pub fn p_gen(&self, x: &Vector, delta_pd: f64) -> f64 {
        self.pgen_row.dot(x) + self.pgen_d * delta_pd
    }

    pub fn relevant_states(&self, x: &Vector) -> [f64; 4] {
        self.relevant.map(|i| x[i])
    }
}

/// Source of the WTG dynamics for [`assemble_closed_loop`].
pub enum WtgDynamics<'a> {
    Reduced(&'a SmaReduction),
    Full(&'a StateSpace),
}

pub fn assemble_closed_loop(
    sfr: &SfrModel,
    wtg: WtgDynamics<'_>,
    gains: &ModeGains,
) -> Result<ClosedLoopModel, PlantError> {
    let (block, order) = match wtg {
        WtgDynamics::Reduced(r) => (
            WtgBlock::reduced(&r.coefficients(gains.k_ie, gains.k_pc)),
            ModelOrder::Reduced,
        ),
        WtgDynamics::Full(ss) => {
            if ss.a_sys.nrows() != N_STATES {
                return Err(PlantError::InvalidParameter(
                    "full model needs the seven-state WTG".into(),
                ));
            }
            (WtgBlock::full(ss, gains), ModelOrder::Full)
        }
    };
    let nw = block.a.nrows();
    let n = 3 + nw;
    let m = 2.0 * sfr.h / sfr.omega_s - block.d1;
    if m.abs() < 1e-12 {
        return Err(PlantError::IllPosed(format!(
            "2H/ω_s − D_1 = {m:.3e} for mode {}",
            gains.id
        )));
    }
    let mut a = Mat::zeros(n, n);
    let mut e = Vector::zeros(n);
    a[(0, 0)] = (block.d2 - sfr.d / sfr.omega_s) / m;
    a[(0, 1)] = 1.0 / m;
    for j in 0..nw {
        a[(0, 3 + j)] = block.c[j] / m;
    }
    e[0] = -1.0 / m;
    a[(1, 1)] = -1.0 / sfr.tau_ch;
    a[(1, 2)] = 1.0 / sfr.tau_ch;
    a[(2, 0)] = -1.0 / (sfr.r * sfr.omega_s * sfr.tau_g);
    a[(2, 2)] = -1.0 / sfr.tau_g;
    let swing = a.row(0).into_owned();
    for i in 0..nw {
        for j in 0..n {
            a[(3 + i, j)] = block.b1[i] * swing[j];
        }
        a[(3 + i, 0)] += block.b2[i];
        for j in 0..nw {
            a[(3 + i, 3 + j)] += block.a[(i, j)];
        }
        e[3 + i] = block.b1[i] * e[0];
    }
    let mut pgen_row = swing.transpose() * block.d1;
    pgen_row[0] += block.d2;
    for j in 0..nw {
        pgen_row[3 + j] += block.c[j];
    }
    let pgen_d = block.d1 * e[0];

    let mut states: Vec<String> = vec!["d_omega".into(), "d_Pm".into(), "d_Pv".into()];
    states.extend(block.names);
    Ok(ClosedLoopModel {
        mode: *gains,
        order,
        states,
        a,
        e,
        pgen_row,
        pgen_d,
        relevant: [0, 1, 2, 3 + block.omega_r],
        effective_inertia: 0.5 * sfr.omega_s * m,
    })
}
