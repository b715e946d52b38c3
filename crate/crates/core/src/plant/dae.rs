use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::params::{OperatingCondition, PlantParameters};
use super::PlantError;

pub const N_STATES: usize = 7;
pub const N_ALGEBRAIC: usize = 10;

pub const STATE_NAMES: [&str; N_STATES] = ["E'q", "E'd", "omega_r", "x1", "x2", "x3", "x4"];
pub const ALGEBRAIC_NAMES: [&str; N_ALGEBRAIC] =
    ["Vqr", "Vdr", "Iqr", "Idr", "Pgen", "Qgen", "Ids", "Iqs", "VD", "thetaD"];

/// Index of the rotor speed in the WTG state vector.
pub const OMEGA_R: usize = 2;
/// Index of `P_gen` in the algebraic vector.
pub const P_GEN: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WtgState {
    pub e_q: f64,
    pub e_d: f64,
    pub omega_r: f64,
    pub x: [f64; 4],
}

impl WtgState {
    pub fn to_array(&self) -> [f64; N_STATES] {
        [
            self.e_q,
            self.e_d,
            self.omega_r,
            self.x[0],
            self.x[1],
            self.x[2],
            self.x[3],
        ]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        WtgState {
            e_q: s[0],
            e_d: s[1],
            omega_r: s[2],
            x: [s[3], s[4], s[5], s[6]],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WtgAlgebraic {
    pub v_qr: f64,
    pub v_dr: f64,
    pub i_qr: f64,
    pub i_dr: f64,
    pub p_gen: f64,
    pub q_gen: f64,
    pub i_ds: f64,
    pub i_qs: f64,
    pub v_d: f64,
    pub theta_d: f64,
}

impl WtgAlgebraic {
    pub fn to_array(&self) -> [f64; N_ALGEBRAIC] {
        [
            self.v_qr,
            self.v_dr,
            self.i_qr,
            self.i_dr,
            self.p_gen,
            self.q_gen,
            self.i_ds,
            self.i_qs,
            self.v_d,
            self.theta_d,
        ]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        WtgAlgebraic {
            v_qr: s[0],
            v_dr: s[1],
            i_qr: s[2],
            i_dr: s[3],
            p_gen: s[4],
            q_gen: s[5],
            i_ds: s[6],
            i_qs: s[7],
            v_d: s[8],
            theta_d: s[9],
        }
    }

    /// Converter current `(V_qr I_qr + V_dr I_dr) / V_D`.
    pub fn i_gc(&self) -> f64 {
        (self.v_qr * self.i_qr + self.v_dr * self.i_dr) / self.v_d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurbineOutput {
    pub lambda: f64,
    pub lambda_i: f64,
    pub c_p: f64,
    pub t_m: f64,
}

/// Tip-speed ratio, intermediate ratio, power coefficient and mechanical
/// torque `T_m = κ C_p / ω_r`, where `κ` lumps `½ρπR_t²ω_b v³ / S_b`.
pub fn turbine_torque(
    omega_r: f64,
    v_wind: f64,
    theta_t: f64,
    params: &PlantParameters,
    tip_speed_scale: f64,
    torque_scale: f64,
) -> Result<TurbineOutput, PlantError> {
    if !(v_wind > 0.0) {
        return Err(PlantError::InvalidParameter(format!(
            "wind speed must be positive, got {v_wind}"
        )));
    }
    if !(omega_r > 0.0) {
        return Err(PlantError::InvalidParameter(format!(
            "rotor speed must be positive, got {omega_r}"
        )));
    }
    let lambda = tip_speed_scale * 2.0 * params.k * omega_r * params.r_t / (params.p * v_wind);
    let base = lambda + 0.08 * theta_t;
    if base == 0.0 {
        return Err(PlantError::Singular("λ + 0.08θ_t = 0 in the turbine model".into()));
    }
    let inv = 1.0 / base - 0.035 / (theta_t.powi(3) + 1.0);
    if inv == 0.0 {
        return Err(PlantError::Singular("λ_i is unbounded".into()));
    }
    let lambda_i = 1.0 / inv;
    let c_p = 0.22 * (116.0 / lambda_i - 0.4 * theta_t - 5.0) * (-12.5 / lambda_i).exp();
    let t_m = torque_scale * c_p / omega_r;
    Ok(TurbineOutput {
        lambda,
        lambda_i,
        c_p,
        t_m,
    })
}

/// Support signals entering the active-power reference.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SupportInput {
    /// Frequency derivative (Hz/s).
    pub d_omega_dot: f64,
    /// Frequency deviation (Hz).
    pub d_omega: f64,
    pub k_ie: f64,
    pub k_pc: f64,
}

/// WTG model with its calibration constants resolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WtgModel {
    pub params: PlantParameters,
    pub op: OperatingCondition,
    pub tip_speed_scale: f64,
    pub c_opt_eff: f64,
    pub torque_scale: f64,
}

impl WtgModel {
    pub fn turbine(&self, omega_r: f64) -> Result<TurbineOutput, PlantError> {
        turbine_torque(
            omega_r,
            self.op.v_wind,
            self.op.theta_t,
            &self.params,
            self.tip_speed_scale,
            self.torque_scale,
        )
    }

    /// Differential and algebraic residuals `(f, g)`.
    pub fn residuals(
        &self,
        x: &[f64],
        y: &[f64],
        u: SupportInput,
    ) -> Result<([f64; N_STATES], [f64; N_ALGEBRAIC]), PlantError> {
        let p = &self.params;
        let (e_q, e_d, wr) = (x[0], x[1], x[2]);
        let (x1, x2, x3, x4) = (x[3], x[4], x[5], x[6]);
        let a = WtgAlgebraic::from_slice(y);
        let t0 = p.t0_prime();
        let xsp = p.x_s_prime();
        let wsr = p.omega_s_rad();
        let slip = 2.0 * std::f64::consts::PI * (p.omega_s - wr);
        let t_m = self.turbine(wr)?.t_m;
        let p_ref = self.c_opt_eff * wr.powi(3) + u.k_ie * u.d_omega_dot + u.k_pc * u.d_omega;
        let q_ref = self.op.q_set;
        let (kp, ki) = (p.k_p, p.k_i);

        let f = [
            -(e_q + (p.x_s - xsp) * a.i_ds) / t0 + wsr * p.x_m / p.x_r * a.v_dr - slip * e_d,
            -(e_d - (p.x_s - xsp) * a.i_qs) / t0 - wsr * p.x_m / p.x_r * a.v_qr + slip * e_q,
            p.omega_s / (2.0 * p.h_d) * (t_m - e_d * a.i_ds - e_q * a.i_qs),
            ki[0] * (p_ref - a.p_gen),
            ki[1] * (kp[0] * (p_ref - a.p_gen) + x1 - a.i_qr),
            ki[2] * (q_ref - a.q_gen),
            ki[3] * (kp[2] * (q_ref - a.q_gen) + x3 - a.i_dr),
        ];

        let i2 = a.i_ds * a.i_ds + a.i_qs * a.i_qs;
        let j = Complex64::i();
        let i_s = Complex64::new(a.i_qs, -a.i_ds);
        let n1 = Complex64::new(e_q, -e_d) - Complex64::new(p.r_s, xsp) * i_s - a.v_d;
        if a.v_d == 0.0 {
            return Err(PlantError::Singular("terminal voltage V_D is zero".into()));
        }
        let rot = Complex64::from_polar(1.0, a.theta_d);
        let n2 = a.v_d * rot - (j * p.x_t * (i_s - a.i_gc()) * rot + Complex64::from_polar(self.op.v, self.op.theta));

        let g = [
            kp[1] * (kp[0] * (p_ref - a.p_gen) + x1 - a.i_qr) + x2 - a.v_qr,
            kp[3] * (kp[2] * (q_ref - a.q_gen) + x3 - a.i_dr) + x4 - a.v_dr,
            -a.p_gen + e_d * a.i_ds + e_q * a.i_qs - p.r_s * i2 - (a.v_qr * a.i_qr + a.v_dr * a.i_dr),
            -a.q_gen + e_q * a.i_ds - e_d * a.i_qs - xsp * i2,
            -a.i_dr + e_q / p.x_m + p.x_m / p.x_r * a.i_ds,
            -a.i_qr - e_d / p.x_m + p.x_m / p.x_r * a.i_qs,
            n1.re,
            n1.im,
            n2.re,
            n2.im,
        ];
        Ok((f, g))
    }

    /// Stacked residual vector `[f; g]`.
    pub fn residual_vector(&self, x: &[f64], y: &[f64], u: SupportInput) -> Result<Vec<f64>, PlantError> {
        let (f, g) = self.residuals(x, y, u)?;
        Ok(f.iter().chain(g.iter()).copied().collect())
    }
}
