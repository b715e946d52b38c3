use serde::{Deserialize, Serialize};

use super::closed_loop::ClosedLoopModel;
use super::linear::{ReducedCoefficients, SmaReduction};
use super::params::ModeGains;
use super::PlantError;
use crate::linalg::{affine_step, Vector};

fn check_a_rd(a_rd: f64) -> Result<(), PlantError> {
    if a_rd == 0.0 {
        return Err(PlantError::Singular("A_rd = 0".into()));
    }
    Ok(())
}

/// `H_e(t) = ½ω_s(−D_rd1 + C_rd A_rd⁻¹ (1 − e^{A_rd t}) B_rd1)`.
pub fn emulated_inertia(red: &ReducedCoefficients, omega_s: f64, ts: &[f64]) -> Result<Vec<f64>, PlantError> {
    check_a_rd(red.a_rd)?;
    ts.iter()
        .map(|&t| {
            if t < 0.0 {
                return Err(PlantError::InvalidParameter(format!("negative time {t}")));
            }
            Ok(0.5 * omega_s * (-red.d_rd1 + red.c_rd / red.a_rd * (1.0 - (red.a_rd * t).exp()) * red.b_rd1))
        })
        .collect()
}

/// `D_e(t) = ω_s(−D_rd2 + C_rd A_rd⁻¹ (1 − e^{A_rd (t − t_p)}) B_rd2)` for `t ≥ t_p`.
pub fn emulated_damping(red: &ReducedCoefficients, omega_s: f64, ts: &[f64], t_p: f64) -> Result<Vec<f64>, PlantError> {
    check_a_rd(red.a_rd)?;
    ts.iter()
        .map(|&t| {
            if t < t_p {
                return Err(PlantError::InvalidParameter(format!("time {t} precedes t_p = {t_p}")));
            }
            Ok(omega_s * (-red.d_rd2 + red.c_rd / red.a_rd * (1.0 - (red.a_rd * (t - t_p)).exp()) * red.b_rd2))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupportQuantification {
    pub mode: ModeGains,
    pub t_h: f64,
    pub t_p: f64,
    pub t_s: f64,
    pub inertia_t: Vec<f64>,
    pub h_e: Vec<f64>,
    pub damping_t: Vec<f64>,
    pub d_e: Vec<f64>,
}

/// `H_e` sampled on `[0, t_h]` and `D_e` on `[t_p, t_s]`, `n` points each.
pub fn quantify(
    sma: &SmaReduction,
    mode: &ModeGains,
    omega_s: f64,
    windows: (f64, f64, f64),
    n: usize,
) -> Result<SupportQuantification, PlantError> {
    let (t_h, t_p, t_s) = windows;
    if !(t_h > 0.0 && t_s > t_p && t_p >= 0.0) || n < 2 {
        return Err(PlantError::InvalidParameter("invalid quantification windows".into()));
    }
    let red = sma.coefficients(mode.k_ie, mode.k_pc);
    let grid = |a: f64, b: f64| -> Vec<f64> { (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect() };
    let inertia_t = grid(0.0, t_h);
    let damping_t = grid(t_p, t_s);
    Ok(SupportQuantification {
        mode: *mode,
        t_h,
        t_p,
        t_s,
        h_e: emulated_inertia(&red, omega_s, &inertia_t)?,
        d_e: emulated_damping(&red, omega_s, &damping_t, t_p)?,
        inertia_t,
        damping_t,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InertiaCheck {
    pub mode: u8,
    pub delta_pd: f64,
    pub h_e0: f64,
    pub predicted_rocof: f64,
    pub measured_rocof: f64,
    pub relative_error: f64,
}

/// Initial RoCoF measured over the first millisecond of a simulated step
/// response against `ω_s ΔP_d / (2(H + H_e(0)))`.
pub fn cross_check_inertia(
    closed: &ClosedLoopModel,
    red: &ReducedCoefficients,
    h: f64,
    omega_s: f64,
    delta_pd: f64,
) -> Result<InertiaCheck, PlantError> {
    let h_e0 = emulated_inertia(red, omega_s, &[0.0])?[0];
    let predicted = omega_s * delta_pd / (2.0 * (h + h_e0));
    let dt = 1e-3;
    let (phi, gamma) = affine_step(&closed.a, &(&closed.e * delta_pd), dt);
    let x0 = Vector::zeros(closed.dim());
    let x1 = phi * &x0 + gamma;
    let measured = ((x1[0] - x0[0]) / dt).abs();
    Ok(InertiaCheck {
        mode: closed.mode.id,
        delta_pd,
        h_e0,
        predicted_rocof: predicted,
        measured_rocof: measured,
        relative_error: (measured - predicted).abs() / predicted.abs(),
    })
}
