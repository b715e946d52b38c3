use serde::{Deserialize, Serialize};

use super::dae::{SupportInput, WtgAlgebraic, WtgModel, WtgState, N_ALGEBRAIC, N_STATES, OMEGA_R, P_GEN};
use super::params::{Calibration, OperatingCondition, PlantParameters};
use super::PlantError;
use crate::linalg::{Mat, Vector};

pub const MAX_NEWTON_ITER: usize = 50;
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Equilibrium {
    pub model: WtgModel,
    pub state: WtgState,
    pub algebraic: WtgAlgebraic,
    pub iterations: usize,
    pub max_residual: f64,
    /// Base rotor speed implied by the calibrated torque scale.
    pub omega_b: f64,
}

impl Equilibrium {
    pub fn x(&self) -> [f64; N_STATES] {
        self.state.to_array()
    }

    pub fn y(&self) -> [f64; N_ALGEBRAIC] {
        self.algebraic.to_array()
    }
}

/// Central-difference step used for every Jacobian in this module.
pub(crate) fn fd_step(z: f64, rel: f64) -> f64 {
    (rel * z.abs()).max(1e-8)
}

pub(crate) fn fd_jacobian<F>(fun: &F, z: &[f64], rel: f64) -> Result<Mat, PlantError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, PlantError>,
{
    let m = fun(z)?.len();
    let mut j = Mat::zeros(m, z.len());
    let mut zp = z.to_vec();
    for i in 0..z.len() {
        let h = fd_step(z[i], rel);
        zp[i] = z[i] + h;
        let fp = fun(&zp)?;
        zp[i] = z[i] - h;
        let fm = fun(&zp)?;
        zp[i] = z[i];
        for r in 0..m {
            j[(r, i)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    Ok(j)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Damped Newton iteration with a finite-difference Jacobian.
pub(crate) fn newton<F>(fun: F, z0: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize, f64), PlantError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, PlantError>,
{
    let mut z = z0.to_vec();
    let mut r = fun(&z)?;
    let mut res = max_abs(&r);
    for it in 0..max_iter {
        if res < tol {
            return Ok((z, it, res));
        }
        let j = fd_jacobian(&fun, &z, 1e-7)?;
        let rhs = -Vector::from_vec(r.clone());
        let dz = j
            .lu()
            .solve(&rhs)
            .ok_or_else(|| PlantError::Singular("equilibrium Jacobian is singular".into()))?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, b)| a + t * b).collect();
            match fun(&trial) {
                Ok(rt) if max_abs(&rt) < res || t < 1e-4 => {
                    z = trial;
                    r = rt;
                    res = max_abs(&r);
                    break;
                }
                _ if t < 1e-4 => {
                    return Err(PlantError::NoConvergence {
                        iterations: it + 1,
                        residual: res,
                    })
                }
                _ => t *= 0.5,
            }
        }
    }
    if res < tol {
        Ok((z, max_iter, res))
    } else {
        Err(PlantError::NoConvergence {
            iterations: max_iter,
            residual: res,
        })
    }
}

fn initial_guess(op: &OperatingCondition) -> ([f64; N_STATES], [f64; N_ALGEBRAIC]) {
    (
        [1.0, 0.1, op.omega_r, 0.1, 0.1, 0.1, 0.1],
        [0.0, 0.0, 0.1, 0.1, op.p_gen, 0.0, 0.0, 0.3, op.v, op.theta],
    )
}

/// Resolves the calibration: `c_opt_eff = P̄_gen/ω̄_r³` and the torque scale
/// from an equilibrium solve at fixed `ω̄_r`.
pub fn calibrate(
    params: &PlantParameters,
    op: &OperatingCondition,
    cal: &Calibration,
) -> Result<Equilibrium, PlantError> {
    params.validate()?;
    op.validate()?;
    if !(op.omega_r > 0.0) {
        return Err(PlantError::InvalidParameter(
            "operating rotor speed must be positive".into(),
        ));
    }
    let c_opt_eff = cal.c_opt_eff.unwrap_or(op.p_gen / op.omega_r.powi(3));
    let mut model = WtgModel {
        params: params.clone(),
        op: op.clone(),
        tip_speed_scale: cal.tip_speed_scale,
        c_opt_eff,
        torque_scale: cal.torque_scale.unwrap_or(0.3),
    };
    if let Some(k) = cal.torque_scale {
        model.torque_scale = k;
        return solve_equilibrium(&model);
    }
    // Unknowns: x with ω_r replaced by the torque scale, then y.
    let (x0, y0) = initial_guess(op);
    let mut z0: Vec<f64> = x0.to_vec();
    z0[OMEGA_R] = model.torque_scale;
    z0.extend_from_slice(&y0);
    model.turbine(op.omega_r)?;
    let residual = |z: &[f64]| -> Result<Vec<f64>, PlantError> {
        let mut m = model.clone();
        m.torque_scale = z[OMEGA_R];
        let mut x = z[..N_STATES].to_vec();
        x[OMEGA_R] = op.omega_r;
        m.residual_vector(&x, &z[N_STATES..], SupportInput::default())
    };
    let (z, iterations, max_residual) = newton(residual, &z0, EQUILIBRIUM_TOL, MAX_NEWTON_ITER)?;
    model.torque_scale = z[OMEGA_R];
    let mut x = z[..N_STATES].to_vec();
    x[OMEGA_R] = op.omega_r;
    finish(model, &x, &z[N_STATES..], iterations, max_residual)
}

/// Newton solve of the 17 residuals with all calibration constants frozen.
pub fn solve_equilibrium(model: &WtgModel) -> Result<Equilibrium, PlantError> {
    let (x0, y0) = initial_guess(&model.op);
    let mut z0 = x0.to_vec();
    z0.extend_from_slice(&y0);
    solve_equilibrium_from(model, &z0)
}

/// As [`solve_equilibrium`] from a caller-supplied start `[x; y]`.
pub fn solve_equilibrium_from(model: &WtgModel, z0: &[f64]) -> Result<Equilibrium, PlantError> {
    if z0.len() != N_STATES + N_ALGEBRAIC {
        return Err(PlantError::InvalidParameter(format!(
            "start vector has length {}",
            z0.len()
        )));
    }
    model.params.validate()?;
    model.op.validate()?;
    let residual = |z: &[f64]| model.residual_vector(&z[..N_STATES], &z[N_STATES..], SupportInput::default());
    let (z, iterations, max_residual) = newton(residual, z0, EQUILIBRIUM_TOL, MAX_NEWTON_ITER)?;
    finish(model.clone(), &z[..N_STATES], &z[N_STATES..], iterations, max_residual)
}

fn finish(
    model: WtgModel,
    x: &[f64],
    y: &[f64],
    iterations: usize,
    max_residual: f64,
) -> Result<Equilibrium, PlantError> {
    let p = &model.params;
    let v3 = model.op.v_wind.powi(3);
    let omega_b = model.torque_scale * p.s_bd * 1e6 / (0.5 * p.rho * std::f64::consts::PI * p.r_t * p.r_t * v3);
    if (y[P_GEN] - model.c_opt_eff * x[OMEGA_R].powi(3)).abs() > 1e-6 {
        return Err(PlantError::NoConvergence {
            iterations,
            residual: max_residual,
        });
    }
    Ok(Equilibrium {
        state: WtgState::from_slice(x),
        algebraic: WtgAlgebraic::from_slice(y),
        model,
        iterations,
        max_residual,
        omega_b,
    })
}
