use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::BarrierError;
use crate::linalg::{affine_step, Mat, Vector};
use crate::plant::ClosedLoopModel;
use crate::polyalg::{rescale, Polynomial, Scaling};

/// Disturbance model certified by a barrier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Disturbance {
    /// `d` held at `value` for all time; substituted into the vector field.
    Point { value: f64 },
    /// `d(t) ∈ [0, max]`, any piecewise-constant schedule; `d` is an
    /// extra program variable with `g_D = d(max − d) ≥ 0`.
    Interval { max: f64 },
}

impl Disturbance {
    /// Largest admissible disturbance value.
    pub fn max(&self) -> f64 {
        match *self {
            Disturbance::Point { value } => value,
            Disturbance::Interval { max } => max,
        }
    }
}

/// Unsafe region on one physical coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum UnsafeSpec {
    /// `|x_index| ≥ limit`.
    Band { index: usize, limit: f64 },
    /// `x_index ≥ limit`.
    Above { index: usize, limit: f64 },
}

impl UnsafeSpec {
    /// Distance to the unsafe region; positive when safe.
    pub fn margin(&self, x: &[f64]) -> f64 {
        match *self {
            UnsafeSpec::Band { index, limit } => limit - x[index].abs(),
            UnsafeSpec::Above { index, limit } => limit - x[index],
        }
    }

    /// `g_U ≥ 0` in physical coordinates.
    pub fn polynomial(&self, vars: &[String]) -> Polynomial {
        match *self {
            UnsafeSpec::Band { index, limit } => Polynomial::var(vars, index).pow(2).add_constant(-limit * limit),
            UnsafeSpec::Above { index, limit } => Polynomial::var(vars, index).add_constant(-limit),
        }
    }
}

/// Simulation settings shared by seed search and validation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    pub horizon: f64,
    pub dt: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            horizon: 60.0,
            dt: 0.01,
        }
    }
}

/// Affine system `ẋ = A x + e d` on a domain box with an unsafe set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SafetyScenario {
    pub name: String,
    pub mode_id: u8,
    pub state_names: Vec<String>,
    pub a: Mat,
    pub e: Vector,
    pub disturbance: Disturbance,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub unsafe_set: UnsafeSpec,
    pub epsilon: f64,
    pub epsilon_lie: f64,
    pub degree_init: u32,
    pub degree_max: u32,
    pub multiplier_degree: u32,
    /// Degree of the `λ_B` multiplier fitted between expansion steps.
    pub lambda_b_degree: u32,
    pub sim: SimSettings,
}

pub const DISTURBANCE_VAR: &str = "d";

impl SafetyScenario {
    /// Scenario on the relevant states of a reduced closed loop with the
    /// default domain box and the two-sided 0.5 Hz limit.
    pub fn for_mode(closed: &ClosedLoopModel, disturbance: Disturbance) -> Result<Self, BarrierError> {
        Self::for_mode_with_box(closed, disturbance, &DEFAULT_LO, &DEFAULT_HI)
    }

    pub fn for_mode_with_box(
        closed: &ClosedLoopModel,
        disturbance: Disturbance,
        lo: &[f64],
        hi: &[f64],
    ) -> Result<Self, BarrierError> {
        if closed.dim() != 4 {
            return Err(BarrierError::Scenario(
                "mode scenarios use the four-state reduced closed loop".into(),
            ));
        }
        let s = SafetyScenario {
            name: format!("mode{}", closed.mode.id),
            mode_id: closed.mode.id,
            state_names: RELEVANT_NAMES.iter().map(|s| s.to_string()).collect(),
            a: closed.a.clone(),
            e: closed.e.clone(),
            disturbance,
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            unsafe_set: UnsafeSpec::Band {
                index: 0,
                limit: SAFETY_LIMIT,
            },
            epsilon: 1e-3,
            epsilon_lie: 1e-6,
            degree_init: 4,
            degree_max: 8,
            multiplier_degree: 2,
            lambda_b_degree: 0,
            sim: SimSettings::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), BarrierError> {
        let n = self.state_names.len();
        if self.a.shape() != (n, n) || self.e.len() != n || self.lo.len() != n || self.hi.len() != n {
            return Err(BarrierError::Scenario("inconsistent scenario dimensions".into()));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(h > l)) {
            return Err(BarrierError::Scenario("empty domain box".into()));
        }
        if !(self.disturbance.max() >= 0.0) {
            return Err(BarrierError::Scenario("negative disturbance bound".into()));
        }
        if let Disturbance::Interval { max } = self.disturbance {
            if !(max > 0.0) {
                return Err(BarrierError::Scenario("d_max must be positive".into()));
            }
        }
        if !(self.epsilon > 0.0) || self.degree_init % 2 == 1 || self.degree_max < self.degree_init {
            return Err(BarrierError::Scenario("invalid ε or degree schedule".into()));
        }
        let idx = match self.unsafe_set {
            UnsafeSpec::Band { index, .. } | UnsafeSpec::Above { index, .. } => index,
        };
        if idx >= n {
            return Err(BarrierError::Scenario("unsafe index out of range".into()));
        }
        // The unsafe set must meet the domain: probe the box corners and
        // the coordinate extremes.
        let mut probe = self.center();
        probe[idx] = self.hi[idx];
        let hits_hi = self.unsafe_set.margin(&probe) <= 0.0;
        probe[idx] = self.lo[idx];
        if !hits_hi && self.unsafe_set.margin(&probe) > 0.0 {
            return Err(BarrierError::Scenario("unsafe set does not meet the domain".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.state_names.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn scaling(&self) -> Scaling {
        Scaling::from_box(&self.lo, &self.hi).expect("validated box")
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    /// Program variables: the states, then `d` for interval disturbances.
    pub fn program_vars(&self) -> Vec<String> {
        let mut v = self.state_names.clone();
        if let Disturbance::Interval { .. } = self.disturbance {
            v.push(DISTURBANCE_VAR.to_string());
        }
        v
    }

    pub fn disturbance_vars(&self) -> Vec<String> {
        match self.disturbance {
            Disturbance::Interval { .. } => vec![DISTURBANCE_VAR.to_string()],
            Disturbance::Point { .. } => vec![],
        }
    }

    /// Vector field in scaled state coordinates (the disturbance, when a
    /// variable, stays in physical units).
    pub fn scaled_field(&self) -> Vec<Polynomial> {
        let n = self.dim();
        let vars = self.program_vars();
        let sc = self.scaling();
        (0..n)
            .map(|i| {
                let hw = sc.half_width[i];
                let mut p = Polynomial::zero(&vars);
                let mut c0 = 0.0;
                for j in 0..n {
                    c0 += self.a[(i, j)] * sc.center[j];
                    p = p
                        .add(&Polynomial::var(&vars, j).scale(self.a[(i, j)] * sc.half_width[j] / hw))
                        .expect("same variables");
                }
                match self.disturbance {
                    Disturbance::Point { value } => c0 += self.e[i] * value,
                    Disturbance::Interval { .. } => {
                        p = p
                            .add(&Polynomial::var(&vars, n).scale(self.e[i] / hw))
                            .expect("same variables");
                    }
                }
                p.add_constant(c0 / hw)
            })
            .collect()
    }

    /// `1 − s_i² ≥ 0` per coordinate.
    pub fn scaled_domain(&self) -> Vec<Polynomial> {
        (0..self.dim())
            .map(|i| {
                Polynomial::var(&self.state_names, i)
                    .pow(2)
                    .scale(-1.0)
                    .add_constant(1.0)
            })
            .collect()
    }

    pub fn scaled_unsafe(&self) -> Polynomial {
        rescale(&self.unsafe_set.polynomial(&self.state_names), &self.scaling()).expect("matching scaling")
    }

    pub fn disturbance_set(&self) -> Vec<Polynomial> {
        match self.disturbance {
            Disturbance::Point { .. } => vec![],
            Disturbance::Interval { max } => {
                let vars = self.program_vars();
                let d = Polynomial::var(&vars, self.dim());
                vec![d.scale(max).sub(&d.pow(2)).expect("same variables")]
            }
        }
    }

    /// Equilibrium `x* = −A⁻¹ e d`.
    pub fn equilibrium(&self, d: f64) -> Option<Vec<f64>> {
        let x = self.a.clone().lu().solve(&(&self.e * (-d)))?;
        Some(x.iter().copied().collect())
    }

    /// Digest of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn propagator(&self) -> Propagator {
        Propagator::new(&self.a, &self.e, self.sim.dt)
    }
}

/// Physical box `[Δω, ΔP_m, ΔP_v, Δω_r]` used for the mode scenarios.
pub const DEFAULT_LO: [f64; 4] = [-0.7, -0.25, -0.25, -4.0];
pub const DEFAULT_HI: [f64; 4] = [0.7, 0.25, 0.25, 2.0];
pub const SAFETY_LIMIT: f64 = 0.5;
pub const RELEVANT_NAMES: [&str; 4] = ["dw", "dPm", "dPv", "dwr"];

/// Exact one-step map `x⁺ = Φ x + γ d` on a fixed grid.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub phi: Mat,
    pub gamma: Vector,
    pub dt: f64,
}

impl Propagator {
    pub fn new(a: &Mat, e: &Vector, dt: f64) -> Self {
        let (phi, gamma) = affine_step(a, e, dt);
        Propagator { phi, gamma, dt }
    }

    /// Smallest safety margin along the trajectory from `x0` under the
    /// piecewise-constant schedule `d(t)`, over `horizon`.
    pub fn min_margin<F: Fn(f64) -> f64>(&self, x0: &[f64], d: F, horizon: f64, unsafe_set: &UnsafeSpec) -> f64 {
        let mut x = Vector::from_row_slice(x0);
        let mut worst = unsafe_set.margin(x.as_slice());
        let steps = (horizon / self.dt).round() as usize;
        for k in 0..steps {
            let dk = d(k as f64 * self.dt);
            x = &self.phi * &x + &self.gamma * dk;
            worst = worst.min(unsafe_set.margin(x.as_slice()));
        }
        worst
    }
}
