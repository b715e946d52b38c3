use serde::{Deserialize, Serialize};

use super::PlantError;

/// Machine, turbine, controller, network and frequency-response constants.
/// Defaults are the Appendix-A values of the four-bus case study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantParameters {
    pub x_m: f64,
    pub x_s: f64,
    pub x_r: f64,
    pub r_s: f64,
    pub r_r: f64,
    /// WTG inertia (s).
    pub h_d: f64,
    pub p: f64,
    /// Air density (kg/m³).
    pub rho: f64,
    /// Blade radius (m).
    pub r_t: f64,
    /// Machine base (MVA).
    pub s_bd: f64,
    /// MPPT coefficient on the machine base (s³/Hz³).
    pub c_opt: f64,
    /// Gear ratio.
    pub k: f64,
    pub k_p: [f64; 4],
    pub k_i: [f64; 4],
    pub x_t: f64,
    /// System base (MVA).
    pub s_b: f64,
    /// Synchronous frequency (Hz).
    pub omega_s: f64,
    /// System inertia (s).
    pub h: f64,
    /// Load damping (pu).
    pub d: f64,
    pub tau_ch: f64,
    pub tau_g: f64,
    /// Governor droop (pu).
    pub r: f64,
}

impl Default for PlantParameters {
    fn default() -> Self {
        PlantParameters {
            x_m: 3.5092,
            x_s: 3.5547,
            x_r: 3.5859,
            r_s: 0.01015,
            r_r: 0.0088,
            h_d: 4.0,
            p: 4.0,
            rho: 1.225,
            r_t: 38.5,
            s_bd: 1.0,
            c_opt: 3.2397e-7,
            k: 1.0 / 45.0,
            k_p: [1.0; 4],
            k_i: [5.0; 4],
            x_t: 0.07,
            s_b: 1000.0,
            omega_s: 60.0,
            h: 4.0,
            d: 1.0,
            tau_ch: 0.3,
            tau_g: 0.1,
            r: 0.05,
        }
    }
}

impl PlantParameters {
    pub fn omega_s_rad(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.omega_s
    }

    /// Open-circuit transient time constant `X_r / (ω_s,rad · R_r)`.
    pub fn t0_prime(&self) -> f64 {
        self.x_r / (self.omega_s_rad() * self.r_r)
    }

    /// Transient reactance `X_s − X_m² / X_r`.
    pub fn x_s_prime(&self) -> f64 {
        self.x_s - self.x_m * self.x_m / self.x_r
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            ("x_m", self.x_m),
            ("x_s", self.x_s),
            ("x_r", self.x_r),
            ("r_r", self.r_r),
            ("h_d", self.h_d),
            ("p", self.p),
            ("rho", self.rho),
            ("r_t", self.r_t),
            ("s_bd", self.s_bd),
            ("c_opt", self.c_opt),
            ("k", self.k),
            ("x_t", self.x_t),
            ("s_b", self.s_b),
            ("omega_s", self.omega_s),
            ("h", self.h),
            ("tau_ch", self.tau_ch),
            ("tau_g", self.tau_g),
            ("r", self.r),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(PlantError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.x_s_prime() > 0.0) {
            return Err(PlantError::InvalidParameter("X'_s must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatingCondition {
    pub v: f64,
    pub theta: f64,
    pub theta_t: f64,
    /// Wind speed (m/s).
    pub v_wind: f64,
    /// Rotor speed (Hz).
    pub omega_r: f64,
    pub p_gen: f64,
    pub q_set: f64,
}

impl Default for OperatingCondition {
    fn default() -> Self {
        OperatingCondition {
            v: 1.0,
            theta: 0.0,
            theta_t: 0.0,
            v_wind: 12.0,
            omega_r: 72.0,
            p_gen: 0.3,
            q_set: 0.0,
        }
    }
}

impl OperatingCondition {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.v > 0.0) {
            return Err(PlantError::InvalidParameter("V must be positive".into()));
        }
        Ok(())
    }
}

/// Constants fixed once against the operating condition.
///
/// `ω_b` in the turbine torque and the per-unit conversion of `C_opt` are
/// not determined by the published data; they are calibrated so that the
/// equilibrium reproduces `P̄_gen` at `ω̄_r`. `tip_speed_scale` multiplies
/// the tip-speed ratio and is calibrated against the relevant rotor mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Calibration {
    /// Tip-speed-ratio multiplier.
    pub tip_speed_scale: f64,
    /// MPPT coefficient on the system base; `None` = `P̄_gen / ω̄_r³`.
    pub c_opt_eff: Option<f64>,
    /// Lumped `½ρπR_t²ω_b v³ / S_b`; `None` = solve from the equilibrium.
    pub torque_scale: Option<f64>,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            tip_speed_scale: DEFAULT_TIP_SPEED_SCALE,
            c_opt_eff: None,
            torque_scale: None,
        }
    }
}

/// Value returned by `calibrate_tip_speed_scale` for the default data,
/// frozen so that model construction does not repeat the search.
pub const DEFAULT_TIP_SPEED_SCALE: f64 = 2.2987;

/// Reference value of the relevant rotor eigenvalue used for calibration.
pub const RELEVANT_EIGENVALUE_TARGET: f64 = -0.0723;

/// Support gains of one operating mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeGains {
    pub id: u8,
    pub k_ie: f64,
    pub k_pc: f64,
}

impl ModeGains {
    pub fn name(&self) -> &'static str {
        match (self.k_ie != 0.0, self.k_pc != 0.0) {
            (false, false) => "MPPT",
            (true, false) => "IE",
            (_, true) => "IEPFC",
        }
    }
}

/// The five modes of the gain table.
pub fn default_modes() -> Vec<ModeGains> {
    vec![
        ModeGains {
            id: 1,
            k_ie: 0.0,
            k_pc: 0.0,
        },
        ModeGains {
            id: 2,
            k_ie: -0.10,
            k_pc: 0.0,
        },
        ModeGains {
            id: 3,
            k_ie: -0.20,
            k_pc: 0.0,
        },
        ModeGains {
            id: 4,
            k_ie: -0.10,
            k_pc: -0.03,
        },
        ModeGains {
            id: 5,
            k_ie: -0.20,
            k_pc: -0.06,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_constants() {
        let p = PlantParameters::default();
        assert!((p.t0_prime() - 3.5859 / (2.0 * std::f64::consts::PI * 60.0 * 0.0088)).abs() < 1e-12);
        assert!((p.t0_prime() - 1.0809).abs() < 1e-3);
        assert!((p.x_s_prime() - 0.12063).abs() < 1e-4);
        p.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<PlantParameters>(r#"{"x_m": 3.0, "bogus": 1}"#);
        assert!(err.is_err());
        let ok: PlantParameters = serde_json::from_str(r#"{"h": 5.0}"#).unwrap();
        assert_eq!(ok.h, 5.0);
        assert_eq!(ok.x_m, 3.5092);
    }
}
