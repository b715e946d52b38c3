use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dae::{SupportInput, N_ALGEBRAIC, N_STATES, OMEGA_R, P_GEN};
use super::equilibrium::{fd_jacobian, Equilibrium, EQUILIBRIUM_TOL};
use super::PlantError;
use crate::linalg::{eigen, Mat, Vector};

/// Linearized DAE
/// `Δẋ = A_s Δx + B_s Δy + M_s1 Δω̇ + M_s2 Δω`,
/// `0 = C_s Δx + D_s Δy + N_s1 Δω̇ + N_s2 Δω`,
/// `ΔP_gen = E_s Δx + F_s Δy`, with input columns at unit gain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearDae {
    pub a_s: Mat,
    pub b_s: Mat,
    pub c_s: Mat,
    pub d_s: Mat,
    pub m_s1: Vector,
    pub n_s1: Vector,
    pub m_s2: Vector,
    pub n_s2: Vector,
    pub e_s: Vector,
    pub f_s: Vector,
    pub d_s_condition: f64,
}

pub const FD_RELATIVE_STEP: f64 = 1e-6;

pub fn linearize(eq: &Equilibrium) -> Result<LinearDae, PlantError> {
    linearize_with_step(eq, FD_RELATIVE_STEP)
}

pub fn linearize_with_step(eq: &Equilibrium, rel: f64) -> Result<LinearDae, PlantError> {
    if !(eq.max_residual < EQUILIBRIUM_TOL) {
        return Err(PlantError::InvalidParameter(format!(
            "equilibrium residual {:.2e} is above {EQUILIBRIUM_TOL:.0e}",
            eq.max_residual
        )));
    }
    let n = N_STATES;
    let m = N_ALGEBRAIC;
    let model = &eq.model;
    let fun = |z: &[f64]| -> Result<Vec<f64>, PlantError> {
        let u = SupportInput {
            d_omega_dot: z[n + m],
            d_omega: z[n + m + 1],
            k_ie: 1.0,
            k_pc: 1.0,
        };
        let mut r = model.residual_vector(&z[..n], &z[n..n + m], u)?;
        r.push(z[n + P_GEN]);
        Ok(r)
    };
    let mut z: Vec<f64> = eq.x().to_vec();
    z.extend_from_slice(&eq.y());
    z.extend_from_slice(&[0.0, 0.0]);
    let j = fd_jacobian(&fun, &z, rel)?;

    let d_s = j.view((n, n), (m, m)).into_owned();
    let sv = d_s.clone().svd(false, false).singular_values;
    let d_s_condition = sv.max() / sv.min();
    if !(d_s_condition < 1e12) {
        return Err(PlantError::Singular(format!(
            "D_s condition number {d_s_condition:.3e}"
        )));
    }
    Ok(LinearDae {
        a_s: j.view((0, 0), (n, n)).into_owned(),
        b_s: j.view((0, n), (n, m)).into_owned(),
        c_s: j.view((n, 0), (m, n)).into_owned(),
        d_s,
        m_s1: j.view((0, n + m), (n, 1)).column(0).into_owned(),
        n_s1: j.view((n, n + m), (m, 1)).column(0).into_owned(),
        m_s2: j.view((0, n + m + 1), (n, 1)).column(0).into_owned(),
        n_s2: j.view((n, n + m + 1), (m, 1)).column(0).into_owned(),
        e_s: j.view((n + m, 0), (1, n)).row(0).transpose(),
        f_s: j.view((n + m, n), (1, m)).row(0).transpose(),
        d_s_condition,
    })
}

/// Seven-state WTG model at unit support gains:
/// `Δẋ = A Δx + b1 Δω̇ + b2 Δω`, `ΔP_gen = cᵀ Δx + d1 Δω̇ + d2 Δω`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateSpace {
    pub a_sys: Mat,
    pub b_sys1: Vector,
    pub b_sys2: Vector,
    pub c_sys: Vector,
    pub d_sys1: f64,
    pub d_sys2: f64,
}

impl StateSpace {
    /// `G(s)` from `(Δω̇, Δω)` to `ΔP_gen`.
    pub fn frequency_response(&self, s: Complex64) -> Option<[Complex64; 2]> {
        let n = self.a_sys.nrows();
        let m = nalgebra::DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let d = if i == j { s } else { Complex64::new(0.0, 0.0) };
            d - self.a_sys[(i, j)]
        });
        let lu = m.lu();
        let c = self.c_sys.map(|v| Complex64::new(v, 0.0));
        let mut out = [Complex64::new(self.d_sys1, 0.0), Complex64::new(self.d_sys2, 0.0)];
        for (k, b) in [&self.b_sys1, &self.b_sys2].into_iter().enumerate() {
            let x = lu.solve(&b.map(|v| Complex64::new(v, 0.0)))?;
            out[k] += c.dot(&x);
        }
        Some(out)
    }
}

impl LinearDae {
    /// Response of the unreduced DAE at Laplace variable `s`.
    pub fn frequency_response(&self, s: Complex64) -> Option<[Complex64; 2]> {
        let n = self.a_s.nrows();
        let m = self.d_s.nrows();
        let c = |v: f64| Complex64::new(v, 0.0);
        let mut k = nalgebra::DMatrix::<Complex64>::zeros(n + m, n + m);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = if i == j { s } else { c(0.0) } - c(self.a_s[(i, j)]);
            }
            for j in 0..m {
                k[(i, n + j)] = -c(self.b_s[(i, j)]);
            }
        }
        for i in 0..m {
            for j in 0..n {
                k[(n + i, j)] = -c(self.c_s[(i, j)]);
            }
            for j in 0..m {
                k[(n + i, n + j)] = -c(self.d_s[(i, j)]);
            }
        }
        let lu = k.lu();
        let mut out = [c(0.0); 2];
        for (idx, (mv, nv)) in [(&self.m_s1, &self.n_s1), (&self.m_s2, &self.n_s2)]
            .into_iter()
            .enumerate()
        {
            let rhs = nalgebra::DVector::<Complex64>::from_iterator(n + m, mv.iter().chain(nv.iter()).map(|&v| c(v)));
            let z = lu.solve(&rhs)?;
            let mut y = c(0.0);
            for i in 0..n {
                y += c(self.e_s[i]) * z[i];
            }
            for i in 0..m {
                y += c(self.f_s[i]) * z[n + i];
            }
            out[idx] = y;
        }
        Some(out)
    }
}

/// Eliminates the algebraic variables.
pub fn kron_reduce(dae: &LinearDae) -> Result<StateSpace, PlantError> {
    let lu = dae.d_s.clone().lu();
    let singular = || PlantError::Singular("D_s is singular".into());
    let dinv_c = lu.solve(&dae.c_s).ok_or_else(singular)?;
    let dinv_n1 = lu.solve(&dae.n_s1).ok_or_else(singular)?;
    let dinv_n2 = lu.solve(&dae.n_s2).ok_or_else(singular)?;
    Ok(StateSpace {
        a_sys: &dae.a_s - &dae.b_s * &dinv_c,
        b_sys1: &dae.m_s1 - &dae.b_s * &dinv_n1,
        b_sys2: &dae.m_s2 - &dae.b_s * &dinv_n2,
        c_sys: &dae.e_s - dinv_c.transpose() * &dae.f_s,
        d_sys1: -dae.f_s.dot(&dinv_n1),
        d_sys2: -dae.f_s.dot(&dinv_n2),
    })
}

/// Scalar reduced model
/// `Δω̇_r = A_rd Δω_r + B_rd1 Δω̇ + B_rd2 Δω`,
/// `ΔP_gen = C_rd Δω_r + D_rd1 Δω̇ + D_rd2 Δω`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedCoefficients {
    pub a_rd: f64,
    pub b_rd1: f64,
    pub b_rd2: f64,
    pub c_rd: f64,
    pub d_rd1: f64,
    pub d_rd2: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmaReduction {
    /// Index of the retained state in the seven-state model.
    pub relevant_state: usize,
    pub a11: f64,
    pub a12: Vector,
    pub a21: Vector,
    pub a22: Mat,
    pub b_r1: f64,
    pub b_r2: f64,
    pub b_z1: Vector,
    pub b_z2: Vector,
    pub c_r: f64,
    pub c_z: Vector,
    pub d_sys1: f64,
    pub d_sys2: f64,
    pub eigenvalues: Vec<Complex64>,
    pub lambda_r: Complex64,
    /// Set when `λ_r` is complex and only its real part was used.
    pub lambda_r_complex: bool,
    pub v_r: Vec<Complex64>,
    pub participation: Mat,
    pub a22_max_real: f64,
    /// Reduced model at unit gains.
    pub unit: ReducedCoefficients,
}

impl SmaReduction {
    /// Reduced coefficients at the given support gains.
    pub fn coefficients(&self, k_ie: f64, k_pc: f64) -> ReducedCoefficients {
        ReducedCoefficients {
            a_rd: self.unit.a_rd,
            c_rd: self.unit.c_rd,
            b_rd1: k_ie * self.unit.b_rd1 + 0.0,
            d_rd1: k_ie * self.unit.d_rd1 + 0.0,
            b_rd2: k_pc * self.unit.b_rd2 + 0.0,
            d_rd2: k_pc * self.unit.d_rd2 + 0.0,
        }
    }
}

pub const PARTICIPATION_TIE_TOL: f64 = 1e-6;

/// Selective modal analysis retaining the rotor speed.
pub fn sma_reduce(ss: &StateSpace) -> Result<SmaReduction, PlantError> {
    sma_reduce_state(ss, OMEGA_R)
}

pub fn sma_reduce_state(ss: &StateSpace, keep: usize) -> Result<SmaReduction, PlantError> {
    let n = ss.a_sys.nrows();
    if keep >= n {
        return Err(PlantError::InvalidParameter(format!("state index {keep} out of range")));
    }
    let dec = eigen(&ss.a_sys).ok_or_else(|| PlantError::Singular("eigen-decomposition failed".into()))?;
    if let Some(l) = dec.values.iter().find(|l| l.re >= 0.0) {
        return Err(PlantError::NotHurwitz(format!("A_sys has eigenvalue {l}")));
    }
    let part = dec.participation();
    let row: Vec<f64> = (0..n).map(|i| part[(keep, i)]).collect();
    let best = (0..n)
        .max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap_or(std::cmp::Ordering::Equal))
        .expect("non-empty");
    // Conjugate partners share participation; any other tie is ambiguous.
    let lam = dec.values[best];
    for i in 0..n {
        if i != best && (row[i] - row[best]).abs() < PARTICIPATION_TIE_TOL && (dec.values[i] - lam.conj()).norm() > 1e-9
        {
            return Err(PlantError::AmbiguousMode(format!(
                "modes {lam} and {} tie in participation of state {keep}",
                dec.values[i]
            )));
        }
    }
    let lambda_r_complex = lam.im.abs() > 1e-12;
    let lr = lam.re;

    let rest: Vec<usize> = (0..n).filter(|&i| i != keep).collect();
    let a11 = ss.a_sys[(keep, keep)];
    let a12 = Vector::from_iterator(n - 1, rest.iter().map(|&j| ss.a_sys[(keep, j)]));
    let a21 = Vector::from_iterator(n - 1, rest.iter().map(|&i| ss.a_sys[(i, keep)]));
    let a22 = Mat::from_fn(n - 1, n - 1, |i, j| ss.a_sys[(rest[i], rest[j])]);
    let pick = |v: &Vector| Vector::from_iterator(n - 1, rest.iter().map(|&i| v[i]));
    let (b_z1, b_z2, c_z) = (pick(&ss.b_sys1), pick(&ss.b_sys2), pick(&ss.c_sys));
    let (b_r1, b_r2, c_r) = (ss.b_sys1[keep], ss.b_sys2[keep], ss.c_sys[keep]);

    let a22_max_real = a22
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(a22_max_real < 0.0) {
        return Err(PlantError::NotHurwitz(format!(
            "A_22 has eigenvalue with real part {a22_max_real}"
        )));
    }
    if !(a22_max_real < lr) {
        return Err(PlantError::AmbiguousMode(format!(
            "A_22 mode at {a22_max_real} is slower than the relevant mode {lr}"
        )));
    }

    let shifted = Mat::identity(n - 1, n - 1) * lr - &a22;
    let x = shifted
        .lu()
        .solve(&a21)
        .ok_or_else(|| PlantError::Singular("λ_r I − A_22 is singular".into()))?;
    let neg = (-&a22).lu();
    let singular = || PlantError::Singular("A_22 is singular".into());
    let y1 = neg.solve(&b_z1).ok_or_else(singular)?;
    let y2 = neg.solve(&b_z2).ok_or_else(singular)?;
    let unit = ReducedCoefficients {
        a_rd: a11 + a12.dot(&x),
        c_rd: c_r + c_z.dot(&x),
        b_rd1: b_r1 + a12.dot(&y1),
        d_rd1: ss.d_sys1 + c_z.dot(&y1),
        b_rd2: b_r2 + a12.dot(&y2),
        d_rd2: ss.d_sys2 + c_z.dot(&y2),
    };
    Ok(SmaReduction {
        relevant_state: keep,
        a11,
        a12,
        a21,
        a22,
        b_r1,
        b_r2,
        b_z1,
        b_z2,
        c_r,
        c_z,
        d_sys1: ss.d_sys1,
        d_sys2: ss.d_sys2,
        v_r: dec.right.column(best).iter().copied().collect(),
        eigenvalues: dec.values.clone(),
        lambda_r: lam,
        lambda_r_complex,
        participation: part,
        a22_max_real,
        unit,
    })
}
