//! Small dense linear-algebra helpers shared by the solver, plant and simulator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Exact one-step propagator of `ẋ = A x + e` over `h`:
/// returns `(Φ, γ)` with `x(t + h) = Φ x(t) + γ`.
pub fn affine_step(a: &Mat, e: &Vector, h: f64) -> (Mat, Vector) {
    let n = a.nrows();
    let mut aug = Mat::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, 1)).copy_from(e);
    let p = (aug * h).exp();
    let phi = p.view((0, 0), (n, n)).into_owned();
    let gamma = p.view((0, n), (n, 1)).column(0).into_owned();
    (phi, gamma)
}

/// True if `m + shift·I` admits a Cholesky factorization.
pub fn is_psd_shifted(m: &Mat, shift: f64) -> bool {
    let n = m.nrows();
    let mut s = m.clone();
    for i in 0..n {
        s[(i, i)] += shift;
    }
    s.cholesky().is_some()
}

pub fn min_sym_eigenvalue(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    let s = 0.5 * (m + m.transpose());
    s.symmetric_eigen().eigenvalues.min()
}

/// Eigen-decomposition of a general real matrix with right eigenvectors
/// `V` and left eigenvectors `W` normalized so that `Wᵀ V = I`.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<Complex64>,
    pub right: DMatrix<Complex64>,
    pub left: DMatrix<Complex64>,
}

impl EigenDecomposition {
    /// Participation factor of state `k` in mode `i`: `|v_ki · w_ki|`.
    pub fn participation(&self) -> Mat {
        let n = self.values.len();
        Mat::from_fn(n, n, |k, i| (self.right[(k, i)] * self.left[(k, i)]).norm())
    }
}

pub fn eigen(a: &Mat) -> Option<EigenDecomposition> {
    let n = a.nrows();
    let mut values: Vec<Complex64> = a.complex_eigenvalues().iter().copied().collect();
    values.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    let ac: DMatrix<Complex64> = a.map(|v| Complex64::new(v, 0.0));
    let atc = ac.transpose();
    let mut right = DMatrix::<Complex64>::zeros(n, n);
    let mut left = DMatrix::<Complex64>::zeros(n, n);
    for (i, &lam) in values.iter().enumerate() {
        let v = inverse_iteration(&ac, lam)?;
        let w = inverse_iteration(&atc, lam)?;
        let s = w.transpose() * &v;
        let s = s[(0, 0)];
        if s.norm() < 1e-300 {
            return None;
        }
        right.set_column(i, &v);
        left.set_column(i, &(w / s));
    }
    Some(EigenDecomposition { values, right, left })
}

fn inverse_iteration(a: &DMatrix<Complex64>, lam: Complex64) -> Option<DVector<Complex64>> {
    let n = a.nrows();
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.norm()));
    let shift = lam + Complex64::new(scale * 1e-10, scale * 1e-10);
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] -= shift;
    }
    let lu = m.lu();
    let mut v = DVector::<Complex64>::from_fn(n, |i, _| Complex64::new(1.0 + 0.1 * i as f64, 0.05 * i as f64));
    for _ in 0..6 {
        let next = lu.solve(&v)?;
        let nrm = next.norm();
        if !nrm.is_finite() || nrm == 0.0 {
            return None;
        }
        v = next / Complex64::new(nrm, 0.0);
    }
    Some(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_step_scalar() {
        let a = Mat::from_element(1, 1, -2.0);
        let e = Vector::from_element(1, 4.0);
        let (phi, g) = affine_step(&a, &e, 0.5);
        let exact_phi = (-1.0f64).exp();
        assert!((phi[(0, 0)] - exact_phi).abs() < 1e-14);
        assert!((g[0] - 2.0 * (1.0 - exact_phi)).abs() < 1e-14);
    }

    #[test]
    fn eigen_left_right_biorthogonal() {
        let a = Mat::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, -2.0, -1.0, 0.5, 0.1, 0.0, -3.0]);
        let ed = eigen(&a).unwrap();
        let ac = a.map(|v| Complex64::new(v, 0.0));
        for i in 0..3 {
            let v = ed.right.column(i);
            let r = &ac * v - v * ed.values[i];
            assert!(r.norm() < 1e-9);
        }
        let prod = ed.left.transpose() * &ed.right;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - Complex64::new(target, 0.0)).norm() < 1e-8);
            }
        }
        let p = ed.participation();
        for i in 0..3 {
            let s: f64 = (0..3).map(|k| p[(k, i)]).sum();
            assert!(s >= 1.0 - 1e-9);
        }
    }
}
