use serde::{Deserialize, Serialize};

use super::{PolyError, Polynomial};

/// Per-variable affine map between physical units and the `[-1, 1]` box:
/// `physical = center + half_width · scaled`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
}

impl Scaling {
    pub fn new(center: Vec<f64>, half_width: Vec<f64>) -> Result<Self, PolyError> {
        if center.len() != half_width.len() {
            return Err(PolyError::Dimension {
                expected: center.len(),
                got: half_width.len(),
            });
        }
        if let Some(&w) = half_width.iter().find(|w| !(**w > 0.0)) {
            return Err(PolyError::NonPositiveHalfWidth(w));
        }
        Ok(Scaling { center, half_width })
    }

    pub fn identity(n: usize) -> Self {
        Scaling {
            center: vec![0.0; n],
            half_width: vec![1.0; n],
        }
    }

    /// Builds the scaling that maps `[lo_i, hi_i]` onto `[-1, 1]`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self, PolyError> {
        let center = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let hw = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
        Scaling::new(center, hw)
    }

    pub fn len(&self) -> usize {
        self.center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center.is_empty()
    }

    pub fn to_scaled(&self, physical: &[f64]) -> Vec<f64> {
        physical
            .iter()
            .zip(self.center.iter().zip(&self.half_width))
            .map(|(x, (c, w))| (x - c) / w)
            .collect()
    }

    pub fn to_physical(&self, scaled: &[f64]) -> Vec<f64> {
        scaled
            .iter()
            .zip(self.center.iter().zip(&self.half_width))
            .map(|(y, (c, w))| c + w * y)
            .collect()
    }

    /// Extends the scaling with extra trailing coordinates.
    pub fn extended(&self, center: &[f64], half_width: &[f64]) -> Result<Self, PolyError> {
        let mut c = self.center.clone();
        let mut w = self.half_width.clone();
        c.extend_from_slice(center);
        w.extend_from_slice(half_width);
        Scaling::new(c, w)
    }
}

/// Expresses a polynomial given in physical coordinates in scaled
/// coordinates, so that `rescale(p)(to_scaled(x)) == p(x)`.
pub fn rescale(p: &Polynomial, s: &Scaling) -> Result<Polynomial, PolyError> {
    p.compose_affine(&s.center, &s.half_width)
}

/// Inverse of [`rescale`]: maps a scaled-coordinate polynomial back to
/// physical coordinates.
pub fn unscale(p: &Polynomial, s: &Scaling) -> Result<Polynomial, PolyError> {
    let offset: Vec<f64> = s.center.iter().zip(&s.half_width).map(|(c, w)| -c / w).collect();
    let gain: Vec<f64> = s.half_width.iter().map(|w| 1.0 / w).collect();
    p.compose_affine(&offset, &gain)
}

/// `{x : g_i(x) ≥ 0 for all i}` together with the scaling used to build it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemialgebraicSet {
    pub variables: Vec<String>,
    pub inequalities: Vec<Polynomial>,
    pub scaling: Scaling,
}

impl SemialgebraicSet {
    pub fn new(variables: Vec<String>, inequalities: Vec<Polynomial>, scaling: Scaling) -> Result<Self, PolyError> {
        if scaling.len() != variables.len() {
            return Err(PolyError::Dimension {
                expected: variables.len(),
                got: scaling.len(),
            });
        }
        for g in &inequalities {
            if g.vars() != variables.as_slice() {
                return Err(PolyError::VariableMismatch {
                    left: variables.clone(),
                    right: g.vars().to_vec(),
                });
            }
        }
        Ok(SemialgebraicSet {
            variables,
            inequalities,
            scaling,
        })
    }

    /// The scaled unit box `1 - y_i² ≥ 0` for every coordinate.
    pub fn unit_box(variables: Vec<String>, scaling: Scaling) -> Result<Self, PolyError> {
        let n = variables.len();
        let ineqs = (0..n)
            .map(|i| Polynomial::var(&variables, i).pow(2).scale(-1.0).add_constant(1.0))
            .collect();
        SemialgebraicSet::new(variables, ineqs, scaling)
    }

    /// Ball `ρ² − ‖y − c‖² ≥ 0` in scaled coordinates.
    pub fn ball(variables: Vec<String>, center: &[f64], radius: f64, scaling: Scaling) -> Result<Self, PolyError> {
        let g = ball_poly(&variables, center, radius);
        SemialgebraicSet::new(variables, vec![g], scaling)
    }

    /// Membership test in scaled coordinates with slack `tol`.
    pub fn contains_scaled(&self, y: &[f64], tol: f64) -> bool {
        self.inequalities.iter().all(|g| g.eval(y) >= -tol)
    }
}

pub fn ball_poly(vars: &[String], center: &[f64], radius: f64) -> Polynomial {
    let mut g = Polynomial::constant(vars, radius * radius);
    for (i, &c) in center.iter().enumerate() {
        let d = Polynomial::var(vars, i).add_constant(-c);
        g = g.sub(&d.pow(2)).expect("same variables");
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescale_simple() {
        let v = vec!["x".to_string()];
        let p = Polynomial::var(&v, 0);
        let s = Scaling::new(vec![0.0], vec![2.0]).unwrap();
        let r = rescale(&p, &s).unwrap();
        assert_eq!(r, Polynomial::var(&v, 0).scale(2.0));
        let id = rescale(&p, &Scaling::identity(1)).unwrap();
        assert_eq!(id, p);
    }

    #[test]
    fn half_width_must_be_positive() {
        assert!(Scaling::new(vec![0.0], vec![0.0]).is_err());
        assert!(Scaling::new(vec![0.0], vec![-1.0]).is_err());
        assert!(Scaling::new(vec![0.0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn unit_box_membership() {
        let v = vec!["a".to_string(), "b".to_string()];
        let set = SemialgebraicSet::unit_box(v, Scaling::identity(2)).unwrap();
        assert!(set.contains_scaled(&[0.5, -1.0], 0.0));
        assert!(!set.contains_scaled(&[1.1, 0.0], 0.0));
    }

    #[test]
    fn ball_polynomial() {
        let v = vec!["a".to_string(), "b".to_string()];
        let g = ball_poly(&v, &[0.5, 0.0], 0.1);
        assert!((g.eval(&[0.5, 0.0]) - 0.01).abs() < 1e-15);
        assert!(g.eval(&[0.7, 0.0]) < 0.0);
    }
}
