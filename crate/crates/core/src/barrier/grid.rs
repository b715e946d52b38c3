use serde::{Deserialize, Serialize};

use crate::polyalg::{Monomial, Polynomial};

const PRIMES: [u32; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton points in the scaled box `[-1, 1]^n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
}

pub const DEFAULT_PROBE_POINTS: usize = 4096;

impl ProbeGrid {
    pub fn halton(dim: usize, count: usize) -> Self {
        assert!(
            dim <= PRIMES.len(),
            "probe grid supports up to {} dimensions",
            PRIMES.len()
        );
        // Index 0 maps to the corner; start at 1.
        let points = (1..=count as u64)
            .map(|i| (0..dim).map(|k| 2.0 * radical_inverse(i, PRIMES[k]) - 1.0).collect())
            .collect();
        ProbeGrid { dim, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Fraction of points with `p ≤ 0`.
    pub fn coverage(&self, p: &Polynomial) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        let inside = self.points.iter().filter(|x| p.eval(x) <= 0.0).count();
        inside as f64 / self.points.len() as f64
    }

    /// Weights `w_α = mean_k x_k^α` for all monomials up to `degree`, so that
    /// `Σ_α w_α c_α` is the grid mean of `Σ_α c_α x^α`.
    pub fn moment_weights(&self, vars: &[String], degree: u32) -> Polynomial {
        let mut w = Polynomial::zero(vars);
        let n = self.points.len() as f64;
        for m in Monomial::all_up_to(self.dim, degree) {
            let mean = self.points.iter().map(|x| m.eval(x)).sum::<f64>() / n;
            w.add_term(m, mean);
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_lie_in_box_and_are_deterministic() {
        let g = ProbeGrid::halton(4, 512);
        assert_eq!(g.len(), 512);
        assert!(g.points.iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(g.points, ProbeGrid::halton(4, 512).points);
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn moment_weights_reproduce_grid_mean() {
        let vars = vec!["x".to_string(), "y".to_string()];
        let g = ProbeGrid::halton(2, 256);
        let p = Polynomial::from_terms(&vars, [(vec![0, 0], 1.0), (vec![2, 0], -2.0), (vec![1, 1], 0.5)]).unwrap();
        let w = g.moment_weights(&vars, 2);
        let via_weights: f64 = p.terms().map(|(m, c)| c * w.coeff(m)).sum();
        let direct = g.points.iter().map(|x| p.eval(x)).sum::<f64>() / g.len() as f64;
        assert!((via_weights - direct).abs() < 1e-12);
    }
}
