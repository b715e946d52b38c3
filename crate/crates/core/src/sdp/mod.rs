//! Block-structured semidefinite programs and a dense primal-dual
//! interior-point solver.
//!
//! Primal form:
//!
//! ```text
//! minimize    Σ_j <C_j, X_j> + c_fᵀ u
//! subject to  Σ_j <A_ij, X_j> + a_iᵀ u = b_i,   X_j ⪰ 0,   u free
//! ```

mod sdpa;
mod solver;
mod verify;

pub use sdpa::{export_sdpa, write_sdpa};
pub use solver::{solve, solve_with, SolverOptions};
pub use verify::{verify_solution, VerifyReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Mat;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("tolerance {0} outside [1e-10, 1e-4]")]
    Tolerance(f64),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Symmetric sparse matrix stored as upper-triangle entries `(i, j, v)` with
/// `i <= j`; `v` is the value of both `(i, j)` and `(j, i)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseSym {
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `v` to entry `(i, j)` (and `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push((a, b, v));
    }

    pub fn single(i: usize, j: usize, v: f64) -> Self {
        let mut s = Self::new();
        s.add(i, j, v);
        s
    }

    /// Sorts entries and merges duplicates; drops exact zeros.
    pub fn canonicalize(&mut self) {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(i, j, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        self.entries = out;
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `<A, X>` for symmetric `X`.
    pub fn inner(&self, x: &Mat) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * x[(i, i)] } else { 2.0 * v * x[(i, j)] })
            .sum()
    }

    pub fn add_to_dense(&self, m: &mut Mat, scale: f64) {
        for &(i, j, v) in &self.entries {
            m[(i, j)] += scale * v;
            if i != j {
                m[(j, i)] += scale * v;
            }
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum()
    }

    pub fn to_dense(&self, n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        self.add_to_dense(&mut m, 1.0);
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    /// Dense symmetric positive-semidefinite block of the given order.
    Psd(usize),
    /// Nonnegative diagonal block (a vector of nonnegative slacks).
    Diag(usize),
}

impl BlockKind {
    pub fn dim(&self) -> usize {
        match *self {
            BlockKind::Psd(n) | BlockKind::Diag(n) => n,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearForm {
    pub blocks: Vec<(usize, SparseSym)>,
    pub free: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub blocks: Vec<(usize, SparseSym)>,
    pub free: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub blocks: Vec<BlockKind>,
    pub free_vars: usize,
    pub constraints: Vec<Constraint>,
    pub objective: LinearForm,
}

impl SdpProblem {
    pub fn new(blocks: Vec<BlockKind>, free_vars: usize) -> Self {
        SdpProblem {
            blocks,
            free_vars,
            constraints: Vec::new(),
            objective: LinearForm::default(),
        }
    }

    pub fn add_constraint(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    /// Checks structural well-formedness.
    pub fn validate(&self) -> Result<(), SdpError> {
        if self.constraints.is_empty() {
            return Err(SdpError::Malformed("no constraints".into()));
        }
        for (k, b) in self.blocks.iter().enumerate() {
            if b.dim() == 0 {
                return Err(SdpError::Malformed(format!("block {k} has dimension 0")));
            }
        }
        let check_blocks = |blocks: &[(usize, SparseSym)], what: &str| -> Result<(), SdpError> {
            for (b, s) in blocks {
                let kind = self
                    .blocks
                    .get(*b)
                    .ok_or_else(|| SdpError::Malformed(format!("{what}: block {b} out of range")))?;
                for &(i, j, v) in &s.entries {
                    if i > j || j >= kind.dim() {
                        return Err(SdpError::Malformed(format!("{what}: bad entry ({i},{j}) in block {b}")));
                    }
                    if matches!(kind, BlockKind::Diag(_)) && i != j {
                        return Err(SdpError::Malformed(format!(
                            "{what}: off-diagonal entry in diagonal block {b}"
                        )));
                    }
                    if !v.is_finite() {
                        return Err(SdpError::Malformed(format!("{what}: non-finite coefficient")));
                    }
                }
            }
            Ok(())
        };
        let check_free = |free: &[(usize, f64)], what: &str| -> Result<(), SdpError> {
            for &(k, v) in free {
                if k >= self.free_vars || !v.is_finite() {
                    return Err(SdpError::Malformed(format!("{what}: bad free-variable entry {k}")));
                }
            }
            Ok(())
        };
        for (i, c) in self.constraints.iter().enumerate() {
            let what = format!("constraint {i}");
            check_blocks(&c.blocks, &what)?;
            check_free(&c.free, &what)?;
            if !c.rhs.is_finite() {
                return Err(SdpError::Malformed(format!("{what}: non-finite rhs")));
            }
        }
        check_blocks(&self.objective.blocks, "objective")?;
        check_free(&self.objective.free, "objective")?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    Feasible,
    Infeasible,
    NumericalFailure,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖b − A(X) − A_f u‖ / (1 + ‖b‖)`
    pub primal: f64,
    /// `‖C − Aᵀy − Z‖ / (1 + ‖C‖)`, including the free-variable rows.
    pub dual: f64,
    /// `|pobj − dobj| / (1 + |pobj| + |dobj|)`
    pub gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub message: String,
    /// Primal blocks; diagonal blocks are stored as dense diagonal matrices.
    pub x: Vec<Mat>,
    pub free: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<Mat>,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_usable(&self) -> bool {
        matches!(self.status, SdpStatus::Optimal | SdpStatus::Feasible)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_sym_inner() {
        let mut a = SparseSym::new();
        a.add(1, 0, 2.0);
        a.add(0, 0, 1.0);
        a.add(0, 1, 1.0);
        a.canonicalize();
        assert_eq!(a.entries, vec![(0, 0, 1.0), (0, 1, 3.0)]);
        let x = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 7.0]);
        assert!((a.inner(&x) - (2.0 + 2.0 * 3.0 * 0.5)).abs() < 1e-15);
        assert!((a.inner(&x) - (a.to_dense(2).component_mul(&x)).sum()).abs() < 1e-15);
    }

    #[test]
    fn validation_catches_errors() {
        let mut p = SdpProblem::new(vec![BlockKind::Psd(2)], 0);
        assert!(p.validate().is_err());
        p.add_constraint(Constraint {
            blocks: vec![(0, SparseSym::single(0, 2, 1.0))],
            free: vec![],
            rhs: 1.0,
        });
        assert!(p.validate().is_err());
        p.constraints[0].blocks[0].1 = SparseSym::single(0, 1, 1.0);
        assert!(p.validate().is_ok());
        p.constraints[0].free.push((0, 1.0));
        assert!(p.validate().is_err());
    }
}
