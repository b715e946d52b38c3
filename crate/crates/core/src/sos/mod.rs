//! Sum-of-squares programs compiled to SDPs through Gram matrices and
//! coefficient matching.

mod barrier_program;
mod program;

pub use barrier_program::{build_barrier_program, BarrierHandles, BarrierProgramSpec, Unknown};
pub use program::{
    compile, Compiled, DecisionKind, DecisionPoly, DecisionTerm, ObjectiveTerm, Recovery, SosCertificate,
    SosConstraint, SosProgram, SosSolution, TermOp,
};

use thiserror::Error;

use crate::polyalg::{PolyError, Polynomial};
use crate::sdp::{self, SdpError, SdpSolution, SdpStatus, SolverOptions};

/// Largest coefficient mismatch accepted between an expression and its Gram
/// reconstruction.
pub const RESIDUAL_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum SosError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("{what} has odd degree {degree}")]
    OddDegree { what: String, degree: u32 },
    #[error("constraint {constraint}: degree {degree} exceeds Gram basis of half-degree {basis_half_degree}")]
    DegreeBound {
        constraint: String,
        degree: u32,
        basis_half_degree: u32,
    },
    #[error("bilinear program: {0}")]
    Bilinear(String),
    #[error("malformed program: {0}")]
    Structure(String),
    #[error("solver numerical failure: {0}")]
    NumericalFailure(String),
}

#[derive(Debug)]
pub enum SosOutcome {
    Solved { solution: SosSolution, sdp: SdpSolution },
    Infeasible { message: String },
}

/// Compiles, solves and recovers a program. Solver failures that are not
/// infeasibility certificates are reported as errors.
pub fn solve_program(prog: &SosProgram, opts: &SolverOptions) -> Result<SosOutcome, SosError> {
    let compiled = compile(prog)?;
    let sol = sdp::solve_with(&compiled.sdp, opts)?;
    match sol.status {
        SdpStatus::Infeasible => Ok(SosOutcome::Infeasible { message: sol.message }),
        SdpStatus::NumericalFailure => Err(SosError::NumericalFailure(sol.message)),
        SdpStatus::Optimal | SdpStatus::Feasible => {
            let solution = compiled.recovery.recover(prog, &sol)?;
            Ok(SosOutcome::Solved { solution, sdp: sol })
        }
    }
}

#[derive(Debug)]
pub enum SosCheck {
    Sos(SosCertificate),
    NotSos,
}

/// Searches for a Gram decomposition `p = zᵀ G z` over the full monomial
/// basis up to `deg(p)/2`.
pub fn check_sos(p: &Polynomial) -> Result<SosCheck, SosError> {
    if p.degree() % 2 == 1 {
        return Err(SosError::OddDegree {
            what: "polynomial".into(),
            degree: p.degree(),
        });
    }
    let mut prog = SosProgram::new();
    prog.add_constraint(SosConstraint {
        name: "p".into(),
        vars: p.vars().to_vec(),
        fixed: p.clone(),
        terms: vec![],
        half_degree: None,
    });
    let opts = SolverOptions {
        tol: 1e-9,
        ..SolverOptions::default()
    };
    match solve_program(&prog, &opts)? {
        SosOutcome::Infeasible { .. } => Ok(SosCheck::NotSos),
        SosOutcome::Solved { mut solution, .. } => {
            let cert = solution.certificates.remove(0);
            if cert.max_residual < RESIDUAL_TOL && crate::linalg::is_psd_shifted(&cert.gram, 1e-9) {
                Ok(SosCheck::Sos(cert))
            } else {
                Err(SosError::NumericalFailure(format!(
                    "Gram residual {:.2e} after solve",
                    cert.max_residual
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::Monomial;

    fn xy() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    #[test]
    fn perfect_square_is_sos() {
        let p = Polynomial::from_terms(&xy(), [(vec![2, 0], 1.0), (vec![1, 1], 2.0), (vec![0, 2], 1.0)]).unwrap();
        let SosCheck::Sos(c) = check_sos(&p).unwrap() else {
            panic!("expected SOS")
        };
        assert_eq!(c.basis.len(), 3);
        let ix = c.basis.iter().position(|m| *m == Monomial::new(vec![1, 0])).unwrap();
        let iy = c.basis.iter().position(|m| *m == Monomial::new(vec![0, 1])).unwrap();
        for (a, b) in [(ix, ix), (ix, iy), (iy, iy)] {
            assert!((c.gram[(a, b)] - 1.0).abs() < 1e-4, "{}", c.gram);
        }
        assert!(c.max_residual < RESIDUAL_TOL);
    }

    #[test]
    fn negative_square_is_not_sos() {
        let p = Polynomial::var(&["x".to_string()], 0).pow(2).scale(-1.0);
        assert!(matches!(check_sos(&p).unwrap(), SosCheck::NotSos));
    }

    #[test]
    fn odd_degree_rejected() {
        let p = Polynomial::var(&["x".to_string()], 0).pow(3);
        assert!(matches!(check_sos(&p), Err(SosError::OddDegree { .. })));
    }

    #[test]
    fn single_free_decision_counts() {
        let x = vec!["x".to_string()];
        let mut prog = SosProgram::new();
        let s = prog.add_decision("sigma", &x, 2, DecisionKind::Free);
        prog.add_constraint(SosConstraint {
            name: "sigma".into(),
            vars: x.clone(),
            fixed: Polynomial::zero(&x),
            terms: vec![DecisionTerm {
                decision: s,
                scale: 1.0,
                op: TermOp::Identity,
            }],
            half_degree: None,
        });
        let c = compile(&prog).unwrap();
        assert_eq!(c.sdp.blocks, vec![crate::sdp::BlockKind::Psd(2)]);
        assert_eq!(c.sdp.constraints.len(), 3);
        assert_eq!(c.sdp.free_vars, 3);
    }

    #[test]
    fn degree_bound_violation() {
        let x = vec!["x".to_string()];
        let mut prog = SosProgram::new();
        prog.add_constraint(SosConstraint {
            name: "c".into(),
            vars: x.clone(),
            fixed: Polynomial::var(&x, 0).pow(4),
            terms: vec![],
            half_degree: Some(1),
        });
        assert!(matches!(compile(&prog), Err(SosError::DegreeBound { .. })));
    }
}
