use serde::{Deserialize, Serialize};

use super::{BlockKind, Residuals, SdpProblem, SdpSolution};
use crate::linalg::{is_psd_shifted, Mat};

/// Independent residual computation on the original (unscaled) problem.
pub(crate) fn residuals(prob: &SdpProblem, sol: &SdpSolution) -> Residuals {
    let mut rp2 = 0.0;
    let mut b2 = 0.0;
    for c in &prob.constraints {
        let mut ax = c.rhs;
        for (k, s) in &c.blocks {
            ax -= s.inner(&sol.x[*k]);
        }
        for &(k, v) in &c.free {
            ax -= v * sol.free.get(k).copied().unwrap_or(0.0);
        }
        rp2 += ax * ax;
        b2 += c.rhs * c.rhs;
    }

    let mut rd2 = 0.0;
    let mut c2 = 0.0;
    for (k, kind) in prob.blocks.iter().enumerate() {
        let n = kind.dim();
        let mut r = Mat::zeros(n, n);
        for (bk, s) in &prob.objective.blocks {
            if *bk == k {
                s.add_to_dense(&mut r, 1.0);
            }
        }
        c2 += r.norm_squared();
        for (i, con) in prob.constraints.iter().enumerate() {
            for (bk, s) in &con.blocks {
                if *bk == k {
                    s.add_to_dense(&mut r, -sol.y[i]);
                }
            }
        }
        r -= &sol.z[k];
        if matches!(kind, BlockKind::Diag(_)) {
            rd2 += r.diagonal().norm_squared();
        } else {
            rd2 += r.norm_squared();
        }
    }
    let mut rf = vec![0.0; prob.free_vars];
    for &(k, v) in &prob.objective.free {
        rf[k] += v;
        c2 += v * v;
    }
    for (i, con) in prob.constraints.iter().enumerate() {
        for &(k, v) in &con.free {
            rf[k] -= v * sol.y[i];
        }
    }
    rd2 += rf.iter().map(|v| v * v).sum::<f64>();

    let mut pobj: f64 = prob.objective.blocks.iter().map(|(k, s)| s.inner(&sol.x[*k])).sum();
    pobj += prob.objective.free.iter().map(|&(k, v)| v * sol.free[k]).sum::<f64>();
    let dobj: f64 = prob.constraints.iter().zip(&sol.y).map(|(c, y)| c.rhs * y).sum();
    Residuals {
        primal: rp2.sqrt() / (1.0 + b2.sqrt()),
        dual: rd2.sqrt() / (1.0 + c2.sqrt()),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
        primal_objective: pobj,
        dual_objective: dobj,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub residuals: Residuals,
    pub tol: f64,
    pub primal_ok: bool,
    pub dual_ok: bool,
    pub gap_ok: bool,
    /// Blocks whose primal matrix fails Cholesky after a `1e-9` shift.
    pub non_psd_primal: Vec<usize>,
    pub non_psd_dual: Vec<usize>,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Recomputes residuals and PSD-ness of a reported solution.
pub fn verify_solution(prob: &SdpProblem, sol: &SdpSolution, tol: f64) -> VerifyReport {
    let mut failures = Vec::new();
    let shape_ok = sol.x.len() == prob.blocks.len()
        && sol.z.len() == prob.blocks.len()
        && sol.y.len() == prob.constraints.len()
        && sol.free.len() == prob.free_vars
        && prob
            .blocks
            .iter()
            .zip(&sol.x)
            .all(|(k, x)| x.nrows() == k.dim() && x.ncols() == k.dim());
    if !shape_ok {
        failures.push("solution shape does not match problem".to_string());
        return VerifyReport {
            residuals: Residuals::default(),
            tol,
            primal_ok: false,
            dual_ok: false,
            gap_ok: false,
            non_psd_primal: vec![],
            non_psd_dual: vec![],
            failures,
        };
    }
    let r = residuals(prob, sol);
    let primal_ok = r.primal <= tol;
    let dual_ok = r.dual <= tol;
    let gap_ok = r.gap <= tol;
    if !primal_ok {
        failures.push(format!("primal residual {:.3e} > {tol:.1e}", r.primal));
    }
    if !dual_ok {
        failures.push(format!("dual residual {:.3e} > {tol:.1e}", r.dual));
    }
    if !gap_ok {
        failures.push(format!("duality gap {:.3e} > {tol:.1e}", r.gap));
    }
    let non_psd_primal: Vec<usize> = sol
        .x
        .iter()
        .enumerate()
        .filter(|(_, x)| !is_psd_shifted(x, 1e-9))
        .map(|(k, _)| k)
        .collect();
    let non_psd_dual: Vec<usize> = sol
        .z
        .iter()
        .enumerate()
        .filter(|(_, z)| !is_psd_shifted(z, 1e-9))
        .map(|(k, _)| k)
        .collect();
    if !non_psd_primal.is_empty() {
        failures.push(format!("primal blocks not PSD: {non_psd_primal:?}"));
    }
    if !non_psd_dual.is_empty() {
        failures.push(format!("dual blocks not PSD: {non_psd_dual:?}"));
    }
    VerifyReport {
        residuals: r,
        tol,
        primal_ok,
        dual_ok,
        gap_ok,
        non_psd_primal,
        non_psd_dual,
        failures,
    }
}
