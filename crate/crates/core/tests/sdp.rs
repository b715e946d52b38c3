use proptest::prelude::*;
use roskit::linalg::Mat;
use roskit::sdp::*;

fn sym(n: usize, dense: &Mat) -> SparseSym {
    let mut s = SparseSym::new();
    for i in 0..n {
        for j in i..n {
            if dense[(i, j)] != 0.0 {
                s.add(i, j, dense[(i, j)]);
            }
        }
    }
    s
}

fn identity(n: usize) -> SparseSym {
    let mut s = SparseSym::new();
    for i in 0..n {
        s.add(i, i, 1.0);
    }
    s
}

/// `min <C, X>` s.t. `tr X = 1`, `X ⪰ 0`; the optimum is `λ_min(C)`.
fn trace_problem(c: &Mat) -> SdpProblem {
    let n = c.nrows();
    let mut p = SdpProblem::new(vec![BlockKind::Psd(n)], 0);
    p.add_constraint(Constraint {
        blocks: vec![(0, identity(n))],
        free: vec![],
        rhs: 1.0,
    });
    p.objective = LinearForm {
        blocks: vec![(0, sym(n, c))],
        free: vec![],
    };
    p
}

fn random_symmetric(n: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |v| {
        let m = Mat::from_vec(n, n, v);
        (&m + m.transpose()) * 0.5
    })
}

fn is_psd_shifted(m: &Mat, shift: f64) -> bool {
    let n = m.nrows();
    (m + Mat::identity(n, n) * shift).cholesky().is_some()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trace_constrained_minimum_is_the_smallest_eigenvalue(c in (2usize..6).prop_flat_map(random_symmetric)) {
        let p = trace_problem(&c);
        let s = solve(&p, 1e-9).unwrap();
        prop_assert_eq!(s.status, SdpStatus::Optimal, "{}", s.message);
        let lmin = c.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!((s.residuals.primal_objective - lmin).abs() < 1e-6,
            "{} vs {lmin}", s.residuals.primal_objective);
        prop_assert!(verify_solution(&p, &s, 1e-7).passed());
        for x in &s.x {
            prop_assert!(is_psd_shifted(x, 1e-9));
        }
    }
}

#[test]
fn free_variable_with_slack() {
    // min u  s.t.  u - s = 2,  s >= 0  →  u = 2.
    let mut p = SdpProblem::new(vec![BlockKind::Diag(1)], 1);
    p.add_constraint(Constraint {
        blocks: vec![(0, SparseSym::single(0, 0, -1.0))],
        free: vec![(0, 1.0)],
        rhs: 2.0,
    });
    p.objective = LinearForm {
        blocks: vec![],
        free: vec![(0, 1.0)],
    };
    let s = solve(&p, 1e-9).unwrap();
    assert_eq!(s.status, SdpStatus::Optimal, "{}", s.message);
    assert!((s.free[0] - 2.0).abs() < 1e-6, "{}", s.free[0]);
    assert!(s.x[0][(0, 0)].abs() < 1e-6);
}

#[test]
fn pure_feasibility_returns_a_psd_point() {
    let mut p = SdpProblem::new(vec![BlockKind::Psd(3)], 0);
    p.add_constraint(Constraint {
        blocks: vec![(0, identity(3))],
        free: vec![],
        rhs: 3.0,
    });
    p.add_constraint(Constraint {
        blocks: vec![(0, SparseSym::single(0, 1, 0.5))],
        free: vec![],
        rhs: 0.5,
    });
    let s = solve(&p, 1e-9).unwrap();
    assert!(s.is_usable(), "{}", s.message);
    let x = &s.x[0];
    assert!((x.trace() - 3.0).abs() < 1e-7);
    assert!((x[(0, 1)] - 0.5).abs() < 1e-7);
    assert!(is_psd_shifted(x, 1e-9));
}

#[test]
fn off_diagonal_equality_has_optimum_two() {
    let mut p = SdpProblem::new(vec![BlockKind::Psd(2)], 0);
    p.add_constraint(Constraint {
        blocks: vec![(0, SparseSym::single(0, 1, 0.5))],
        free: vec![],
        rhs: 1.0,
    });
    p.objective = LinearForm {
        blocks: vec![(0, identity(2))],
        free: vec![],
    };
    let s = solve(&p, 1e-9).unwrap();
    assert_eq!(s.status, SdpStatus::Optimal);
    assert!((s.residuals.primal_objective - 2.0).abs() < 1e-7);
    assert!((s.residuals.dual_objective - 2.0).abs() < 1e-7);
}

#[test]
fn infeasible_problem_is_reported() {
    // tr X = -1 has no PSD solution.
    let mut p = SdpProblem::new(vec![BlockKind::Psd(2)], 0);
    p.add_constraint(Constraint {
        blocks: vec![(0, identity(2))],
        free: vec![],
        rhs: -1.0,
    });
    let s = solve(&p, 1e-9).unwrap();
    assert!(!s.is_usable(), "{:?}", s.status);
}

#[test]
fn verification_flags_perturbed_solutions() {
    let c = Mat::from_row_slice(3, 3, &[2.0, 0.3, -0.1, 0.3, 1.0, 0.2, -0.1, 0.2, 1.5]);
    let p = trace_problem(&c);
    let s = solve(&p, 1e-9).unwrap();
    assert!(verify_solution(&p, &s, 1e-7).passed());
    let mut bad = s.clone();
    bad.x[0][(0, 0)] += 1e-2;
    let r = verify_solution(&p, &bad, 1e-7);
    assert!(!r.passed() && !r.primal_ok);
    let mut bad = s.clone();
    bad.y[0] += 1e-2;
    assert!(!verify_solution(&p, &bad, 1e-7).dual_ok);
}

#[test]
fn solves_are_deterministic() {
    let c = Mat::from_row_slice(2, 2, &[1.0, -0.4, -0.4, 0.5]);
    let p = trace_problem(&c);
    let a = solve(&p, 1e-9).unwrap();
    let b = solve(&p, 1e-9).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.y, b.y);
    assert_eq!(a.iterations, b.iterations);
}

/// Parses sparse SDPA text back into dense per-block matrices.
fn parse_sdpa(text: &str) -> (usize, Vec<i64>, Vec<f64>, Vec<Vec<Mat>>) {
    let mut lines = text.lines();
    let m: usize = lines.next().unwrap().trim().parse().unwrap();
    let nb: usize = lines.next().unwrap().trim().parse().unwrap();
    let dims: Vec<i64> = lines
        .next()
        .unwrap()
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    assert_eq!(dims.len(), nb);
    let rhs: Vec<f64> = lines
        .next()
        .unwrap()
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    let mut mats: Vec<Vec<Mat>> = (0..=m)
        .map(|_| {
            dims.iter()
                .map(|&d| Mat::zeros(d.unsigned_abs() as usize, d.unsigned_abs() as usize))
                .collect()
        })
        .collect();
    for l in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        let (k, b, i, j): (usize, usize, usize, usize) = (
            t[0].parse().unwrap(),
            t[1].parse().unwrap(),
            t[2].parse().unwrap(),
            t[3].parse().unwrap(),
        );
        let v: f64 = t[4].parse().unwrap();
        assert!(i <= j);
        mats[k][b - 1][(i - 1, j - 1)] = v;
        mats[k][b - 1][(j - 1, i - 1)] = v;
    }
    (m, dims, rhs, mats)
}

#[test]
fn sdpa_export_round_trips() {
    let mut p = SdpProblem::new(vec![BlockKind::Psd(2), BlockKind::Diag(2)], 1);
    p.add_constraint(Constraint {
        blocks: vec![(0, SparseSym::single(0, 1, 0.75)), (1, SparseSym::single(1, 1, 2.0))],
        free: vec![(0, 1.5)],
        rhs: 4.0,
    });
    p.add_constraint(Constraint {
        blocks: vec![(0, identity(2))],
        free: vec![],
        rhs: -0.25,
    });
    p.objective = LinearForm {
        blocks: vec![(0, SparseSym::single(0, 0, 3.0))],
        free: vec![(0, -1.0)],
    };
    let mut buf = Vec::new();
    write_sdpa(&p, &mut buf).unwrap();
    let (m, dims, rhs, mats) = parse_sdpa(std::str::from_utf8(&buf).unwrap());
    assert_eq!(m, 2);
    assert_eq!(dims, vec![2, -2, -2]);
    assert_eq!(rhs, vec![4.0, -0.25]);
    // Objective is negated; free variables split into u⁺ and u⁻.
    assert_eq!(mats[0][0][(0, 0)], -3.0);
    assert_eq!(mats[0][2][(0, 0)], 1.0);
    assert_eq!(mats[0][2][(1, 1)], -1.0);
    assert_eq!(mats[1][0][(0, 1)], 0.75);
    assert_eq!(mats[1][1][(1, 1)], 2.0);
    assert_eq!(mats[1][2][(0, 0)], 1.5);
    assert_eq!(mats[1][2][(1, 1)], -1.5);
    assert_eq!(mats[2][0], Mat::identity(2, 2));
}

#[test]
fn malformed_problems_are_rejected() {
    let mut p = SdpProblem::new(vec![BlockKind::Diag(2)], 0);
    p.add_constraint(Constraint {
        blocks: vec![(0, SparseSym::single(0, 1, 1.0))],
        free: vec![],
        rhs: 1.0,
    });
    assert!(matches!(solve(&p, 1e-8), Err(SdpError::Malformed(_))));
    assert!(write_sdpa(&p, Vec::new()).is_err());
}
