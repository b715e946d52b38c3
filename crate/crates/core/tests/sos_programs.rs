use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roskit::polyalg::Polynomial;
use roskit::sdp::{SdpStatus, SolverOptions};
use roskit::sos::{
    build_barrier_program, check_sos, compile, solve_program, BarrierProgramSpec, DecisionKind, DecisionTerm, SosCheck,
    SosConstraint, SosOutcome, SosProgram, TermOp, Unknown, RESIDUAL_TOL,
};

fn v1() -> Vec<String> {
    vec!["x".to_string()]
}

fn poly(vars: &[String], terms: &[(&[u32], f64)]) -> Polynomial {
    Polynomial::from_terms(vars, terms.iter().map(|(e, c)| (e.to_vec(), *c))).unwrap()
}

fn opts() -> SolverOptions {
    SolverOptions {
        tol: 1e-8,
        ..SolverOptions::default()
    }
}

#[test]
fn classical_quartic_is_sos_and_reconstructs() {
    let xy = vec!["x".to_string(), "y".to_string()];
    let p = poly(&xy, &[(&[4, 0], 2.0), (&[3, 1], 2.0), (&[2, 2], -1.0), (&[0, 4], 5.0)]);
    let SosCheck::Sos(cert) = check_sos(&p).unwrap() else {
        panic!("quartic should be SOS")
    };
    // Independent reconstruction of zᵀ G z.
    let mut recon = Polynomial::zero(&xy);
    for a in 0..cert.basis.len() {
        for b in 0..cert.basis.len() {
            recon.add_term(cert.basis[a].mul(&cert.basis[b]), cert.gram[(a, b)]);
        }
    }
    let diff = recon.sub(&p).unwrap();
    assert!(diff.max_abs_coeff() < 1e-7, "{diff}");
}

#[test]
fn multiplier_program_links_two_blocks() {
    // p − λ·g ∈ Σ² with p = 1 − x², g = 1 − x², λ SOS of degree 0.
    let x = v1();
    let g = poly(&x, &[(&[0], 1.0), (&[2], -1.0)]);
    let p = poly(&x, &[(&[0], 2.0), (&[2], -1.0)]);
    let mut prog = SosProgram::new();
    let lam = prog.add_decision("lambda", &x, 0, DecisionKind::Sos);
    prog.add_constraint(SosConstraint {
        name: "c".into(),
        vars: x.clone(),
        fixed: p,
        terms: vec![DecisionTerm {
            decision: lam,
            scale: -1.0,
            op: TermOp::Multiply(g),
        }],
        half_degree: None,
    });
    let compiled = compile(&prog).unwrap();
    assert_eq!(compiled.sdp.blocks.len(), 2);
    let SosOutcome::Solved { solution, .. } = solve_program(&prog, &opts()).unwrap() else {
        panic!("feasible program")
    };
    assert!(solution.max_residual() < 1e-8);
}

fn one_d_spec(g_u: Polynomial) -> BarrierProgramSpec {
    let x = v1();
    BarrierProgramSpec {
        states: x.clone(),
        disturbances: vec![],
        f: vec![poly(&x, &[(&[1], -1.0)])],
        g_x: vec![poly(&x, &[(&[0], 4.0), (&[2], -1.0)])],
        g_i: vec![poly(&x, &[(&[0], 0.01), (&[2], -1.0)])],
        g_u: vec![g_u],
        g_d: vec![],
        epsilon: 1e-3,
        epsilon_lie: 1e-6,
        barrier_degree: 2,
        lambda_i_degree: None,
        lambda_u_degree: None,
        lambda_xd_degree: 2,
        lambda_b_degree: 2,
        localize_unsafe: false,
        barrier: Unknown::Decision,
        lambda_b: Unknown::Fixed(Polynomial::constant(&x, 1.0)),
    }
}

#[test]
fn one_dimensional_barrier_separates_sets() {
    let x = v1();
    let spec = one_d_spec(poly(&x, &[(&[1], 1.0), (&[0], -1.0)]));
    let (prog, h) = build_barrier_program(&spec).unwrap();
    let SosOutcome::Solved { solution, sdp } = solve_program(&prog, &opts()).unwrap() else {
        panic!("expected feasible barrier program")
    };
    assert!(matches!(sdp.status, SdpStatus::Optimal | SdpStatus::Feasible));
    assert!(solution.max_residual() < RESIDUAL_TOL);
    let b = &solution.decisions[h.barrier.unwrap()];
    assert!(b.eval(&[0.0]) <= 0.0);
    assert!(b.eval(&[1.2]) > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let z: f64 = rng.gen_range(-2.0..2.0);
        if z * z <= 0.01 {
            assert!(b.eval(&[z]) <= 1e-6);
        }
        if z >= 1.0 {
            assert!(b.eval(&[z]) >= 1e-3 - 1e-6);
        }
    }
}

#[test]
fn overlapping_unsafe_set_is_infeasible() {
    let x = v1();
    let spec = one_d_spec(poly(&x, &[(&[1], -1.0)]));
    let (prog, _) = build_barrier_program(&spec).unwrap();
    match solve_program(&prog, &opts()) {
        Ok(SosOutcome::Infeasible { .. }) => {}
        Ok(SosOutcome::Solved { solution, .. }) => {
            panic!("unexpected certificate, residual {}", solution.max_residual())
        }
        Err(e) => panic!("expected infeasibility certificate, got {e}"),
    }
}

#[test]
fn bilinear_program_rejected() {
    let x = v1();
    let mut spec = one_d_spec(poly(&x, &[(&[1], 1.0), (&[0], -1.0)]));
    spec.lambda_b = Unknown::Decision;
    assert!(build_barrier_program(&spec).is_err());
}

#[test]
fn disturbance_multipliers_live_in_joint_variables() {
    let xs = vec!["w".to_string(), "p".to_string()];
    let xd = vec!["w".to_string(), "p".to_string(), "d".to_string()];
    // ẇ = −w + p − d, ṗ = −p − w, d ∈ [0, 0.15].
    let f = vec![
        poly(&xd, &[(&[1, 0, 0], -1.0), (&[0, 1, 0], 1.0), (&[0, 0, 1], -1.0)]),
        poly(&xd, &[(&[0, 1, 0], -1.0), (&[1, 0, 0], -1.0)]),
    ];
    let g_d = poly(&xd, &[(&[0, 0, 1], 0.15), (&[0, 0, 2], -1.0)]);
    let spec = BarrierProgramSpec {
        states: xs.clone(),
        disturbances: vec!["d".into()],
        f,
        g_x: vec![
            poly(&xs, &[(&[0, 0], 1.0), (&[2, 0], -1.0)]),
            poly(&xs, &[(&[0, 0], 1.0), (&[0, 2], -1.0)]),
        ],
        g_i: vec![poly(&xs, &[(&[0, 0], 0.0025), (&[2, 0], -1.0), (&[0, 2], -1.0)])],
        g_u: vec![poly(&xs, &[(&[2, 0], 1.0), (&[0, 0], -0.64)])],
        g_d: vec![g_d],
        epsilon: 1e-3,
        epsilon_lie: 1e-6,
        barrier_degree: 4,
        lambda_i_degree: None,
        lambda_u_degree: None,
        lambda_xd_degree: 2,
        lambda_b_degree: 2,
        localize_unsafe: false,
        barrier: Unknown::Decision,
        lambda_b: Unknown::Fixed(Polynomial::constant(&xd, 1.0)),
    };
    let (prog, h) = build_barrier_program(&spec).unwrap();
    let names: Vec<&str> = prog.decisions.iter().map(|d| d.name.as_str()).collect();
    assert!(names.contains(&"lambda_D0"));
    assert!(names.contains(&"lambda_X0"));
    for d in &prog.decisions {
        if d.name.starts_with("lambda_D") || d.name.starts_with("lambda_X") {
            assert_eq!(d.vars, xd);
        }
    }
    let SosOutcome::Solved { solution, .. } = solve_program(&prog, &opts()).unwrap() else {
        panic!("toy should be certifiable")
    };
    assert!(solution.max_residual() < RESIDUAL_TOL);
    let b = &solution.decisions[h.barrier.unwrap()];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let w: f64 = rng.gen_range(-1.0..1.0);
        let p: f64 = rng.gen_range(-1.0..1.0);
        if w * w + p * p <= 0.0025 {
            assert!(b.eval(&[w, p]) <= 1e-6);
        }
        if w * w >= 0.64 {
            assert!(b.eval(&[w, p]) >= 1e-3 - 1e-6);
        }
    }
}
