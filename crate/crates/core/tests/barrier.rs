use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roskit::barrier::*;
use roskit::linalg::{Mat, Vector};
use roskit::plant::*;
use roskit::polyalg::{ball_poly, Polynomial};

fn mode_scenario(id: u8, d: Disturbance) -> SafetyScenario {
    let a = PlantAnalysis::default_checked().expect("plant");
    let cl = a
        .closed_loop(&default_modes()[(id - 1) as usize], ModelOrder::Reduced)
        .expect("closed loop");
    SafetyScenario::for_mode(&cl, d).expect("scenario")
}

fn settings(seeds: usize) -> AlgorithmSettings {
    AlgorithmSettings {
        seeds,
        ..AlgorithmSettings::default()
    }
}

/// `ẋ = −x + d` on `[-1, 2]` with `x ≥ 1` unsafe.
fn toy(disturbance: Disturbance, limit: f64) -> SafetyScenario {
    let s = SafetyScenario {
        name: "toy".into(),
        mode_id: 0,
        state_names: vec!["x".into()],
        a: Mat::from_element(1, 1, -1.0),
        e: Vector::from_element(1, 1.0),
        disturbance,
        lo: vec![-1.0],
        hi: vec![2.0],
        unsafe_set: UnsafeSpec::Above { index: 0, limit },
        epsilon: 1e-3,
        epsilon_lie: 1e-6,
        degree_init: 4,
        degree_max: 6,
        multiplier_degree: 2,
        lambda_b_degree: 0,
        sim: SimSettings::default(),
    };
    s.validate().unwrap();
    s
}

/// Mode 1 without disturbance, shared between tests.
fn mode1_nominal() -> &'static (SafetyScenario, RosEstimate) {
    static CELL: OnceLock<(SafetyScenario, RosEstimate)> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut sc = mode_scenario(1, Disturbance::Point { value: 0.0 });
        sc.degree_max = 6;
        let ros = estimate_ros(&sc, &settings(1)).expect("mode 1 estimate");
        (sc, ros)
    })
}

#[test]
fn toy_estimate_is_sound_and_covers_most_of_the_true_set() {
    let sc = toy(Disturbance::Interval { max: 0.1 }, 1.0);
    let ros = estimate_ros(&sc, &settings(2)).unwrap();
    // x(t) = d + (x₀ − d)e^{−t} for constant d, and any schedule in [0, 0.1]
    // keeps x below max(x₀, 0.1): the true set in the box is x₀ < 1.
    let grid = ProbeGrid::halton(1, 2000);
    let mut truly_safe = 0;
    let mut covered = 0;
    for s in &grid.points {
        let x = ros.scaling.to_physical(s)[0];
        let inside = ros.eval_scaled(s) <= 0.0;
        if x < 1.0 {
            truly_safe += 1;
            covered += inside as usize;
        } else {
            assert!(!inside, "unsafe x = {x} inside the estimate");
        }
    }
    let frac = covered as f64 / truly_safe as f64;
    assert!(frac >= 0.8, "covers {frac:.3} of the true set");
    for x in [-0.5, 0.0, 0.7] {
        assert!(ros.contains(&[x]), "B({x}) = {}", ros.eval_physical(&[x]));
    }
    let report = soundness_check(&sc, &ros.barrier, &[], 2000, 5).unwrap();
    assert!(report.passes(sc.epsilon), "{report:?}");
}

#[test]
fn toy_growth_is_monotone_and_contains_the_initial_barrier() {
    let sc = toy(Disturbance::Interval { max: 0.1 }, 1.0);
    let st = settings(1);
    let seeds = find_safe_seeds(&sc, 1, &st).unwrap();
    let b0 = initialize(&sc, &seeds, &st).unwrap();
    let ros = expand(&sc, &b0, &st).unwrap();
    assert!(
        ros.growth.windows(2).all(|w| w[1] >= w[0] - st.monotone_slack),
        "{:?}",
        ros.growth
    );
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let s = [rng.gen_range(-1.0..1.0)];
        if b0.barrier.eval(&s) <= 0.0 {
            assert!(ros.eval_scaled(&s) <= 1e-6, "containment lost at {s:?}");
        }
    }
}

#[test]
fn maximal_initial_barrier_plateaus_quickly() {
    // ẋ = −x on [-1, 1] with x ≥ 0.9 unsafe: B⁰ = x − 0.85 already covers
    // nearly all of the safe part of the box.
    let mut sc = toy(Disturbance::Point { value: 0.0 }, 0.9);
    sc.lo = vec![-1.0];
    sc.hi = vec![1.0];
    sc.degree_max = sc.degree_init;
    let vars = sc.state_names.clone();
    let b0 = BarrierCertificate {
        barrier: Polynomial::var(&vars, 0).add_constant(-0.85),
        lambda_b: Polynomial::constant(&vars, 0.1),
        degree: 4,
        stats: CertificateStats::default(),
    };
    let ros = expand(&sc, &b0, &AlgorithmSettings::default()).unwrap();
    let g = &ros.growth;
    assert!(ros.iterations <= 3, "{:?}", ros.history);
    assert!(g.last().unwrap() - g[0] < 0.05 + 1e-12, "{g:?}");
    let last = &g[g.len().saturating_sub(2)..];
    assert!(last.len() < 2 || (last[1] - last[0]).abs() < 0.01, "{g:?}");
}

#[test]
fn mode1_nominal_projection_covers_simulated_safe_grid() {
    let (sc, ros) = mode1_nominal();
    let prop = sc.propagator();
    let n = 25;
    let tail: Vec<f64> = (0..9).map(|k| -1.0 + 0.25 * k as f64).collect();
    let (mut safe, mut covered) = (0, 0);
    for i in 0..n {
        for j in 0..n {
            let s0 = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            let s1 = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
            let mut any_safe = false;
            let mut any_in = false;
            for &s2 in &tail {
                for &s3 in &tail {
                    let s = [s0, s1, s2, s3];
                    let x = sc.scaling().to_physical(&s);
                    if !any_safe && prop.min_margin(&x, |_| 0.0, 60.0, &sc.unsafe_set) > 0.0 {
                        any_safe = true;
                    }
                    any_in |= ros.eval_scaled(&s) <= 0.0;
                }
            }
            if any_safe {
                safe += 1;
                covered += any_in as usize;
            }
        }
    }
    let frac = covered as f64 / safe as f64;
    assert!(frac >= 0.85, "projection covers {frac:.3} of {safe} safe cells");
}

#[test]
fn mode1_nominal_estimate_is_sound() {
    let (sc, ros) = mode1_nominal();
    assert!(ros.growth.windows(2).all(|w| w[1] >= w[0] - 1e-3));
    let report = soundness_check(sc, &ros.barrier, &[], 2000, 9).unwrap();
    assert!(report.passes(sc.epsilon), "{report:?}");
    let v = sample_validate(ros, sc, 300, 2).unwrap();
    assert!(v.samples > 0);
    assert_eq!(v.total_violations(), 0, "{v:?}");
}

#[test]
fn inflated_barrier_is_caught_by_validation() {
    let (sc, ros) = mode1_nominal();
    let mut bad = ros.clone();
    // Stretch the zero level outward by 1.5 along Δω.
    bad.barrier = ros
        .barrier
        .compose_affine(&[0.0; 4], &[1.0 / 1.5, 1.0, 1.0, 1.0])
        .unwrap();
    let v = sample_validate(&bad, sc, 300, 2).unwrap();
    assert!(v.certified_violations() > 0, "{v:?}");
}

#[test]
fn estimate_round_trips_through_json() {
    let (_, ros) = mode1_nominal();
    let back = RosEstimate::from_json(&ros.to_json().unwrap()).unwrap();
    let s = [0.1, -0.2, 0.3, 0.4];
    assert_eq!(back.eval_scaled(&s), ros.eval_scaled(&s));
    assert_eq!(back.growth, ros.growth);
}

#[test]
fn empty_estimate_reports_no_samples() {
    let (sc, ros) = mode1_nominal();
    let mut empty = ros.clone();
    empty.barrier = Polynomial::constant(&ros.state_names, 1.0);
    let v = sample_validate(&empty, sc, 10, 1).unwrap();
    assert_eq!(v.samples, 0);
    assert!(v.note.unwrap().contains("no samples"));
}

#[test]
fn nominal_single_seed_is_the_origin() {
    let sc = mode_scenario(1, Disturbance::Point { value: 0.0 });
    let seeds = find_safe_seeds(&sc, 1, &AlgorithmSettings::default()).unwrap();
    assert_eq!(seeds.len(), 1);
    assert!(seeds[0].iter().all(|v| v.abs() < 1e-12), "{seeds:?}");
}

#[test]
fn unsafe_origin_is_not_seeded() {
    // Without support the load step drives the origin below −0.5 Hz.
    let sc = mode_scenario(1, Disturbance::Point { value: 0.15 });
    let seeds = find_safe_seeds(&sc, 4, &AlgorithmSettings::default()).unwrap();
    assert!(seeds.iter().all(|x| x.iter().any(|v| v.abs() > 1e-6)), "{seeds:?}");
}

#[test]
fn seeds_are_safe_under_both_disturbance_extremes() {
    let sc = mode_scenario(3, Disturbance::Point { value: 0.15 });
    let st = AlgorithmSettings::default();
    let seeds = find_safe_seeds(&sc, 6, &st).unwrap();
    assert_eq!(seeds.len(), 6);
    let prop = sc.propagator();
    for x in &seeds {
        assert!(sc.in_domain(x));
        for d in [0.0, 0.15] {
            assert!(
                prop.min_margin(x, |_| d, 60.0, &sc.unsafe_set) > st.seed_margin,
                "{x:?} d = {d}"
            );
        }
    }
    // The safe pre-disturbance origin leads, then the worst-case steady state.
    assert!(seeds[0].iter().all(|v| v.abs() < 1e-12));
    let eq = sc.equilibrium(0.15).unwrap();
    let dist: f64 = seeds[1].iter().zip(&eq).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(dist < 1e-9);
    let without = AlgorithmSettings {
        origin_seed: false,
        ..st
    };
    assert_eq!(find_safe_seeds(&sc, 6, &without).unwrap()[0], seeds[1]);
}

#[test]
fn no_safe_seed_under_overwhelming_disturbance() {
    let sc = mode_scenario(1, Disturbance::Point { value: 0.5 });
    let err = find_safe_seeds(&sc, 1, &AlgorithmSettings::default()).unwrap_err();
    assert!(matches!(err, BarrierError::NoneFound(_)), "{err}");
}

fn sampled_max_on_ball(b: &Polynomial, center: &[f64], rho: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..2000 {
        let v: Vec<f64> = center.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        let r = rho * rng.gen_range(0.0f64..1.0).powf(0.25);
        let s: Vec<f64> = center.iter().zip(&v).map(|(c, a)| c + r * a / norm).collect();
        worst = worst.max(b.eval(&s));
    }
    worst
}

#[test]
fn single_seed_initialization_at_the_origin() {
    let sc = mode_scenario(2, Disturbance::Point { value: 0.0 });
    let st = AlgorithmSettings::default();
    let b0 = initialize(&sc, &[vec![0.0; 4]], &st).unwrap();
    assert_eq!(b0.degree, 4);
    let c = sc.scaling().to_scaled(&[0.0; 4]);
    assert!(sampled_max_on_ball(&b0.barrier, &c, st.rho, 1) <= 1e-6);
}

#[test]
fn two_distant_seeds_are_both_certified() {
    let sc = mode_scenario(2, Disturbance::Point { value: 0.0 });
    let st = AlgorithmSettings::default();
    let seeds = vec![vec![0.0; 4], vec![0.1, -0.1, -0.1, -2.0]];
    let b0 = initialize(&sc, &seeds, &st).unwrap();
    for (k, x) in seeds.iter().enumerate() {
        let c = sc.scaling().to_scaled(x);
        assert!(
            sampled_max_on_ball(&b0.barrier, &c, st.rho, k as u64) <= 1e-6,
            "seed {k}"
        );
    }
}

#[test]
fn zero_multiplier_is_rejected() {
    let sc = mode_scenario(2, Disturbance::Point { value: 0.0 });
    let st = AlgorithmSettings {
        r: 0.0,
        ..AlgorithmSettings::default()
    };
    let err = initialize(&sc, &[vec![0.0; 4]], &st).unwrap_err();
    assert!(matches!(err, BarrierError::Precondition(_)), "{err}");
}

#[test]
fn verification_of_small_balls() {
    let nominal = mode_scenario(1, Disturbance::Point { value: 0.0 });
    let st = AlgorithmSettings::default();
    let vars = nominal.state_names.clone();
    let ball = |sc: &SafetyScenario, x: &[f64], r: f64| ball_poly(&vars, &sc.scaling().to_scaled(x), r);

    let v = verify_safety(&nominal, &[ball(&nominal, &[0.0; 4], 0.01)], &st).unwrap();
    let Verification::Certified(cert) = v else {
        panic!("origin ball not certified without disturbance");
    };
    let report = soundness_check(&nominal, &cert.barrier, &[ball(&nominal, &[0.0; 4], 0.01)], 1000, 3).unwrap();
    assert!(report.passes(nominal.epsilon), "{report:?}");

    // The pre-disturbance state of mode 1 overshoots the limit at d = 0.15.
    let worst = mode_scenario(1, Disturbance::Point { value: 0.15 });
    let v = verify_safety(&worst, &[ball(&worst, &[0.0; 4], 0.01)], &st).unwrap();
    assert!(matches!(v, Verification::Unverified { .. }));

    let v = verify_safety(&nominal, &[ball(&nominal, &[0.55, 0.0, 0.0, 0.0], 0.01)], &st).unwrap();
    assert!(matches!(v, Verification::Unverified { .. }));
}

#[test]
fn literal_containment_sign_runs() {
    let sc = toy(Disturbance::Interval { max: 0.1 }, 1.0);
    let st = AlgorithmSettings {
        containment: ContainmentSign::Literal,
        max_iterations: 3,
        ..settings(1)
    };
    let ros = estimate_ros(&sc, &st).unwrap();
    assert_eq!(ros.containment, ContainmentSign::Literal);
    assert!(!ros.history.is_empty());
}
