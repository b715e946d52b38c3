use std::sync::OnceLock;

use roskit::barrier::*;
use roskit::hybrid::*;
use roskit::linalg::{affine_step, Mat, Vector};
use roskit::plant::*;
use roskit::polyalg::{Polynomial, Scaling};

fn analysis() -> &'static PlantAnalysis {
    static A: OnceLock<PlantAnalysis> = OnceLock::new();
    A.get_or_init(|| PlantAnalysis::default_checked().expect("plant"))
}

fn automaton(order: ModelOrder) -> HybridAutomaton {
    HybridAutomaton::new(analysis(), &default_modes(), order).unwrap()
}

fn names() -> Vec<String> {
    RELEVANT_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Guard with barrier `c0 + c·s` in the default scaled box.
fn affine_guard(c0: f64, c: [f64; 4]) -> RosEstimate {
    let vars = names();
    let mut b = Polynomial::constant(&vars, c0);
    for (i, ci) in c.iter().enumerate() {
        b = b.add(&Polynomial::var(&vars, i).scale(*ci)).unwrap();
    }
    RosEstimate {
        scenario_name: "synthetic".into(),
        mode_id: 0,
        scenario_hash: String::new(),
        disturbance: Disturbance::Point { value: 0.15 },
        state_names: vars.clone(),
        scaling: Scaling::from_box(&DEFAULT_LO, &DEFAULT_HI).unwrap(),
        barrier: b,
        lambda_b: Polynomial::constant(&vars, 0.1),
        degree: 1,
        iterations: 0,
        growth: vec![],
        history: vec![],
        stats: CertificateStats::default(),
        containment: ContainmentSign::Corrected,
    }
}

#[test]
fn unsupported_system_violates_the_limit_and_settles() {
    let aut = automaton(ModelOrder::Full);
    let t = simulate(&aut, &EventScenario::default(), &Policy::fixed(1)).unwrap();
    let (_, nadir) = t.nadir();
    assert!(nadir < -0.5, "nadir {nadir}");
    assert!(!t.is_safe());
    let last = t.dw(t.len() - 1);
    // −ΔP_d·ω_s/(1/R + D) for the default data.
    assert!((last + 0.4286).abs() < 0.005, "settles at {last}");
    assert_eq!(t.len(), 60_001);
    assert!(t.events.is_empty());
}

#[test]
fn zero_disturbance_stays_at_rest() {
    let aut = automaton(ModelOrder::Full);
    let sc = EventScenario {
        steps: vec![],
        horizon: 10.0,
        ..EventScenario::default()
    };
    let t = simulate(&aut, &sc, &Policy::deadband(0.1, 2)).unwrap();
    assert!(t.x.iter().flatten().all(|v| *v == 0.0));
    assert!(t.events.is_empty());
}

fn rk4(a: &Mat, e: &Vector, d: impl Fn(f64) -> f64, horizon: f64, h: f64, every: usize) -> Vec<Vector> {
    let n = a.nrows();
    let mut x = Vector::zeros(n);
    let mut out = vec![x.clone()];
    let steps = (horizon / h).round() as usize;
    for k in 0..steps {
        // Load held at its mid-step value, so steps on the grid are exact.
        let dk = d((k as f64 + 0.5) * h);
        let f = |x: &Vector| a * x + e * dk;
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (0.5 * h)));
        let k3 = f(&(&x + &k2 * (0.5 * h)));
        let k4 = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if (k + 1) % every == 0 {
            out.push(x.clone());
        }
    }
    out
}

#[test]
fn exact_stepping_matches_fine_rk4() {
    let aut = automaton(ModelOrder::Full);
    let sc = EventScenario::with_horizon(30.0);
    let t = simulate(&aut, &sc, &Policy::fixed(2)).unwrap();
    let m = aut.model(2).unwrap();
    let reference = rk4(&m.a, &m.e, |s| sc.disturbance_at(s), 30.0, 1e-4, 10);
    assert_eq!(reference.len(), t.len());
    let worst = reference
        .iter()
        .zip(&t.x)
        .flat_map(|(r, x)| r.iter().zip(x).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "max deviation {worst:.3e}");
}

#[test]
fn deadband_event_is_located_precisely() {
    let aut = automaton(ModelOrder::Full);
    let t = simulate(&aut, &EventScenario::default(), &Policy::deadband(0.3, 2)).unwrap();
    assert_eq!(t.events.len(), 1);
    let ev = &t.events[0];
    assert_eq!((ev.from, ev.to, ev.kind), (1, 2, EventKind::Deadband));
    assert_eq!(ev.state_before, ev.state_after);
    // Independent propagation of Mode 1 from the load step.
    let m = aut.model(1).unwrap();
    let dw_at = |s: f64| {
        let (_, gamma) = affine_step(&m.a, &m.e, s - 1.0);
        (gamma * 0.15)[0]
    };
    assert!(dw_at(ev.time + 2.0 * EVENT_TOL).abs() >= 0.3);
    assert!(dw_at(ev.time - 2.0 * EVENT_TOL).abs() < 0.3);
    assert!((ev.state_before[0].abs() - 0.3).abs() < 1e-5);
    // Mode switches change the dynamics, never the state.
    let k = t.t.partition_point(|&s| s < ev.time);
    assert_eq!(t.mode[k - 1], 1);
    assert_eq!(t.mode[k], 2);
    let jump = (t.dw(k) - t.dw(k - 1)).abs();
    assert!(jump < 1e-3, "Δω jumped by {jump}");
}

#[test]
fn scheduled_switches_fire_at_their_time() {
    let aut = automaton(ModelOrder::Reduced);
    let p = Policy::fixed(1).with_switch(1.2345678, 3).with_switch(5.0, 1);
    let t = simulate(&aut, &EventScenario::with_horizon(10.0), &p).unwrap();
    let times: Vec<f64> = t.events.iter().map(|e| e.time).collect();
    assert_eq!(times, vec![1.2345678, 5.0]);
    assert_eq!(t.mode_at(3.0), 3);
    assert_eq!(t.mode_at(6.0), 1);
    assert!(t.events.iter().all(|e| e.kind == EventKind::Scheduled));
}

#[test]
fn relevant_states_are_components_one_two_three_and_six() {
    let aut = automaton(ModelOrder::Full);
    let t = simulate(&aut, &EventScenario::with_horizon(2.0), &Policy::fixed(1)).unwrap();
    assert_eq!(t.state_names.len(), 10);
    assert_eq!(t.relevant, [0, 1, 2, 5]);
    let k = t.len() - 1;
    assert_eq!(t.relevant_at(k), [t.x[k][0], t.x[k][1], t.x[k][2], t.x[k][5]]);
}

#[test]
fn guard_loop_without_progress_is_reported_as_chattering() {
    let mut aut = automaton(ModelOrder::Reduced);
    // A guard that always holds sends Mode 2 straight back to Mode 1.
    aut.set_guard(1, affine_guard(-1.0, [0.0; 4])).unwrap();
    let mut p = Policy::deadband(0.2, 2).with_guard_rule(2, 1, 1);
    p.deadband.as_mut().unwrap().rearm = true;
    let err = simulate(&aut, &EventScenario::with_horizon(5.0), &p).unwrap_err();
    assert!(
        matches!(err, HybridError::Chattering { events, .. } if events > CHATTER_LIMIT),
        "{err}"
    );
}

#[test]
fn synthetic_guard_crossing_is_refined() {
    // Δω(t) = 0.01 (t − 5) and B = s_Δω, so B(x̄(t)) changes sign at t = 5.
    let n = 101;
    let t: Vec<f64> = (0..n).map(|k| k as f64 * 0.1 + 0.0123).collect();
    let traj = Trajectory {
        order: ModelOrder::Reduced,
        state_names: names(),
        relevant: [0, 1, 2, 3],
        limit: 0.5,
        x: t.iter().map(|s| vec![0.01 * (s - 5.0), 0.0, 0.0, 0.0]).collect(),
        mode: vec![1; n],
        disturbance: vec![0.0; n],
        p_gen: vec![0.0; n],
        rocof: vec![0.0; n],
        events: vec![],
        t,
    };
    let guard = affine_guard(0.0, [1.0, 0.0, 0.0, 0.0]);
    let c = guard_crossings(&traj, &guard, CrossingDirection::NegToPos).unwrap();
    assert_eq!(c.len(), 1);
    assert!((c[0].time - 5.0).abs() < 1e-6, "{}", c[0].time);
    assert!(guard_crossings(&traj, &guard, CrossingDirection::PosToNeg)
        .unwrap()
        .is_empty());
    let flat = affine_guard(1.0, [0.0; 4]);
    assert!(guard_crossings(&traj, &flat, CrossingDirection::Both)
        .unwrap()
        .is_empty());
}

#[test]
fn zero_crossings_respect_direction() {
    let t: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
    let f = |s: f64| (s - 2.5) * (s - 7.5);
    let both = zero_crossings(&t, f, CrossingDirection::Both);
    assert_eq!(both.len(), 2);
    assert!((both[0].0 - 2.5).abs() < 1e-6 && both[0].1 == CrossingDirection::PosToNeg);
    assert!((both[1].0 - 7.5).abs() < 1e-6 && both[1].1 == CrossingDirection::NegToPos);
    assert_eq!(zero_crossings(&t, f, CrossingDirection::NegToPos).len(), 1);
}

#[test]
fn guards_must_use_the_relevant_states() {
    let mut aut = automaton(ModelOrder::Reduced);
    let mut g = affine_guard(0.0, [1.0, 0.0, 0.0, 0.0]);
    g.state_names[3] = "other".into();
    assert!(matches!(aut.set_guard(1, g), Err(HybridError::Guard(_))));
    let p = Policy::fixed(1).with_guard_rule(1, 2, 2);
    assert!(matches!(
        simulate(&aut, &EventScenario::default(), &p),
        Err(HybridError::Guard(_))
    ));
    assert!(matches!(
        simulate(&aut, &EventScenario::default(), &Policy::fixed(9)),
        Err(HybridError::Policy(_))
    ));
}

#[test]
fn earliest_deactivation_follows_the_guard() {
    let aut = automaton(ModelOrder::Reduced);
    let t = simulate(&aut, &EventScenario::with_horizon(20.0), &Policy::deadband(0.46, 2)).unwrap();
    // Guard B = −s_Δω − 0.45/0.7 holds once Δω recovers above −0.45 Hz.
    let guard = affine_guard(-0.45 / 0.7, [-1.0, 0.0, 0.0, 0.0]);
    let start = t.events[0].time;
    let te = earliest_deactivation(&t, &guard).unwrap();
    assert!(te > start);
    let dw = t.relevant_interp(te)[0];
    assert!((dw + 0.45).abs() < 1e-4, "Δω = {dw} at {te}");
    let never = affine_guard(1.0, [0.0; 4]);
    assert!(matches!(
        earliest_deactivation(&t, &never),
        Err(HybridError::NeverNegative(_))
    ));
}

#[test]
fn no_support_means_no_areas() {
    let aut = automaton(ModelOrder::Full);
    let t = simulate(&aut, &EventScenario::with_horizon(200.0), &Policy::fixed(1)).unwrap();
    let r = rotor_recovery_check(&t).unwrap();
    assert_eq!((r.support_area, r.recovery_area), (0.0, 0.0));
    assert!(r.recovered);
}

#[test]
fn support_episode_returns_the_rotor_to_its_speed() {
    let aut = automaton(ModelOrder::Full);
    let p = Policy::deadband(0.3, 2).with_switch(2.2, 1);
    let t = simulate(&aut, &EventScenario::with_horizon(200.0), &p).unwrap();
    let r = rotor_recovery_check(&t).unwrap();
    assert!(r.support_area > 0.0 && r.recovery_area < 0.0, "{r:?}");
    assert!(r.recovered, "{r:?}");
    let short = simulate(&aut, &EventScenario::with_horizon(10.0), &p).unwrap();
    assert!(matches!(
        rotor_recovery_check(&short),
        Err(HybridError::HorizonTooShort(_))
    ));
}

#[test]
fn reduced_model_tracks_full_model_frequency() {
    let full = automaton(ModelOrder::Full);
    let red = automaton(ModelOrder::Reduced);
    let sc = EventScenario::with_horizon(30.0);
    let mut nadirs = Vec::new();
    for id in 2..=5 {
        let a = simulate(&full, &sc, &Policy::fixed(id)).unwrap();
        let b = simulate(&red, &sc, &Policy::fixed(id)).unwrap();
        let gap = (0..a.len()).map(|k| (a.dw(k) - b.dw(k)).abs()).fold(0.0, f64::max);
        // The largest gap sits in the first half second after the load step.
        assert!(gap <= 0.035, "mode {id}: {gap}");
        nadirs.push((a.nadir().1, b.nadir().1));
    }
    for w in nadirs.windows(2) {
        assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1, "{nadirs:?}");
    }
}

#[test]
fn trajectory_exports() {
    let aut = automaton(ModelOrder::Full);
    let t = simulate(&aut, &EventScenario::with_horizon(3.0), &Policy::deadband(0.3, 3)).unwrap();
    let mut buf = Vec::new();
    write_csv(&t, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..7], &["t", "mode", "dw", "dPm", "dPv", "dwr", "p_gen"]);
    assert_eq!(header.len(), 7 + 6 + 2);
    assert_eq!(lines.count(), t.len());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.json");
    write_events_json(&t.events, &path).unwrap();
    assert_eq!(read_events_json(&path).unwrap(), t.events);
}
