use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::ProbeGrid;
use super::scenario::SafetyScenario;
use super::BarrierError;
use crate::polyalg::{ball_poly, Polynomial, Scaling};
use crate::sdp::{SdpSolution, SolverOptions};
use crate::sos::{
    build_barrier_program, solve_program, BarrierProgramSpec, DecisionKind, DecisionTerm, ObjectiveTerm, SosConstraint,
    SosError, SosOutcome, SosProgram, SosSolution, TermOp, Unknown, RESIDUAL_TOL,
};

/// Direction of the multiplier in the containment constraint of step (b).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContainmentSign {
    /// `−B⁽ᵏ⁾ + λ_I B⁽ᵏ⁻¹⁾ ∈ Σ²`, i.e. `{B⁽ᵏ⁻¹⁾ ≤ 0} ⊆ {B⁽ᵏ⁾ ≤ 0}` on the box.
    #[default]
    Corrected,
    /// `−B⁽ᵏ⁾ − λ_I B⁽ᵏ⁻¹⁾ ∈ Σ²` as printed.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmSettings {
    /// Constant multiplier `λ_B = r` used for initialization.
    pub r: f64,
    /// Seed-ball radius in scaled coordinates.
    pub rho: f64,
    pub seeds: usize,
    pub probe_points: usize,
    pub max_iterations: usize,
    /// Relative coverage gain below which an iteration counts as a plateau.
    pub plateau_tol: f64,
    pub plateau_patience: usize,
    pub monotone_slack: f64,
    pub containment: ContainmentSign,
    pub solver_tol: f64,
    /// Largest accepted SDP primal or dual residual.
    pub kkt_tol: f64,
    /// Lower bound `B ≥ −floor` on the box that keeps the expansion
    /// objective bounded.
    pub floor: f64,
    /// Safety margin (Hz) required of seed trajectories.
    pub seed_margin: f64,
    /// Puts the origin, the pre-disturbance operating point, first among
    /// the seeds whenever its trajectories stay safe.
    pub origin_seed: bool,
}

impl Default for AlgorithmSettings {
    fn default() -> Self {
        AlgorithmSettings {
            r: 0.1,
            rho: 0.02,
            seeds: 8,
            probe_points: super::grid::DEFAULT_PROBE_POINTS,
            max_iterations: 20,
            plateau_tol: 0.01,
            plateau_patience: 2,
            monotone_slack: 1e-3,
            containment: ContainmentSign::Corrected,
            solver_tol: 1e-8,
            kkt_tol: KKT_TOL,
            floor: 1.0,
            seed_margin: 0.02,
            origin_seed: true,
        }
    }
}

impl AlgorithmSettings {
    fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver_tol,
            trace: log::log_enabled!(log::Level::Debug),
            ..SolverOptions::default()
        }
    }
}

/// Numerical quality of one certificate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateStats {
    pub gram_residual: f64,
    pub sdp_primal: f64,
    pub sdp_dual: f64,
    pub sdp_gap: f64,
}

impl CertificateStats {
    fn of(sol: &SosSolution, sdp: &SdpSolution) -> Self {
        CertificateStats {
            gram_residual: sol.max_residual(),
            sdp_primal: sdp.residuals.primal,
            sdp_dual: sdp.residuals.dual,
            sdp_gap: sdp.residuals.gap,
        }
    }

    pub fn acceptable(&self, kkt_tol: f64) -> bool {
        self.gram_residual < RESIDUAL_TOL && self.sdp_primal < kkt_tol && self.sdp_dual < kkt_tol
    }
}

pub const KKT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BarrierCertificate {
    /// `B` in scaled state coordinates.
    pub barrier: Polynomial,
    pub lambda_b: Polynomial,
    pub degree: u32,
    pub stats: CertificateStats,
}

#[derive(Clone, Debug)]
pub enum Verification {
    Certified(BarrierCertificate),
    /// No certificate at any degree; this does not imply the set is unsafe.
    Unverified {
        reason: String,
    },
}

fn spec_for(
    sc: &SafetyScenario,
    degree: u32,
    barrier: Unknown,
    lambda_b: Unknown,
    g_i: Vec<Polynomial>,
) -> BarrierProgramSpec {
    BarrierProgramSpec {
        states: sc.state_names.clone(),
        disturbances: sc.disturbance_vars(),
        f: sc.scaled_field(),
        g_x: sc.scaled_domain(),
        g_i,
        g_u: vec![sc.scaled_unsafe()],
        g_d: sc.disturbance_set(),
        epsilon: sc.epsilon,
        epsilon_lie: sc.epsilon_lie,
        barrier_degree: degree,
        lambda_i_degree: None,
        lambda_u_degree: None,
        lambda_xd_degree: domain_multiplier_degree(sc, degree),
        lambda_b_degree: sc.lambda_b_degree,
        localize_unsafe: true,
        barrier,
        lambda_b,
    }
}

/// Degree of the `g_X` and `g_D` multipliers: high enough that their
/// leading forms can dominate those of a degree-`degree` barrier.
fn domain_multiplier_degree(sc: &SafetyScenario, degree: u32) -> u32 {
    sc.multiplier_degree.max(degree.saturating_sub(2))
}

enum Solved {
    Ok(SosSolution, CertificateStats),
    Infeasible(String),
    Failed(String),
}

fn run(prog: &SosProgram, settings: &AlgorithmSettings) -> Result<Solved, BarrierError> {
    match solve_program(prog, &settings.solver()) {
        Ok(SosOutcome::Solved { solution, sdp }) => {
            debug!(
                "sdp {:?} after {} iterations: {} {:?}",
                sdp.status, sdp.iterations, sdp.message, sdp.residuals
            );
            let stats = CertificateStats::of(&solution, &sdp);
            if stats.acceptable(settings.kkt_tol) {
                Ok(Solved::Ok(solution, stats))
            } else {
                Ok(Solved::Failed(format!(
                    "certificate rejected: Gram residual {:.2e}, SDP residuals {:.2e}/{:.2e}",
                    stats.gram_residual, stats.sdp_primal, stats.sdp_dual
                )))
            }
        }
        Ok(SosOutcome::Infeasible { message }) => Ok(Solved::Infeasible(message)),
        Err(SosError::NumericalFailure(m)) => Ok(Solved::Failed(m)),
        Err(e) => Err(e.into()),
    }
}

fn even_degrees(sc: &SafetyScenario) -> impl Iterator<Item = u32> {
    (sc.degree_init..=sc.degree_max).step_by(2)
}

/// One-shot certificate for the initial sets `g_i ≥ 0` (scaled state
/// coordinates) with `λ_B = r`, trying each degree of the schedule.
pub fn verify_safety(
    sc: &SafetyScenario,
    g_i: &[Polynomial],
    settings: &AlgorithmSettings,
) -> Result<Verification, BarrierError> {
    certify(sc, g_i, settings, None)
}

fn certify(
    sc: &SafetyScenario,
    g_i: &[Polynomial],
    settings: &AlgorithmSettings,
    floor: Option<f64>,
) -> Result<Verification, BarrierError> {
    if !(settings.r > 0.0) {
        return Err(BarrierError::Precondition("r must be positive".into()));
    }
    check_inside_domain(sc, g_i)?;
    let vars = sc.program_vars();
    let lambda_b = Polynomial::constant(&vars, settings.r);
    let mut reason = String::from("empty degree schedule");
    for degree in even_degrees(sc) {
        let spec = spec_for(
            sc,
            degree,
            Unknown::Decision,
            Unknown::Fixed(lambda_b.clone()),
            g_i.to_vec(),
        );
        let (mut prog, h) = build_barrier_program(&spec)?;
        let b = h.barrier.expect("barrier decision");
        if let Some(floor) = floor {
            add_floor(&mut prog, sc, b, degree, floor);
        }
        match run(&prog, settings)? {
            Solved::Ok(sol, stats) => {
                return Ok(Verification::Certified(BarrierCertificate {
                    barrier: sol.decisions[b].clone(),
                    lambda_b,
                    degree,
                    stats,
                }))
            }
            Solved::Infeasible(m) | Solved::Failed(m) => {
                debug!("{}: degree {degree} unverified: {m}", sc.name);
                reason = format!("degree {degree}: {m}");
            }
        }
    }
    Ok(Verification::Unverified { reason })
}

/// `B + floor − Σ μ_j g_Xj ∈ Σ²`, i.e. `B ≥ −floor` on the box.
fn add_floor(prog: &mut SosProgram, sc: &SafetyScenario, b: usize, degree: u32, floor: f64) {
    let xs = &sc.state_names;
    let md = domain_multiplier_degree(sc, degree);
    let mut terms = vec![DecisionTerm {
        decision: b,
        scale: 1.0,
        op: TermOp::Identity,
    }];
    for (j, g) in sc.scaled_domain().iter().enumerate() {
        let mu = prog.add_decision(&format!("lambda_NX{j}"), xs, md, DecisionKind::Sos);
        terms.push(DecisionTerm {
            decision: mu,
            scale: -1.0,
            op: TermOp::Multiply(g.clone()),
        });
    }
    prog.add_constraint(SosConstraint {
        name: "floor".into(),
        vars: xs.clone(),
        fixed: Polynomial::constant(xs, floor),
        terms,
        half_degree: None,
    });
}

/// Sampled check that `{g ≥ 0}` lies in the unit box.
fn check_inside_domain(sc: &SafetyScenario, g_i: &[Polynomial]) -> Result<(), BarrierError> {
    let n = sc.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for g in g_i {
        if g.vars() != sc.state_names.as_slice() {
            return Err(BarrierError::Precondition(
                "initial sets must be over the scenario states".into(),
            ));
        }
        for _ in 0..4000 {
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
            if g.eval(&y) >= 0.0 && y.iter().any(|v| v.abs() > 1.0) {
                return Err(BarrierError::Precondition("initial set leaves the domain box".into()));
            }
        }
    }
    Ok(())
}

/// Grid points whose trajectories keep `seed_margin` from the unsafe set
/// under constant `d = d_max` and `d = 0`, chosen by farthest-point
/// selection starting nearest to the nominal equilibrium, optionally led by
/// the origin. Returned in physical coordinates.
pub fn find_safe_seeds(
    sc: &SafetyScenario,
    n: usize,
    settings: &AlgorithmSettings,
) -> Result<Vec<Vec<f64>>, BarrierError> {
    if n == 0 {
        return Err(BarrierError::Precondition("at least one seed is required".into()));
    }
    let scaling = sc.scaling();
    let prop = sc.propagator();
    let dmax = sc.disturbance.max();
    let safe = |x: &[f64]| -> bool {
        [dmax, 0.0]
            .iter()
            .all(|&d| prop.min_margin(x, |_| d, sc.sim.horizon, &sc.unsafe_set) > settings.seed_margin)
    };
    let inner = 1.0 - settings.rho;
    let grid = ProbeGrid::halton(sc.dim(), settings.probe_points);
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    let nominal = match sc.disturbance {
        super::Disturbance::Point { value } => value,
        super::Disturbance::Interval { .. } => 0.0,
    };
    if let Some(eq) = sc.equilibrium(nominal) {
        let s = scaling.to_scaled(&eq);
        if s.iter().all(|v| v.abs() <= inner) {
            candidates.push(s);
        }
    }
    let eq_scaled = candidates.first().cloned();
    candidates.extend(
        grid.points
            .iter()
            .filter(|p| p.iter().all(|v| v.abs() <= inner))
            .cloned(),
    );
    use rayon::prelude::*;
    let safe_pts: Vec<Vec<f64>> = candidates
        .into_par_iter()
        .filter(|s| safe(&scaling.to_physical(s)))
        .collect();
    if safe_pts.is_empty() {
        return Err(BarrierError::NoneFound(format!(
            "no safe point among the probe grid of {}",
            sc.name
        )));
    }
    let anchor = eq_scaled.unwrap_or_else(|| vec![0.0; sc.dim()]);
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let first = safe_pts
        .iter()
        .min_by(|a, b| dist(a, &anchor).total_cmp(&dist(b, &anchor)))
        .expect("non-empty")
        .clone();
    let mut chosen = vec![first];
    let mut mind: Vec<f64> = safe_pts.iter().map(|p| dist(p, &chosen[0])).collect();
    while chosen.len() < n {
        let (k, &best) = mind
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        if best <= 4.0 * settings.rho * settings.rho {
            break;
        }
        chosen.push(safe_pts[k].clone());
        for (m, p) in mind.iter_mut().zip(&safe_pts) {
            *m = m.min(dist(p, &safe_pts[k]));
        }
    }
    let origin = vec![0.0; sc.dim()];
    let origin_scaled = scaling.to_scaled(&origin);
    let origin_safe = || {
        [dmax, 0.0]
            .iter()
            .all(|&d| prop.min_margin(&origin, |_| d, sc.sim.horizon, &sc.unsafe_set) > 0.0)
    };
    if settings.origin_seed
        && origin_scaled.iter().all(|v| v.abs() <= inner)
        && !chosen
            .iter()
            .any(|c| dist(c, &origin_scaled) <= 4.0 * settings.rho * settings.rho)
        && origin_safe()
    {
        chosen.insert(0, origin_scaled);
        chosen.truncate(n);
    }
    Ok(chosen.iter().map(|s| scaling.to_physical(s)).collect())
}

/// The initialization program at `degree` for balls around `seeds`, as
/// solved by [`initialize`].
pub fn initialization_program(
    sc: &SafetyScenario,
    seeds: &[Vec<f64>],
    settings: &AlgorithmSettings,
    degree: u32,
) -> Result<SosProgram, BarrierError> {
    if seeds.is_empty() {
        return Err(BarrierError::Precondition("no seeds".into()));
    }
    let scaling = sc.scaling();
    let balls: Vec<Polynomial> = seeds
        .iter()
        .map(|x| ball_poly(&sc.state_names, &scaling.to_scaled(x), settings.rho))
        .collect();
    check_inside_domain(sc, &balls)?;
    let lambda_b = Polynomial::constant(&sc.program_vars(), settings.r);
    let spec = spec_for(sc, degree, Unknown::Decision, Unknown::Fixed(lambda_b), balls);
    let (mut prog, h) = build_barrier_program(&spec)?;
    add_floor(
        &mut prog,
        sc,
        h.barrier.expect("barrier decision"),
        degree,
        settings.floor,
    );
    Ok(prog)
}

/// Initial barrier `B⁰` from balls of radius `ρ` (scaled) around all seeds.
pub fn initialize(
    sc: &SafetyScenario,
    seeds: &[Vec<f64>],
    settings: &AlgorithmSettings,
) -> Result<BarrierCertificate, BarrierError> {
    if !(settings.r > 0.0) {
        return Err(BarrierError::Precondition("r must be positive".into()));
    }
    if seeds.is_empty() {
        return Err(BarrierError::Precondition("no seeds".into()));
    }
    let scaling = sc.scaling();
    let balls: Vec<Polynomial> = seeds
        .iter()
        .map(|x| ball_poly(&sc.state_names, &scaling.to_scaled(x), settings.rho))
        .collect();
    match certify(sc, &balls, settings, Some(settings.floor))? {
        Verification::Certified(c) => Ok(c),
        Verification::Unverified { reason } => Err(BarrierError::InfeasibleInit(format!(
            "{reason}; try a smaller ρ or a higher degree"
        ))),
    }
}

/// One iteration record of the expansion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub degree: u32,
    pub coverage: f64,
    pub accepted: bool,
    pub note: String,
}

/// Region-of-safety estimate `{x : B(x) ≤ 0}` inside the domain box.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RosEstimate {
    pub scenario_name: String,
    pub mode_id: u8,
    pub scenario_hash: String,
    pub disturbance: super::Disturbance,
    pub state_names: Vec<String>,
    pub scaling: Scaling,
    /// `B` in scaled coordinates.
    pub barrier: Polynomial,
    pub lambda_b: Polynomial,
    pub degree: u32,
    pub iterations: usize,
    /// Probe-grid coverage of every accepted iterate, starting with `B⁰`.
    pub growth: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub stats: CertificateStats,
    pub containment: ContainmentSign,
}

impl RosEstimate {
    pub fn eval_scaled(&self, s: &[f64]) -> f64 {
        self.barrier.eval(s)
    }

    pub fn eval_physical(&self, x: &[f64]) -> f64 {
        self.barrier.eval(&self.scaling.to_scaled(x))
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        self.scaling.to_scaled(x).iter().all(|v| v.abs() <= 1.0)
    }

    /// Membership of a physical state in the certified region.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.in_domain(x) && self.eval_physical(x) <= 0.0
    }

    pub fn coverage(&self) -> f64 {
        self.growth.last().copied().unwrap_or(0.0)
    }

    pub fn to_json(&self) -> Result<String, BarrierError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, BarrierError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), BarrierError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, BarrierError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn even_down(d: i64) -> u32 {
    let d = d.max(0) as u32;
    d - d % 2
}

/// Step (a): multiplier `λ_B` for a fixed barrier.
fn fit_multiplier(
    sc: &SafetyScenario,
    b: &Polynomial,
    settings: &AlgorithmSettings,
) -> Result<Option<Polynomial>, BarrierError> {
    let spec = spec_for(sc, b.degree(), Unknown::Fixed(b.clone()), Unknown::Decision, vec![]);
    let (prog, h) = build_barrier_program(&spec)?;
    match run(&prog, settings)? {
        Solved::Ok(sol, _) => Ok(Some(sol.decisions[h.lambda_b.expect("λ_B decision")].clone())),
        Solved::Infeasible(m) | Solved::Failed(m) => {
            debug!("{}: multiplier step failed: {m}", sc.name);
            Ok(None)
        }
    }
}

struct ExpansionStep<'a> {
    sc: &'a SafetyScenario,
    settings: &'a AlgorithmSettings,
    weights_cache: Vec<(u32, Polynomial)>,
    grid: &'a ProbeGrid,
    floor: f64,
}

impl ExpansionStep<'_> {
    fn weights(&mut self, degree: u32) -> Polynomial {
        if let Some((_, w)) = self.weights_cache.iter().find(|(d, _)| *d == degree) {
            return w.clone();
        }
        let w = self.grid.moment_weights(&self.sc.state_names, degree);
        self.weights_cache.push((degree, w.clone()));
        w
    }

    /// Step (b): new barrier of `degree` containing `{prev ≤ 0}`.
    fn solve(&mut self, prev: &Polynomial, lambda_b: &Polynomial, degree: u32) -> Result<Solved, BarrierError> {
        let sc = self.sc;
        let spec = spec_for(sc, degree, Unknown::Decision, Unknown::Fixed(lambda_b.clone()), vec![]);
        let (mut prog, h) = build_barrier_program(&spec)?;
        let b = h.barrier.expect("barrier decision");
        let xs = &sc.state_names;
        let g_x = sc.scaled_domain();
        let md = domain_multiplier_degree(sc, degree);

        let lam = prog.add_decision(
            "lambda_C",
            xs,
            even_down(degree as i64 - prev.degree() as i64),
            DecisionKind::Sos,
        );
        let sign = match self.settings.containment {
            ContainmentSign::Corrected => 1.0,
            ContainmentSign::Literal => -1.0,
        };
        let mut terms = vec![
            DecisionTerm {
                decision: b,
                scale: -1.0,
                op: TermOp::Identity,
            },
            DecisionTerm {
                decision: lam,
                scale: sign,
                op: TermOp::Multiply(prev.clone()),
            },
        ];
        for (j, g) in g_x.iter().enumerate() {
            let mu = prog.add_decision(&format!("lambda_CX{j}"), xs, md, DecisionKind::Sos);
            terms.push(DecisionTerm {
                decision: mu,
                scale: -1.0,
                op: TermOp::Multiply(g.clone()),
            });
        }
        prog.add_constraint(SosConstraint {
            name: "containment".into(),
            vars: xs.clone(),
            fixed: Polynomial::zero(xs),
            terms,
            half_degree: None,
        });

        add_floor(&mut prog, sc, b, degree, self.floor);
        prog.objective.push(ObjectiveTerm {
            decision: b,
            weights: self.weights(degree),
        });
        let out = run(&prog, self.settings)?;
        Ok(match out {
            Solved::Ok(sol, stats) => {
                let mut sol = sol;
                let nb = std::mem::replace(&mut sol.decisions[b], Polynomial::zero(xs));
                sol.decisions = vec![nb];
                Solved::Ok(sol, stats)
            }
            other => other,
        })
    }
}

/// Alternating enlargement of `{B ≤ 0}` starting from `b0`.
pub fn expand(
    sc: &SafetyScenario,
    b0: &BarrierCertificate,
    settings: &AlgorithmSettings,
) -> Result<RosEstimate, BarrierError> {
    let grid = ProbeGrid::halton(sc.dim(), settings.probe_points);
    let floor = settings.floor;
    let mut step = ExpansionStep {
        sc,
        settings,
        weights_cache: Vec::new(),
        grid: &grid,
        floor,
    };

    let mut current = b0.barrier.clone();
    let mut lambda_b = b0.lambda_b.clone();
    let mut stats = b0.stats;
    let mut degree = b0.degree.max(sc.degree_init);
    let c0 = grid.coverage(&current);
    let mut growth = vec![c0];
    let mut history = vec![IterationRecord {
        iteration: 0,
        degree: b0.degree,
        coverage: c0,
        accepted: true,
        note: "initial barrier".into(),
    }];
    let mut plateau = 0;
    let mut iterations = 0;
    info!("{}: B0 coverage {:.4} at degree {}", sc.name, c0, b0.degree);

    for it in 1..=settings.max_iterations {
        iterations = it;
        if let Some(l) = fit_multiplier(sc, &current, settings)? {
            lambda_b = l;
        }
        let outcome = step.solve(&current, &lambda_b, degree)?;
        let prev_cov = *growth.last().expect("non-empty");
        let (escalate, note) = match outcome {
            Solved::Ok(sol, st) => {
                let cand = sol.decisions.into_iter().next().expect("barrier");
                let cov = grid.coverage(&cand);
                if cov + settings.monotone_slack >= prev_cov {
                    let gain = (cov - prev_cov) / prev_cov.max(1e-9);
                    current = cand;
                    stats = st;
                    growth.push(cov);
                    history.push(IterationRecord {
                        iteration: it,
                        degree,
                        coverage: cov,
                        accepted: true,
                        note: format!("coverage {prev_cov:.4} -> {cov:.4}"),
                    });
                    info!("{}: iteration {it} degree {degree} coverage {cov:.4}", sc.name);
                    plateau = if gain < settings.plateau_tol { plateau + 1 } else { 0 };
                    (plateau >= settings.plateau_patience, None)
                } else {
                    (true, Some(format!("coverage dropped to {cov:.4}")))
                }
            }
            Solved::Infeasible(m) => (true, Some(format!("infeasible: {m}"))),
            Solved::Failed(m) => (true, Some(format!("solver failure: {m}"))),
        };
        if let Some(note) = note {
            history.push(IterationRecord {
                iteration: it,
                degree,
                coverage: prev_cov,
                accepted: false,
                note,
            });
        }
        if escalate {
            if degree + 2 > sc.degree_max {
                break;
            }
            degree += 2;
            plateau = 0;
            info!("{}: escalating to degree {degree}", sc.name);
        }
    }
    Ok(RosEstimate {
        scenario_name: sc.name.clone(),
        mode_id: sc.mode_id,
        scenario_hash: sc.hash(),
        disturbance: sc.disturbance,
        state_names: sc.state_names.clone(),
        scaling: sc.scaling(),
        degree: current.degree(),
        barrier: current,
        lambda_b,
        iterations,
        growth,
        history,
        stats,
        containment: settings.containment,
    })
}

/// Seeds, initialization and expansion in one call.
pub fn estimate_ros(sc: &SafetyScenario, settings: &AlgorithmSettings) -> Result<RosEstimate, BarrierError> {
    let seeds = find_safe_seeds(sc, settings.seeds, settings)?;
    // Seeds come ordered from the anchor outward; drop the far ones when the
    // full set cannot be certified together.
    let mut count = seeds.len();
    let b0 = loop {
        match initialize(sc, &seeds[..count], settings) {
            Ok(b0) => break b0,
            Err(BarrierError::InfeasibleInit(reason)) if count > 1 => {
                log::info!("{}: {count} seeds not certifiable ({reason})", sc.name);
                count /= 2;
            }
            Err(e) => return Err(e),
        }
    };
    expand(sc, &b0, settings)
}
