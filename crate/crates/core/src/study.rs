//! The complete case study: model reduction, regions of safety for the
//! support modes, guard-based switching synthesis and its simulation checks,
//! summarized as one pass/fail line per acceptance criterion.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barrier::{
    estimate_ros, sample_validate, soundness_check, AlgorithmSettings, BarrierError, Disturbance, RosEstimate,
    SafetyScenario, ValidationReport, DEFAULT_HI, DEFAULT_LO,
};
use crate::hybrid::{
    critical_deadband, deactivation_check, deactivation_window, recovery_sequence_check, rotor_recovery_check,
    simulate, CriticalDeadband, DeactivationCheck, DeactivationWindow, EventScenario, HybridAutomaton, HybridError,
    Policy, RecoveryReport, SequenceCheck,
};
use crate::plant::{
    cross_check_inertia, default_modes, emulated_inertia, Calibration, ModeGains, ModelOrder, OperatingCondition,
    PlantAnalysis, PlantError, PlantParameters, TableRow,
};

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
}

/// Plant data and gain table. Every field falls back to its default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    pub parameters: PlantParameters,
    pub operating_condition: OperatingCondition,
    pub calibration: Calibration,
    pub modes: Option<Vec<ModeGains>>,
}

impl PlantConfig {
    pub fn analysis(&self) -> Result<PlantAnalysis, PlantError> {
        PlantAnalysis::run_checked(&self.parameters, &self.operating_condition, &self.calibration)
    }

    pub fn modes(&self) -> Vec<ModeGains> {
        self.modes.clone().unwrap_or_else(default_modes)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySettings {
    /// Maximum barrier degree.
    pub degree: u32,
    pub seed: u64,
    /// Worst-case load step (pu).
    pub disturbance: f64,
    pub validation_trials: usize,
    pub soundness_samples: usize,
    /// Unsafe-set margin of the certificates.
    pub epsilon: f64,
    /// Domain box of the relevant states.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub algorithm: AlgorithmSettings,
    /// Directory for cached regions of safety, keyed by scenario hash.
    pub cache: Option<PathBuf>,
}

impl Default for StudySettings {
    fn default() -> Self {
        StudySettings {
            degree: 6,
            seed: 1,
            disturbance: 0.15,
            validation_trials: 1000,
            soundness_samples: 10_000,
            epsilon: 1e-3,
            lo: DEFAULT_LO.to_vec(),
            hi: DEFAULT_HI.to_vec(),
            algorithm: AlgorithmSettings::default(),
            cache: None,
        }
    }
}

impl StudySettings {
    pub fn quick() -> Self {
        StudySettings {
            degree: 4,
            ..Self::default()
        }
    }

    pub fn full() -> Self {
        StudySettings {
            degree: 8,
            ..Self::default()
        }
    }
}

/// Deadbands and instants reported for the 150 MW event.
pub const REFERENCE_DEADBAND: [(u8, f64, f64); 2] = [(2, 0.30, 1.29), (3, 0.42, 1.44)];
pub const DEADBAND_TOL: f64 = 0.05;
pub const SWITCH_TIME_TOL: f64 = 0.2;
pub const RETURN_TIME: f64 = 2.0;
pub const RETURN_TOL: f64 = 0.5;
pub const DIRECT_DEADLINE: (f64, f64) = (15.2, 2.0);
pub const VIA_DEADLINE: (f64, f64) = (30.2, 3.0);
pub const SEQUENCE_TIME: f64 = 22.0;
pub const FIDELITY_TOL: f64 = 0.03;
/// Support mode, detour mode and deadband of the recovery study.
pub const RECOVERY_SUPPORT: (u8, u8, f64) = (5, 3, 0.30);

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    /// Whether `passed` also covers the numeric tolerances or only the
    /// simulation-safety assertions.
    pub advisory_passed: Option<bool>,
    pub detail: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let mut s = format!(
            "[{}] {}. {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail
        );
        if let Some(a) = self.advisory_passed {
            s.push_str(if a {
                " (tolerances met)"
            } else {
                " (advisory tolerances missed)"
            });
        }
        s
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReductionSummary {
    pub a_rd: f64,
    pub c_rd: f64,
    pub table: Vec<TableRow>,
}

/// Wall-clock timings, the only run-dependent part of a report.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunMetadata {
    pub reduction_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuantificationSummary {
    /// `(mode, H_e(0), predicted RoCoF, measured RoCoF, relative error)`.
    pub rows: Vec<(u8, f64, f64, f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub nadir_time: f64,
    pub nadir: f64,
    pub final_dw: f64,
    pub b_d1_origin: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RosSummary {
    pub mode: u8,
    pub degree: u32,
    pub coverage: f64,
    pub growth_monotone: bool,
    pub gram_residual: f64,
    pub sdp_primal: f64,
    pub sdp_dual: f64,
    pub soundness_passed: bool,
    pub validation: ValidationReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FidelitySummary {
    /// `(mode, sup |Δω_full − Δω_reduced|, full nadir, reduced nadir)`.
    pub rows: Vec<(u8, f64, f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Outcome<T> {
    pub value: Option<T>,
    pub error: Option<String>,
}

impl<T> Outcome<T> {
    fn from<E: std::fmt::Display>(r: Result<T, E>) -> Self {
        match r {
            Ok(v) => Outcome {
                value: Some(v),
                error: None,
            },
            Err(e) => Outcome {
                value: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyReport {
    pub degree: u32,
    pub seed: u64,
    pub reduction: ReductionSummary,
    pub quantification: QuantificationSummary,
    pub baseline: BaselineSummary,
    pub ros: Vec<Outcome<RosSummary>>,
    pub deadbands: BTreeMap<u8, Outcome<CriticalDeadband>>,
    pub deactivation: BTreeMap<u8, Outcome<DeactivationCheck>>,
    pub window: Outcome<DeactivationWindow>,
    pub sequence: Outcome<SequenceCheck>,
    pub recovery: Outcome<RecoveryReport>,
    pub fidelity: FidelitySummary,
    pub criteria: Vec<CriterionResult>,
    pub metadata: RunMetadata,
}

impl StudyReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        self.criteria.iter().map(CriterionResult::line).collect()
    }
}

/// Safety scenario of one mode under the constant worst-case load step.
pub fn mode_scenario(
    analysis: &PlantAnalysis,
    gains: &ModeGains,
    settings: &StudySettings,
) -> Result<SafetyScenario, StudyError> {
    let cl = analysis.closed_loop(gains, ModelOrder::Reduced)?;
    let d = Disturbance::Point {
        value: settings.disturbance,
    };
    let mut sc = SafetyScenario::for_mode_with_box(&cl, d, &settings.lo, &settings.hi)?;
    sc.epsilon = settings.epsilon;
    sc.degree_max = settings.degree;
    sc.degree_init = sc.degree_init.min(settings.degree);
    sc.validate()?;
    Ok(sc)
}

/// Region of safety of one mode under the constant worst-case load step,
/// read from the cache when a result for the same scenario exists.
pub fn mode_ros(
    analysis: &PlantAnalysis,
    gains: &ModeGains,
    settings: &StudySettings,
) -> Result<(SafetyScenario, RosEstimate), StudyError> {
    let sc = mode_scenario(analysis, gains, settings)?;
    let cached = settings
        .cache
        .as_ref()
        .map(|dir| dir.join(format!("ros_{}_{}.json", sc.name, &sc.hash()[..16])));
    if let Some(path) = cached.as_ref().filter(|p| p.exists()) {
        let ros = RosEstimate::load(path)?;
        if ros.scenario_hash == sc.hash() {
            return Ok((sc, ros));
        }
    }
    let ros = estimate_ros(&sc, &settings.algorithm)?;
    if let Some(path) = cached {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(BarrierError::from)?;
        }
        ros.save(&path)?;
    }
    Ok((sc, ros))
}

fn summarize_ros(sc: &SafetyScenario, ros: &RosEstimate, settings: &StudySettings) -> Result<RosSummary, StudyError> {
    let slack = settings.algorithm.monotone_slack;
    let soundness = soundness_check(sc, &ros.barrier, &[], settings.soundness_samples, settings.seed)?;
    let validation = sample_validate(ros, sc, settings.validation_trials, settings.seed)?;
    Ok(RosSummary {
        mode: ros.mode_id,
        degree: ros.degree,
        coverage: ros.coverage(),
        growth_monotone: ros.growth.windows(2).all(|w| w[1] >= w[0] - slack),
        gram_residual: ros.stats.gram_residual,
        sdp_primal: ros.stats.sdp_primal,
        sdp_dual: ros.stats.sdp_dual,
        soundness_passed: soundness.passes(sc.epsilon),
        validation,
    })
}

fn fidelity(analysis: &PlantAnalysis, modes: &[ModeGains], sc: &EventScenario) -> Result<FidelitySummary, StudyError> {
    let full = HybridAutomaton::new(analysis, modes, ModelOrder::Full)?;
    let red = HybridAutomaton::new(analysis, modes, ModelOrder::Reduced)?;
    let mut rows = Vec::new();
    for m in modes.iter().filter(|m| m.id != 1) {
        let a = simulate(&full, sc, &Policy::fixed(m.id))?;
        let b = simulate(&red, sc, &Policy::fixed(m.id))?;
        let gap = (0..a.len()).map(|k| (a.dw(k) - b.dw(k)).abs()).fold(0.0, f64::max);
        rows.push((m.id, gap, a.nadir().1, b.nadir().1));
    }
    Ok(FidelitySummary { rows })
}

fn same_order(xs: &[f64], ys: &[f64]) -> bool {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        idx
    };
    rank(xs) == rank(ys)
}

/// Runs the whole study on the given plant.
pub fn run_study(config: &PlantConfig, settings: &StudySettings) -> Result<StudyReport, StudyError> {
    let clock = Instant::now();
    let analysis = config.analysis()?;
    let modes = config.modes();
    let reduction = ReductionSummary {
        a_rd: analysis.sma.unit.a_rd,
        c_rd: analysis.sma.unit.c_rd,
        table: analysis.table(&modes),
    };
    let reduction_seconds = clock.elapsed().as_secs_f64();

    let sfr = analysis.sfr;
    let mut quantification = QuantificationSummary { rows: vec![] };
    for m in modes.iter().filter(|m| m.k_ie != 0.0 && m.k_pc == 0.0) {
        let cl = analysis.closed_loop(m, ModelOrder::Reduced)?;
        let red = analysis.sma.coefficients(m.k_ie, m.k_pc);
        let h_e0 = emulated_inertia(&red, sfr.omega_s, &[0.0])?[0];
        let chk = cross_check_inertia(&cl, &red, sfr.h, sfr.omega_s, settings.disturbance)?;
        quantification
            .rows
            .push((m.id, h_e0, chk.predicted_rocof, chk.measured_rocof, chk.relative_error));
    }

    let guard_modes: Vec<ModeGains> = modes.iter().filter(|m| m.id <= 3).copied().collect();
    let ros: Vec<Result<(SafetyScenario, RosEstimate), StudyError>> = guard_modes
        .par_iter()
        .map(|m| mode_ros(&analysis, m, settings))
        .collect();
    let ros_summaries: Vec<Outcome<RosSummary>> = ros
        .par_iter()
        .map(|r| match r {
            Ok((sc, est)) => Outcome::from(summarize_ros(sc, est, settings)),
            Err(e) => Outcome::<RosSummary>::from(Err(e.to_string())),
        })
        .collect();

    let mut aut = HybridAutomaton::new(&analysis, &modes, ModelOrder::Full)?;
    for r in ros.iter().flatten() {
        aut.set_guard(r.1.mode_id, r.1.clone())?;
    }
    let event = EventScenario {
        steps: vec![(1.0, settings.disturbance)],
        ..EventScenario::default()
    };
    let base = simulate(&aut, &event, &Policy::fixed(1))?;
    let (nadir_time, nadir) = base.nadir();
    let baseline = BaselineSummary {
        nadir_time,
        nadir,
        final_dw: base.dw(base.len() - 1),
        b_d1_origin: aut.guards.get(&1).map(|g| g.eval_physical(&[0.0; 4])),
    };

    let mut deadbands = BTreeMap::new();
    let mut deactivation = BTreeMap::new();
    for &(target, reference, _) in &REFERENCE_DEADBAND {
        let cr = critical_deadband(&aut, target, &event);
        let db = match &cr {
            Ok(c) if c.safe => c.deadband,
            _ => reference,
        };
        deadbands.insert(target, Outcome::from(cr));
        deactivation.insert(target, Outcome::from(deactivation_check(&aut, &event, target, db)));
    }

    let (support, via, db) = RECOVERY_SUPPORT;
    let long = EventScenario {
        horizon: 240.0,
        ..event.clone()
    };
    let window = Outcome::from(deactivation_window(&aut, &long, support, via, db));
    let (sequence, recovery) = match recovery_sequence_check(&aut, &long, support, via, db, SEQUENCE_TIME) {
        Ok((chk, traj)) => (
            Outcome::from(Ok::<_, HybridError>(chk)),
            Outcome::from(rotor_recovery_check(&traj)),
        ),
        Err(e) => (
            Outcome::from(Err::<SequenceCheck, _>(e.to_string())),
            Outcome::from(Err::<RecoveryReport, _>(e.to_string())),
        ),
    };

    let fidelity = fidelity(&analysis, &modes, &EventScenario::with_horizon(30.0))?;

    let mut report = StudyReport {
        degree: settings.degree,
        seed: settings.seed,
        reduction,
        quantification,
        baseline,
        ros: ros_summaries,
        deadbands,
        deactivation,
        window,
        sequence,
        recovery,
        fidelity,
        criteria: vec![],
        metadata: RunMetadata {
            reduction_seconds,
            total_seconds: clock.elapsed().as_secs_f64(),
        },
    };
    report.criteria = evaluate(&report, event.limit);
    Ok(report)
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

/// Pass/fail per acceptance criterion.
pub fn evaluate(r: &StudyReport, limit: f64) -> Vec<CriterionResult> {
    let mut out = Vec::new();
    let red = &r.reduction;
    out.push(CriterionResult {
        id: 1,
        title: "reduced-model anchors".into(),
        passed: within(red.a_rd, -0.0723, 0.005)
            && within(red.c_rd, 0.0127, 0.002)
            && r.metadata.reduction_seconds < 10.0,
        advisory_passed: None,
        detail: format!(
            "A_rd = {:.4} (−0.0723 ± 0.005), C_rd = {:.4} (0.0127 ± 0.002), {:.2} s",
            red.a_rd, red.c_rd, r.metadata.reduction_seconds
        ),
    });

    let expect_b = |k: f64| -6.246 * k;
    let table_ok = red.table.iter().all(|row| {
        let b1 = row.k_ie == 0.0 || (row.b_rd1 - expect_b(row.k_ie)).abs() <= 0.01 * expect_b(row.k_ie).abs();
        let b2 = row.k_pc == 0.0 || (row.b_rd2 - expect_b(row.k_pc)).abs() <= 0.01 * expect_b(row.k_pc).abs();
        b1 && b2 && (row.d_rd1 - row.k_ie).abs() < 1e-6 && (row.d_rd2 - row.k_pc).abs() < 1e-6
    });
    out.push(CriterionResult {
        id: 2,
        title: "gain table".into(),
        passed: table_ok && !red.table.is_empty(),
        advisory_passed: None,
        detail: red
            .table
            .iter()
            .map(|t| format!("mode {} B_rd1 {:.4} B_rd2 {:.4}", t.mode, t.b_rd1, t.b_rd2))
            .collect::<Vec<_>>()
            .join(", "),
    });

    let q = &r.quantification.rows;
    let h_ok = q.iter().all(|&(id, h, ..)| match id {
        2 => within(h, 3.0, 1e-6),
        3 => within(h, 6.0, 1e-6),
        _ => true,
    });
    out.push(CriterionResult {
        id: 3,
        title: "inertia quantification".into(),
        passed: h_ok && q.len() >= 2 && q.iter().all(|row| row.4 < 0.02),
        advisory_passed: None,
        detail: q
            .iter()
            .map(|&(id, h, p, m, e)| {
                format!(
                    "mode {id} H_e(0) {h:.4} s, RoCoF {m:.4} vs {p:.4} Hz/s ({:.2}%)",
                    e * 100.0
                )
            })
            .collect::<Vec<_>>()
            .join("; "),
    });

    let b = &r.baseline;
    let b0 = b.b_d1_origin;
    out.push(CriterionResult {
        id: 4,
        title: "unsafe baseline".into(),
        passed: b.nadir < -0.5 && within(b.final_dw, -0.4286, 0.005) && b0.is_some_and(|v| v > 0.0),
        advisory_passed: None,
        detail: format!(
            "nadir {:.4} Hz at {:.3} s, settles at {:.4} Hz, B_d1(0) = {}",
            b.nadir,
            b.nadir_time,
            b.final_dw,
            b0.map_or("unavailable".into(), |v| format!("{v:.4}"))
        ),
    });

    let mut binding = true;
    let mut advisory = true;
    let mut parts = Vec::new();
    for &(target, db, t) in &REFERENCE_DEADBAND {
        match r.deadbands.get(&target).and_then(|o| o.value.as_ref()) {
            Some(c) => {
                binding &= c.switched_max_dw <= limit;
                advisory &= within(c.deadband, db, DEADBAND_TOL) && within(c.t_cr, t, SWITCH_TIME_TOL);
                parts.push(format!(
                    "mode {target}: {:.3} Hz at {:.3} s (ref {db} Hz at {t} s), switched max|Δω| {:.4}",
                    c.deadband, c.t_cr, c.switched_max_dw
                ));
            }
            None => {
                binding = false;
                advisory = false;
                let err = r
                    .deadbands
                    .get(&target)
                    .and_then(|o| o.error.clone())
                    .unwrap_or_default();
                parts.push(format!("mode {target}: no instant ({err})"));
            }
        }
    }
    out.push(CriterionResult {
        id: 5,
        title: "critical deadbands".into(),
        passed: binding,
        advisory_passed: Some(advisory),
        detail: parts.join("; "),
    });

    let mut binding = true;
    let mut advisory = true;
    let mut parts = Vec::new();
    for &(support, ..) in &REFERENCE_DEADBAND {
        match r.deactivation.get(&support).and_then(|o| o.value.as_ref()) {
            Some(d) => {
                let early = d.early_unsafe(limit);
                binding &= d.safe_after;
                advisory &= within(d.t_return, RETURN_TIME, RETURN_TOL) && early == Some(true);
                parts.push(format!(
                    "{support}→1 at {:.3} s (deadband {:.3} Hz), safe after: {}, 0.5 s earlier: {}",
                    d.t_return,
                    d.deadband,
                    d.safe_after,
                    match d.early {
                        Some((_, m)) => format!("max|Δω| {m:.4}"),
                        None => "before the trigger".into(),
                    }
                ));
            }
            None => {
                binding = false;
                advisory = false;
                let err = r
                    .deactivation
                    .get(&support)
                    .and_then(|o| o.error.clone())
                    .unwrap_or_default();
                parts.push(format!("{support}→1: {err}"));
            }
        }
    }
    out.push(CriterionResult {
        id: 6,
        title: "deactivation".into(),
        passed: binding,
        advisory_passed: Some(advisory),
        detail: parts.join("; "),
    });

    let (binding, seq_detail) = match &r.sequence.value {
        Some(s) => (
            s.direct_max_dw > limit && s.sequence_max_dw <= limit,
            format!(
                "at {} s direct max|Δω| {:.4}, sequence {:.4}",
                s.time, s.direct_max_dw, s.sequence_max_dw
            ),
        ),
        None => (
            false,
            format!("sequence: {}", r.sequence.error.clone().unwrap_or_default()),
        ),
    };
    let (advisory, win_detail) = match &r.window.value {
        Some(w) => (
            within(w.direct, DIRECT_DEADLINE.0, DIRECT_DEADLINE.1) && within(w.via, VIA_DEADLINE.0, VIA_DEADLINE.1),
            format!(
                "deadlines 5→1 {:.2} s (ref {}), 5→3 {:.2} s (ref {})",
                w.direct, DIRECT_DEADLINE.0, w.via, VIA_DEADLINE.0
            ),
        ),
        None => (false, format!("window: {}", r.window.error.clone().unwrap_or_default())),
    };
    out.push(CriterionResult {
        id: 7,
        title: "recovery windows".into(),
        passed: binding,
        advisory_passed: Some(advisory),
        detail: format!("{win_detail}; {seq_detail}"),
    });

    let mut ok = r.ros.len() >= 3;
    let mut parts = Vec::new();
    for o in &r.ros {
        match &o.value {
            Some(s) => {
                let v = &s.validation;
                let good = v.samples > 0
                    && v.total_violations() == 0
                    && s.growth_monotone
                    && s.soundness_passed
                    && s.gram_residual < 1e-7
                    && s.sdp_primal < 1e-6
                    && s.sdp_dual < 1e-6;
                ok &= good;
                let by_class = v
                    .classes
                    .iter()
                    .map(|c| {
                        format!(
                            "{:?} {}{}",
                            c.class,
                            c.violations,
                            if c.certified { "" } else { " (uncertified)" }
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("/");
                parts.push(format!(
                    "mode {}: {} samples, violations {}, monotone {}, sampled conditions {}, residuals {:.1e}/{:.1e}/{:.1e}",
                    s.mode,
                    v.samples,
                    by_class,
                    s.growth_monotone,
                    s.soundness_passed,
                    s.gram_residual,
                    s.sdp_primal,
                    s.sdp_dual
                ));
            }
            None => {
                ok = false;
                parts.push(o.error.clone().unwrap_or_default());
            }
        }
    }
    out.push(CriterionResult {
        id: 8,
        title: "ROS soundness".into(),
        passed: ok,
        advisory_passed: None,
        detail: parts.join("; "),
    });

    let f = &r.fidelity.rows;
    let gaps_ok = f.iter().all(|row| row.1 <= FIDELITY_TOL);
    let full: Vec<f64> = f.iter().map(|row| row.2).collect();
    let reduced: Vec<f64> = f.iter().map(|row| row.3).collect();
    out.push(CriterionResult {
        id: 9,
        title: "reduction fidelity".into(),
        passed: gaps_ok && same_order(&full, &reduced) && !f.is_empty(),
        advisory_passed: None,
        detail: format!(
            "{}; nadir order preserved: {}",
            f.iter()
                .map(|row| format!("mode {} {:.4} Hz", row.0, row.1))
                .collect::<Vec<_>>()
                .join(", "),
            same_order(&full, &reduced)
        ),
    });
    out
}

/// Caps the worker pool at `ROSKIT_THREADS` when set. Returns the cap.
pub fn configure_threads() -> Option<usize> {
    let n = std::env::var("ROSKIT_THREADS")
        .ok()?
        .trim()
        .parse::<usize>()
        .ok()?
        .max(1);
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok()?;
    Some(n)
}
