use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::algorithm::RosEstimate;
use super::scenario::{Disturbance, SafetyScenario};
use super::BarrierError;
use crate::polyalg::Polynomial;

/// Worst values of the three certificate conditions over random samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SoundnessReport {
    /// `max B` over samples of the initial sets.
    pub initial_max: f64,
    pub initial_samples: usize,
    /// `min B` over samples of the unsafe set inside the box.
    pub unsafe_min: f64,
    pub unsafe_samples: usize,
    /// `max Ḃ` over samples with `|B| ≤ 1e-3` in the box (and `d ∈ D`).
    pub lie_max: f64,
    pub level_samples: usize,
}

/// Tolerance of the sampled soundness conditions.
pub const SOUNDNESS_TOL: f64 = 1e-6;
pub const LEVEL_BAND: f64 = 1e-3;

impl SoundnessReport {
    pub fn passes(&self, epsilon: f64) -> bool {
        self.initial_max <= SOUNDNESS_TOL && self.unsafe_min >= epsilon - SOUNDNESS_TOL && self.lie_max <= SOUNDNESS_TOL
    }
}

fn in_box(s: &[f64]) -> bool {
    s.iter().all(|v| v.abs() <= 1.0)
}

fn gradient(p: &Polynomial, s: &[f64]) -> Vec<f64> {
    (0..s.len()).map(|i| p.derivative(i).eval(s)).collect()
}

/// Newton steps on `p(s) = target` from `s`; `None` when no point in the box
/// is reached.
fn project(p: &Polynomial, grad: &[Polynomial], mut s: Vec<f64>, target: f64) -> Option<Vec<f64>> {
    for _ in 0..50 {
        let r = p.eval(&s) - target;
        let g: Vec<f64> = grad.iter().map(|d| d.eval(&s)).collect();
        let n2: f64 = g.iter().map(|v| v * v).sum();
        if n2 < 1e-300 {
            return None;
        }
        for (x, gi) in s.iter_mut().zip(&g) {
            *x -= r * gi / n2;
        }
        if (p.eval(&s) - target).abs() < 0.1 * LEVEL_BAND {
            return in_box(&s).then_some(s);
        }
    }
    None
}

/// Samples of `{g ≥ 0} ∩ box`: Newton onto a slightly positive level, then
/// random jitter kept only while still inside.
fn superlevel_samples(g: &Polynomial, rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec<f64>> {
    let n = g.vars().len();
    let grad: Vec<Polynomial> = (0..n).map(|i| g.derivative(i)).collect();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 50 * count {
        attempts += 1;
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if g.eval(&s) >= 0.0 {
            out.push(s);
            continue;
        }
        let scale = gradient(g, &s).iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
        let Some(base) = project(g, &grad, s, 1e-3 * scale) else {
            continue;
        };
        let mut sigma = 0.5;
        for _ in 0..20 {
            let cand: Vec<f64> = base.iter().map(|v| v + sigma * rng.gen_range(-1.0..1.0)).collect();
            if in_box(&cand) && g.eval(&cand) >= 0.0 {
                out.push(cand);
                break;
            }
            sigma *= 0.5;
        }
    }
    out
}

/// Sampled check of the certificate conditions for a barrier `b` in scaled
/// coordinates with initial sets `g_i` (scaled).
pub fn soundness_check(
    sc: &SafetyScenario,
    b: &Polynomial,
    g_i: &[Polynomial],
    samples: usize,
    seed: u64,
) -> Result<SoundnessReport, BarrierError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sc.dim();
    let mut initial_max = f64::NEG_INFINITY;
    let mut initial_samples = 0;
    for g in g_i {
        for s in superlevel_samples(g, &mut rng, samples / g_i.len().max(1)) {
            initial_max = initial_max.max(b.eval(&s));
            initial_samples += 1;
        }
    }

    let g_u = sc.scaled_unsafe();
    let mut unsafe_min = f64::INFINITY;
    let mut unsafe_samples = 0;
    for s in superlevel_samples(&g_u, &mut rng, samples) {
        unsafe_min = unsafe_min.min(b.eval(&s));
        unsafe_samples += 1;
    }

    let field = sc.scaled_field();
    let lie = b.lie_derivative(&field)?;
    let grad: Vec<Polynomial> = (0..n).map(|i| b.derivative(i)).collect();
    let dmax = sc.disturbance.max();
    let mut lie_max = f64::NEG_INFINITY;
    let mut level_samples = 0;
    let mut attempts = 0;
    while level_samples < samples && attempts < 20 * samples {
        attempts += 1;
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let Some(s) = project(b, &grad, s, 0.0) else {
            continue;
        };
        if b.eval(&s).abs() > LEVEL_BAND {
            continue;
        }
        let mut z = s;
        if let Disturbance::Interval { .. } = sc.disturbance {
            z.push(rng.gen_range(0.0..=dmax));
        }
        lie_max = lie_max.max(lie.eval(&z));
        level_samples += 1;
    }
    Ok(SoundnessReport {
        initial_max,
        initial_samples,
        unsafe_min,
        unsafe_samples,
        lie_max,
        level_samples,
    })
}

/// Disturbance schedule family used for validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleClass {
    ConstantMax,
    Zero,
    /// Piecewise constant in `[0, d_max]` with dwell times of at least 0.5 s.
    Random,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassResult {
    pub class: ScheduleClass,
    /// Whether the certificate covers this schedule family.
    pub certified: bool,
    pub trajectories: usize,
    pub violations: usize,
    /// Smallest margin to the unsafe set over all trajectories of the class.
    pub worst_margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub scenario_name: String,
    pub samples: usize,
    pub classes: Vec<ClassResult>,
    pub note: Option<String>,
}

impl ValidationReport {
    /// Unsafe trajectories under schedules the certificate covers.
    pub fn certified_violations(&self) -> usize {
        self.classes.iter().filter(|c| c.certified).map(|c| c.violations).sum()
    }

    pub fn total_violations(&self) -> usize {
        self.classes.iter().map(|c| c.violations).sum()
    }
}

const RANDOM_SCHEDULES: usize = 10;
const MIN_DWELL: f64 = 0.5;
const MAX_DWELL: f64 = 5.0;
const INTERIOR_MARGIN: f64 = 1e-3;

fn random_schedule(rng: &mut ChaCha8Rng, horizon: f64, dmax: f64) -> Vec<(f64, f64)> {
    let mut t = 0.0;
    let mut out = Vec::new();
    while t < horizon {
        out.push((t, rng.gen_range(0.0..=dmax)));
        t += rng.gen_range(MIN_DWELL..MAX_DWELL);
    }
    out
}

fn schedule_value(s: &[(f64, f64)], t: f64) -> f64 {
    let k = s.partition_point(|&(t0, _)| t0 <= t);
    s[k.saturating_sub(1)].1
}

/// Simulates trajectories from random states strictly inside `{B ≤ 0}`
/// under constant-maximum, zero and random disturbance schedules.
pub fn sample_validate(
    ros: &RosEstimate,
    sc: &SafetyScenario,
    trials: usize,
    seed: u64,
) -> Result<ValidationReport, BarrierError> {
    if ros.state_names != sc.state_names || ros.scaling != sc.scaling() {
        return Err(BarrierError::Precondition("estimate and scenario disagree".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sc.dim();
    let mut starts = Vec::with_capacity(trials);
    let mut attempts = 0;
    while starts.len() < trials && attempts < 1000 * trials.max(1) {
        attempts += 1;
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if ros.eval_scaled(&s) <= -INTERIOR_MARGIN {
            starts.push(ros.scaling.to_physical(&s));
        }
    }
    let dmax = sc.disturbance.max();
    let interval = matches!(sc.disturbance, Disturbance::Interval { .. });
    if starts.is_empty() {
        return Ok(ValidationReport {
            scenario_name: sc.name.clone(),
            samples: 0,
            classes: vec![],
            note: Some("no samples: the estimate has no interior points in the box".into()),
        });
    }
    let schedules: Vec<Vec<Vec<(f64, f64)>>> = starts
        .iter()
        .map(|_| {
            (0..RANDOM_SCHEDULES)
                .map(|_| random_schedule(&mut rng, sc.sim.horizon, dmax))
                .collect()
        })
        .collect();
    let prop = sc.propagator();
    let h = sc.sim.horizon;
    let margins: Vec<[f64; 2 + RANDOM_SCHEDULES]> = starts
        .par_iter()
        .zip(&schedules)
        .map(|(x0, scheds)| {
            let mut m = [0.0; 2 + RANDOM_SCHEDULES];
            m[0] = prop.min_margin(x0, |_| dmax, h, &sc.unsafe_set);
            m[1] = prop.min_margin(x0, |_| 0.0, h, &sc.unsafe_set);
            for (k, s) in scheds.iter().enumerate() {
                m[2 + k] = prop.min_margin(x0, |t| schedule_value(s, t), h, &sc.unsafe_set);
            }
            m
        })
        .collect();
    let summarize = |class: ScheduleClass, cols: std::ops::Range<usize>, certified: bool| {
        let vals: Vec<f64> = margins.iter().flat_map(|m| m[cols.clone()].to_vec()).collect();
        ClassResult {
            class,
            certified,
            trajectories: vals.len(),
            violations: vals.iter().filter(|&&v| v <= 0.0).count(),
            worst_margin: vals.iter().copied().fold(f64::INFINITY, f64::min),
        }
    };
    let classes = vec![
        summarize(ScheduleClass::ConstantMax, 0..1, true),
        summarize(ScheduleClass::Zero, 1..2, interval),
        summarize(ScheduleClass::Random, 2..2 + RANDOM_SCHEDULES, interval),
    ];
    Ok(ValidationReport {
        scenario_name: sc.name.clone(),
        samples: starts.len(),
        classes,
        note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_lookup_is_piecewise_constant() {
        let s = vec![(0.0, 1.0), (0.7, 2.0), (2.0, 3.0)];
        assert_eq!(schedule_value(&s, 0.0), 1.0);
        assert_eq!(schedule_value(&s, 0.69), 1.0);
        assert_eq!(schedule_value(&s, 0.7), 2.0);
        assert_eq!(schedule_value(&s, 10.0), 3.0);
    }

    #[test]
    fn random_schedules_respect_dwell_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_schedule(&mut rng, 60.0, 0.15);
        assert!(s.windows(2).all(|w| w[1].0 - w[0].0 >= MIN_DWELL));
        assert!(s.iter().all(|&(_, d)| (0.0..=0.15).contains(&d)));
    }
}
