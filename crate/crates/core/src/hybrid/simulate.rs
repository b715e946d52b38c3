use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::automaton::{EventScenario, HybridAutomaton};
use super::HybridError;
use crate::barrier::RosEstimate;
use crate::linalg::{affine_step, Mat, Vector};
use crate::plant::{ClosedLoopModel, ModelOrder};

/// Bisection tolerance on event times (s).
pub const EVENT_TOL: f64 = 1e-6;
/// Largest number of events accepted within one second.
pub const CHATTER_LIMIT: usize = 100;

/// Switch from the policy's initial mode to `to` once `|Δω| ≥ threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeadbandRule {
    pub threshold: f64,
    pub to: u8,
    /// Re-arm whenever the initial mode is entered again; otherwise the
    /// trigger fires once.
    #[serde(default)]
    pub rearm: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduledSwitch {
    pub time: f64,
    pub to: u8,
}

/// Leave `from` for `to` as soon as the relevant states lie in the region of
/// safety of mode `guard` (`B_guard(x̄) ≤ 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuardRule {
    pub from: u8,
    pub guard: u8,
    pub to: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    pub initial_mode: u8,
    #[serde(default)]
    pub deadband: Option<DeadbandRule>,
    #[serde(default)]
    pub scheduled: Vec<ScheduledSwitch>,
    #[serde(default)]
    pub guard_rules: Vec<GuardRule>,
}

impl Policy {
    pub fn fixed(mode: u8) -> Self {
        Policy {
            initial_mode: mode,
            deadband: None,
            scheduled: vec![],
            guard_rules: vec![],
        }
    }

    /// Mode 1 with a one-shot deadband trigger into `to`.
    pub fn deadband(threshold: f64, to: u8) -> Self {
        Policy {
            deadband: Some(DeadbandRule {
                threshold,
                to,
                rearm: false,
            }),
            ..Self::fixed(1)
        }
    }

    pub fn with_switch(mut self, time: f64, to: u8) -> Self {
        self.scheduled.push(ScheduledSwitch { time, to });
        self.scheduled.sort_by(|a, b| a.time.total_cmp(&b.time));
        self
    }

    pub fn with_guard_rule(mut self, from: u8, guard: u8, to: u8) -> Self {
        self.guard_rules.push(GuardRule { from, guard, to });
        self
    }

    fn validate(&self, aut: &HybridAutomaton, sc: &EventScenario) -> Result<(), HybridError> {
        aut.mode(self.initial_mode)?;
        if let Some(db) = &self.deadband {
            aut.mode(db.to)?;
            if !(db.threshold > 0.0) {
                return Err(HybridError::Policy("deadband threshold must be positive".into()));
            }
        }
        for s in &self.scheduled {
            aut.mode(s.to)?;
            if !(s.time >= 0.0 && s.time <= sc.horizon) {
                return Err(HybridError::Policy(format!(
                    "switch at {} s outside the horizon",
                    s.time
                )));
            }
        }
        for r in &self.guard_rules {
            aut.mode(r.from)?;
            aut.mode(r.to)?;
            aut.guard(r.guard)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EventKind {
    Deadband,
    Guard { guard: u8 },
    Scheduled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub from: u8,
    pub to: u8,
    pub state_before: Vec<f64>,
    pub state_after: Vec<f64>,
}

/// Uniformly sampled switched trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub order: ModelOrder,
    pub state_names: Vec<String>,
    /// Indices of `(Δω, ΔP_m, ΔP_v, Δω_r)` in the state.
    pub relevant: [usize; 4],
    pub limit: f64,
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub mode: Vec<u8>,
    pub disturbance: Vec<f64>,
    pub p_gen: Vec<f64>,
    pub rocof: Vec<f64>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.t.len() < 2 {
            0.0
        } else {
            self.t[1] - self.t[0]
        }
    }

    pub fn dw(&self, k: usize) -> f64 {
        self.x[k][self.relevant[0]]
    }

    pub fn relevant_at(&self, k: usize) -> [f64; 4] {
        self.relevant.map(|i| self.x[k][i])
    }

    /// Relevant states at time `t`, linear between grid points.
    pub fn relevant_interp(&self, t: f64) -> [f64; 4] {
        let n = self.t.len();
        if n < 2 {
            return if n == 1 { self.relevant_at(0) } else { [0.0; 4] };
        }
        let k = self.t.partition_point(|&s| s <= t).clamp(1, n - 1);
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let a = self.relevant_at(k - 1);
        let b = self.relevant_at(k);
        std::array::from_fn(|i| a[i] + w * (b[i] - a[i]))
    }

    pub fn max_abs_dw(&self) -> f64 {
        (0..self.len()).map(|k| self.dw(k).abs()).fold(0.0, f64::max)
    }

    /// `(t, Δω)` at the lowest frequency deviation.
    pub fn nadir(&self) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        for k in 0..self.len() {
            if self.dw(k) < best.1 {
                best = (self.t[k], self.dw(k));
            }
        }
        best
    }

    /// `max |Δω| ≤ limit`.
    pub fn is_safe(&self) -> bool {
        self.max_abs_dw() <= self.limit
    }

    /// First grid time with `|Δω| > limit`.
    pub fn first_violation(&self) -> Option<f64> {
        (0..self.len())
            .find(|&k| self.dw(k).abs() > self.limit)
            .map(|k| self.t[k])
    }

    pub fn mode_at(&self, t: f64) -> u8 {
        let mut m = self.mode.first().copied().unwrap_or(0);
        for e in &self.events {
            if e.time <= t {
                m = e.to;
            }
        }
        m
    }
}

struct Stepper<'a> {
    models: BTreeMap<u8, &'a ClosedLoopModel>,
    cache: BTreeMap<u8, (Mat, Vector)>,
    dt: f64,
}

impl Stepper<'_> {
    fn step(&self, mode: u8, x: &Vector, h: f64, d: f64) -> Vector {
        if h <= 0.0 {
            return x.clone();
        }
        if (h - self.dt).abs() <= 1e-11 {
            let (phi, gamma) = &self.cache[&mode];
            return phi * x + gamma * d;
        }
        let m = self.models[&mode];
        let (phi, gamma) = affine_step(&m.a, &m.e, h);
        phi * x + gamma * d
    }
}

pub(crate) fn guard_value(ros: &RosEstimate, xbar: &[f64]) -> f64 {
    if ros.in_domain(xbar) {
        ros.eval_physical(xbar)
    } else {
        1.0
    }
}

struct Switcher<'a> {
    aut: &'a HybridAutomaton,
    policy: &'a Policy,
    armed: bool,
    recent: VecDeque<f64>,
}

impl Switcher<'_> {
    /// The first rule that fires in `mode` at state `x`.
    fn firing(&self, mode: u8, x: &Vector, model: &ClosedLoopModel) -> Option<(EventKind, u8)> {
        if let Some(db) = &self.policy.deadband {
            if self.armed && mode == self.policy.initial_mode && x[model.relevant[0]].abs() >= db.threshold {
                return Some((EventKind::Deadband, db.to));
            }
        }
        let xbar = model.relevant_states(x);
        for r in self
            .policy
            .guard_rules
            .iter()
            .filter(|r| r.from == mode && r.to != mode)
        {
            let ros = &self.aut.guards[&r.guard];
            if guard_value(ros, &xbar) <= 0.0 {
                return Some((EventKind::Guard { guard: r.guard }, r.to));
            }
        }
        None
    }

    fn record(&mut self, time: f64) -> Result<(), HybridError> {
        self.recent.push_back(time);
        while self.recent.front().is_some_and(|&s| s < time - 1.0) {
            self.recent.pop_front();
        }
        if self.recent.len() > CHATTER_LIMIT {
            return Err(HybridError::Chattering {
                time,
                events: self.recent.len(),
            });
        }
        Ok(())
    }

    fn switch(
        &mut self,
        events: &mut Vec<Event>,
        time: f64,
        kind: EventKind,
        mode: &mut u8,
        to: u8,
        x: &Vector,
    ) -> Result<(), HybridError> {
        let state: Vec<f64> = x.iter().copied().collect();
        events.push(Event {
            time,
            kind,
            from: *mode,
            to,
            state_before: state.clone(),
            state_after: state,
        });
        if kind == EventKind::Deadband {
            self.armed = false;
        }
        if to == self.policy.initial_mode && self.policy.deadband.is_some_and(|d| d.rearm) {
            self.armed = true;
        }
        *mode = to;
        self.record(time)
    }

    /// Fires every rule that holds at `x` right now.
    fn settle(&mut self, events: &mut Vec<Event>, time: f64, mode: &mut u8, x: &Vector) -> Result<(), HybridError> {
        while let Some((kind, to)) = self.firing(*mode, x, self.aut.model(*mode)?) {
            self.switch(events, time, kind, mode, to, x)?;
        }
        Ok(())
    }
}

/// Simulates the switched closed loop from the pre-event equilibrium
/// (`x = 0`) with exact matrix-exponential stepping on the `dt` grid.
/// Deadband and guard events are located by bisection to [`EVENT_TOL`].
pub fn simulate(aut: &HybridAutomaton, sc: &EventScenario, policy: &Policy) -> Result<Trajectory, HybridError> {
    sc.validate()?;
    policy.validate(aut, sc)?;
    let dt = sc.dt;
    let first = aut.model(policy.initial_mode)?;
    let n = first.dim();
    let mut models = BTreeMap::new();
    let mut cache = BTreeMap::new();
    for m in &aut.modes {
        let model = m.model(aut.order);
        if model.dim() != n {
            return Err(HybridError::Policy("modes have different state dimensions".into()));
        }
        cache.insert(m.id(), affine_step(&model.a, &model.e, dt));
        models.insert(m.id(), model);
    }
    let stepper = Stepper { models, cache, dt };
    let mut sw = Switcher {
        aut,
        policy,
        armed: policy.deadband.is_some(),
        recent: VecDeque::new(),
    };

    // Times at which the dynamics change discontinuously.
    let mut breaks: Vec<(f64, Option<u8>)> = sc.steps.iter().map(|&(t, _)| (t, None)).collect();
    breaks.extend(policy.scheduled.iter().map(|s| (s.time, Some(s.to))));
    breaks.sort_by(|a, b| a.0.total_cmp(&b.0));

    let steps = (sc.horizon / dt).round() as usize;
    let mut traj = Trajectory {
        order: aut.order,
        state_names: first.states.clone(),
        relevant: first.relevant,
        limit: sc.limit,
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        mode: Vec::with_capacity(steps + 1),
        disturbance: Vec::with_capacity(steps + 1),
        p_gen: Vec::with_capacity(steps + 1),
        rocof: Vec::with_capacity(steps + 1),
        events: vec![],
    };
    let mut mode = policy.initial_mode;
    let mut x = Vector::zeros(n);
    let mut next_break = 0;
    let push = |traj: &mut Trajectory, t: f64, x: &Vector, mode: u8| -> Result<(), HybridError> {
        let model = aut.model(mode)?;
        let d = sc.disturbance_at(t);
        traj.t.push(t);
        traj.x.push(x.iter().copied().collect());
        traj.mode.push(mode);
        traj.disturbance.push(d);
        traj.p_gen.push(model.p_gen(x, d));
        traj.rocof.push(model.rocof(x, d));
        Ok(())
    };

    // Breaks at t = 0 and rules holding at the start.
    while next_break < breaks.len() && breaks[next_break].0 <= 1e-12 {
        if let Some(to) = breaks[next_break].1 {
            if to != mode {
                sw.switch(&mut traj.events, 0.0, EventKind::Scheduled, &mut mode, to, &x)?;
            }
        }
        next_break += 1;
    }
    sw.settle(&mut traj.events, 0.0, &mut mode, &x)?;
    push(&mut traj, 0.0, &x, mode)?;

    for k in 0..steps {
        let t1 = (k + 1) as f64 * dt;
        let mut t = k as f64 * dt;
        loop {
            let target = match breaks.get(next_break) {
                Some(&(tb, _)) if tb <= t1 + 1e-12 => tb.max(t),
                _ => t1,
            };
            // Advance to `target`, stopping at the first rule that fires.
            while t < target {
                let d = sc.disturbance_at(t);
                let x_end = stepper.step(mode, &x, target - t, d);
                let model = aut.model(mode)?;
                if sw.firing(mode, &x_end, model).is_none() {
                    x = x_end;
                    break;
                }
                let (mut lo, mut hi) = (t, target);
                while hi - lo > EVENT_TOL {
                    let mid = 0.5 * (lo + hi);
                    if sw.firing(mode, &stepper.step(mode, &x, mid - t, d), model).is_some() {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                x = stepper.step(mode, &x, hi - t, d);
                t = hi;
                sw.settle(&mut traj.events, t, &mut mode, &x)?;
            }
            t = target;
            let mut hit = false;
            while next_break < breaks.len() && breaks[next_break].0 <= t + 1e-12 {
                hit = true;
                if let Some(to) = breaks[next_break].1 {
                    if to != mode {
                        sw.switch(&mut traj.events, t, EventKind::Scheduled, &mut mode, to, &x)?;
                    }
                }
                next_break += 1;
            }
            if hit {
                sw.settle(&mut traj.events, t, &mut mode, &x)?;
            }
            if target >= t1 {
                break;
            }
        }
        push(&mut traj, t1, &x, mode)?;
    }
    Ok(traj)
}
