use serde::{Deserialize, Serialize};

use super::automaton::{check_guard, EventScenario, HybridAutomaton};
use super::simulate::{guard_value, simulate, Policy, Trajectory, EVENT_TOL};
use super::HybridError;
use crate::barrier::RosEstimate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingDirection {
    NegToPos,
    PosToNeg,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub time: f64,
    /// Frequency deviation at the crossing (Hz).
    pub dw: f64,
    pub direction: CrossingDirection,
}

/// Sign changes of `f` between consecutive samples `t`, each refined by
/// bisection to [`EVENT_TOL`]. Zero counts as negative.
pub fn zero_crossings<F: Fn(f64) -> f64>(
    t: &[f64],
    f: F,
    direction: CrossingDirection,
) -> Vec<(f64, CrossingDirection)> {
    let mut out = Vec::new();
    let Some(&t0) = t.first() else {
        return out;
    };
    let mut prev_pos = f(t0) > 0.0;
    for w in t.windows(2) {
        let pos = f(w[1]) > 0.0;
        if pos != prev_pos {
            let dir = if pos {
                CrossingDirection::NegToPos
            } else {
                CrossingDirection::PosToNeg
            };
            if direction == CrossingDirection::Both || direction == dir {
                let (mut lo, mut hi) = (w[0], w[1]);
                while hi - lo > EVENT_TOL {
                    let mid = 0.5 * (lo + hi);
                    if (f(mid) > 0.0) == prev_pos {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                out.push((0.5 * (lo + hi), dir));
            }
        }
        prev_pos = pos;
    }
    out
}

fn guard_series<'a>(traj: &'a Trajectory, guard: &'a RosEstimate) -> impl Fn(f64) -> f64 + 'a {
    move |t| guard_value(guard, &traj.relevant_interp(t))
}

/// Crossings of `B(x̄(t)) = 0` along a trajectory.
pub fn guard_crossings(
    traj: &Trajectory,
    guard: &RosEstimate,
    direction: CrossingDirection,
) -> Result<Vec<Crossing>, HybridError> {
    check_guard(guard)?;
    let f = guard_series(traj, guard);
    Ok(zero_crossings(&traj.t, f, direction)
        .into_iter()
        .map(|(time, direction)| Crossing {
            time,
            dw: traj.relevant_interp(time)[0],
            direction,
        })
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalDeadband {
    pub target: u8,
    /// Last exit of the Mode-1 trajectory from the target's guard before
    /// the limit is reached.
    pub t_cr: f64,
    /// `|Δω(t_cr)|` (Hz).
    pub deadband: f64,
    /// `max |Δω|` when switching to the target at `t_cr`.
    pub switched_max_dw: f64,
    /// `max |Δω|` under the deadband trigger at `deadband`.
    pub deadband_max_dw: f64,
    pub safe: bool,
}

/// Latest safe switching instant from Mode 1 to `target` suggested by the
/// target's guard, and its simulation check.
pub fn critical_deadband(
    aut: &HybridAutomaton,
    target: u8,
    sc: &EventScenario,
) -> Result<CriticalDeadband, HybridError> {
    let guard = aut.guard(target)?;
    let base = simulate(aut, sc, &Policy::fixed(1))?;
    let stop = base.first_violation().unwrap_or(sc.horizon);
    let crossings = guard_crossings(&base, guard, CrossingDirection::NegToPos)?;
    let last = crossings.iter().filter(|c| c.time <= stop).last().ok_or_else(|| {
        HybridError::NeverEntered(format!("Mode-1 trajectory never leaves the guard of mode {target}"))
    })?;
    let inside_before = guard_value(guard, &base.relevant_interp(last.time - 1e-3)) <= 0.0;
    if !inside_before {
        return Err(HybridError::NeverEntered(format!("guard of mode {target}")));
    }
    let switched = simulate(aut, sc, &Policy::fixed(1).with_switch(last.time, target))?;
    let deadband = last.dw.abs();
    let by_deadband = simulate(aut, sc, &Policy::deadband(deadband, target))?;
    Ok(CriticalDeadband {
        target,
        t_cr: last.time,
        deadband,
        switched_max_dw: switched.max_abs_dw(),
        deadband_max_dw: by_deadband.max_abs_dw(),
        safe: switched.is_safe() && by_deadband.is_safe(),
    })
}

/// Latest switching time from Mode 1 to `target` that keeps the simulated
/// trajectory safe, by bisection on the switching time.
pub fn simulated_critical_switch(aut: &HybridAutomaton, target: u8, sc: &EventScenario) -> Result<f64, HybridError> {
    let base = simulate(aut, sc, &Policy::fixed(1))?;
    let Some(viol) = base.first_violation() else {
        return Ok(sc.horizon);
    };
    let safe_at = |t: f64| -> Result<bool, HybridError> {
        Ok(simulate(aut, sc, &Policy::fixed(1).with_switch(t, target))?.is_safe())
    };
    let (mut lo, mut hi) = (sc.event_time(), viol);
    if !safe_at(lo)? {
        return Err(HybridError::NeverEntered(format!(
            "mode {target} cannot rescue the trajectory"
        )));
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if safe_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Time of the last mode switch, or the start of the trajectory.
fn support_start(traj: &Trajectory) -> f64 {
    traj.events.last().map(|e| e.time).unwrap_or(traj.t[0])
}

/// First time after the switch into support at which `B_d1(x̄) ≤ 0`.
pub fn earliest_deactivation(traj: &Trajectory, guard: &RosEstimate) -> Result<f64, HybridError> {
    check_guard(guard)?;
    if traj.is_empty() {
        return Err(HybridError::NeverNegative("empty trajectory".into()));
    }
    let start = support_start(traj);
    let f = guard_series(traj, guard);
    if f(start) <= 0.0 {
        return Ok(start);
    }
    let k0 = traj.t.partition_point(|&s| s < start);
    let mut grid = vec![start];
    grid.extend(traj.t[k0..].iter().copied().filter(|&s| s > start));
    zero_crossings(&grid, f, CrossingDirection::PosToNeg)
        .first()
        .map(|c| c.0)
        .ok_or_else(|| HybridError::NeverNegative(format!("no entry into the guard after t = {start:.3} s")))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeactivationCheck {
    pub support: u8,
    pub deadband: f64,
    /// Deadband trigger time.
    pub t_switch: f64,
    pub t_return: f64,
    /// `(return time, max |Δω|)` for returns at and after `t_return`.
    pub later: Vec<(f64, f64)>,
    pub safe_after: bool,
    /// `(t_return − 0.5, max |Δω|)` when that instant lies after the trigger.
    pub early: Option<(f64, f64)>,
}

impl DeactivationCheck {
    pub fn early_unsafe(&self, limit: f64) -> Option<bool> {
        self.early.map(|(_, m)| m > limit)
    }
}

/// Engages `support` at the deadband, finds the earliest guard-approved
/// return to Mode 1 and checks it (and 0.5 s earlier) in simulation.
pub fn deactivation_check(
    aut: &HybridAutomaton,
    sc: &EventScenario,
    support: u8,
    deadband: f64,
) -> Result<DeactivationCheck, HybridError> {
    let guard = aut.guard(1)?;
    let engaged = simulate(aut, sc, &Policy::deadband(deadband, support))?;
    let t_switch = engaged
        .events
        .first()
        .map(|e| e.time)
        .ok_or_else(|| HybridError::Policy(format!("deadband {deadband} Hz never reached")))?;
    let t_return = earliest_deactivation(&engaged, guard)?;
    let mut later = Vec::new();
    for dt in [0.0, 0.5, 1.0, 2.0, 5.0] {
        let t = t_return + dt;
        if t < sc.horizon {
            let tr = simulate(aut, sc, &Policy::deadband(deadband, support).with_switch(t, 1))?;
            later.push((t, tr.max_abs_dw()));
        }
    }
    let early_t = t_return - 0.5;
    let early = if early_t > t_switch {
        let tr = simulate(aut, sc, &Policy::deadband(deadband, support).with_switch(early_t, 1))?;
        Some((early_t, tr.max_abs_dw()))
    } else {
        None
    };
    Ok(DeactivationCheck {
        support,
        deadband,
        t_switch,
        t_return,
        safe_after: later.iter().all(|&(_, m)| m <= sc.limit),
        later,
        early,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeactivationWindow {
    pub t_switch: f64,
    /// Last time with `B_d1(x̄) ≤ 0`: deadline for returning straight to Mode 1.
    pub direct: f64,
    /// Last time with `B_d3(x̄) ≤ 0`: deadline for the detour through Mode 3.
    pub via: f64,
    /// Guards still non-positive at the end of the horizon.
    pub direct_open: bool,
    pub via_open: bool,
}

fn last_inside(traj: &Trajectory, guard: &RosEstimate, from: f64) -> Result<(f64, bool), HybridError> {
    check_guard(guard)?;
    let f = guard_series(traj, guard);
    let k0 = traj.t.partition_point(|&s| s < from);
    let last = (k0..traj.len()).rev().find(|&k| f(traj.t[k]) <= 0.0);
    let Some(k) = last else {
        return Err(HybridError::EmptyWindow(format!(
            "guard never entered after t = {from:.3} s"
        )));
    };
    if k + 1 == traj.len() {
        return Ok((traj.t[k], true));
    }
    let c = zero_crossings(&traj.t[k..=k + 1], f, CrossingDirection::NegToPos);
    Ok((c.first().map(|c| c.0).unwrap_or(traj.t[k]), false))
}

/// Deadlines for leaving `support` (engaged at the deadband) directly to
/// Mode 1 or to mode `via`.
pub fn deactivation_window(
    aut: &HybridAutomaton,
    sc: &EventScenario,
    support: u8,
    via: u8,
    deadband: f64,
) -> Result<DeactivationWindow, HybridError> {
    let traj = simulate(aut, sc, &Policy::deadband(deadband, support))?;
    let t_switch = traj
        .events
        .first()
        .map(|e| e.time)
        .ok_or_else(|| HybridError::Policy(format!("deadband {deadband} Hz never reached")))?;
    let (direct, direct_open) = last_inside(&traj, aut.guard(1)?, t_switch)?;
    let (via_t, via_open) = last_inside(&traj, aut.guard(via)?, t_switch)?;
    Ok(DeactivationWindow {
        t_switch,
        direct,
        via: via_t,
        direct_open,
        via_open,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SequenceCheck {
    pub time: f64,
    /// `max |Δω|` when returning straight to Mode 1 at `time`.
    pub direct_max_dw: f64,
    /// `max |Δω|` when switching to `via` at `time` and on to Mode 1 once
    /// `B_d1 ≤ 0`.
    pub sequence_max_dw: f64,
    /// Time of the guard-driven return to Mode 1, if any.
    pub sequence_return: Option<f64>,
}

pub fn recovery_sequence_check(
    aut: &HybridAutomaton,
    sc: &EventScenario,
    support: u8,
    via: u8,
    deadband: f64,
    time: f64,
) -> Result<(SequenceCheck, Trajectory), HybridError> {
    let direct = simulate(aut, sc, &Policy::deadband(deadband, support).with_switch(time, 1))?;
    let seq_policy = Policy::deadband(deadband, support)
        .with_switch(time, via)
        .with_guard_rule(via, 1, 1);
    let seq = simulate(aut, sc, &seq_policy)?;
    let sequence_return = seq.events.iter().find(|e| e.from == via && e.to == 1).map(|e| e.time);
    Ok((
        SequenceCheck {
            time,
            direct_max_dw: direct.max_abs_dw(),
            sequence_max_dw: seq.max_abs_dw(),
            sequence_return,
        },
        seq,
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// `∫ ΔP_gen dt` while a support mode is engaged (pu·s).
    pub support_area: f64,
    /// `∫ ΔP_gen dt` after the final return to Mode 1 (pu·s).
    pub recovery_area: f64,
    /// `|support + recovery| / |support|`; zero without support.
    pub imbalance: f64,
    pub balanced: bool,
    /// `|Δω_r|` at the end of the horizon (Hz).
    pub final_rotor_deviation: f64,
    pub recovered: bool,
}

pub const AREA_TOL: f64 = 0.10;
pub const ROTOR_TOL: f64 = 1e-3;
/// Largest `|dΔω_r/dt|` (Hz/s) at the end of the horizon accepted as settled.
pub const SETTLED_RATE: f64 = 1e-4;

fn trapezoid(t: &[f64], y: &[f64], range: std::ops::Range<usize>) -> f64 {
    let mut s = 0.0;
    for k in range.start + 1..range.end {
        s += 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
    }
    s
}

/// Area balance of the generator power over the support and recovery
/// periods and the return of the rotor speed.
pub fn rotor_recovery_check(traj: &Trajectory) -> Result<RecoveryReport, HybridError> {
    let n = traj.len();
    if n < 3 {
        return Err(HybridError::HorizonTooShort("fewer than three samples".into()));
    }
    let wr = |k: usize| traj.x[k][traj.relevant[3]];
    let rate = (wr(n - 1) - wr(n - 2)) / (traj.t[n - 1] - traj.t[n - 2]);
    if rate.abs() > SETTLED_RATE {
        return Err(HybridError::HorizonTooShort(format!(
            "rotor speed still moving at {rate:.2e} Hz/s at the end"
        )));
    }
    let first = traj.mode.iter().position(|&m| m != 1);
    let (support_area, recovery_area) = match first {
        None => (0.0, 0.0),
        Some(k0) => {
            if *traj.mode.last().unwrap() != 1 {
                return Err(HybridError::HorizonTooShort("support still engaged at the end".into()));
            }
            let k1 = traj.mode.iter().rposition(|&m| m != 1).unwrap() + 1;
            let s = trapezoid(&traj.t, &traj.p_gen, k0.saturating_sub(1)..k1 + 1);
            let r = trapezoid(&traj.t, &traj.p_gen, k1..n);
            (s, r)
        }
    };
    let imbalance = if support_area.abs() > 0.0 {
        (support_area + recovery_area).abs() / support_area.abs()
    } else {
        0.0
    };
    let final_rotor_deviation = wr(n - 1).abs();
    Ok(RecoveryReport {
        support_area,
        recovery_area,
        imbalance,
        balanced: imbalance <= AREA_TOL,
        final_rotor_deviation,
        recovered: final_rotor_deviation <= ROTOR_TOL,
    })
}
