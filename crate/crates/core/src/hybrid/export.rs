use std::io::Write;
use std::path::Path;

use super::simulate::{Event, Trajectory};
use super::HybridError;

/// CSV with `t, mode, Δω, ΔP_m, ΔP_v, Δω_r, ΔP_gen`, the remaining states,
/// then RoCoF and the load step.
pub fn write_csv<W: Write>(traj: &Trajectory, out: W) -> Result<(), HybridError> {
    let mut w = csv::Writer::from_writer(out);
    let rest: Vec<usize> = (0..traj.state_names.len())
        .filter(|i| !traj.relevant.contains(i))
        .collect();
    let mut header = vec![
        "t".to_string(),
        "mode".into(),
        "dw".into(),
        "dPm".into(),
        "dPv".into(),
        "dwr".into(),
        "p_gen".into(),
    ];
    header.extend(rest.iter().map(|&i| traj.state_names[i].clone()));
    header.extend(["rocof".to_string(), "d".into()]);
    w.write_record(&header)?;
    for k in 0..traj.len() {
        let mut row = vec![format!("{:.6}", traj.t[k]), traj.mode[k].to_string()];
        row.extend(traj.relevant_at(k).iter().map(|v| format!("{v:.9e}")));
        row.push(format!("{:.9e}", traj.p_gen[k]));
        row.extend(rest.iter().map(|&i| format!("{:.9e}", traj.x[k][i])));
        row.push(format!("{:.9e}", traj.rocof[k]));
        row.push(format!("{}", traj.disturbance[k]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_events_json(events: &[Event], path: &Path) -> Result<(), HybridError> {
    std::fs::write(path, serde_json::to_string_pretty(events)?)?;
    Ok(())
}

pub fn read_events_json(path: &Path) -> Result<Vec<Event>, HybridError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
