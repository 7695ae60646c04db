//! CSV export of trajectories and event logs.

use std::io::Write;

use crate::error::Result;
use crate::sim::Trajectory;
use crate::trigger::EventLog;

pub const TRAJECTORY_COLUMNS: [&str; 9] =
    ["t", "x1", "x2", "x1ref", "x2ref", "u", "sigma", "delta", "event"];

pub const EVENT_COLUMNS: [&str; 5] = ["k", "t_k", "T_k", "delta_fired", "zeno_bound"];

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_COLUMNS)?;
    for n in 0..traj.len() {
        w.write_record([
            num(traj.t[n]),
            num(traj.x1[n]),
            num(traj.x2[n]),
            num(traj.x1ref[n]),
            num(traj.x2ref[n]),
            num(traj.u[n]),
            num(traj.sigma[n]),
            num(traj.delta[n]),
            if traj.event[n] { "1" } else { "0" }.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per update; `T_k` is empty for the last event and `zeno_bound`
/// is empty when no bound was evaluated.
pub fn write_event_csv<W: Write>(log: &EventLog, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_COLUMNS)?;
    for k in 0..log.len() {
        let opt = |v: Option<&f64>| v.map(|v| num(*v)).unwrap_or_default();
        w.write_record([
            k.to_string(),
            num(log.instants[k]),
            opt(log.gaps.get(k)),
            num(log.delta_at_event[k]),
            opt(log.bound_at_event.get(k)),
        ])?;
    }
    w.flush()?;
    Ok(())
}
