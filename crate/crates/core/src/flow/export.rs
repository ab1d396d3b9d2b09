//! CSV/JSON writers for trajectories and section hits.

use super::{IntegratorConfig, Sample, SectionHit, Trajectory};
use serde::Serialize;
use std::fmt::Write;

/// `t,x,y,z` with a header row.
pub fn trajectory_csv(tr: &Trajectory) -> String {
    let mut out = String::from("t,x,y,z\n");
    for s in &tr.samples {
        let _ = writeln!(out, "{},{},{},{}", s.t, s.x[0], s.x[1], s.x[2]);
    }
    out
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    samples: &'a [Sample],
    config: &'a IntegratorConfig,
}

/// JSON without the interpolant.
pub fn trajectory_json(tr: &Trajectory) -> String {
    serde_json::to_string_pretty(&TrajectoryJson { samples: &tr.samples, config: &tr.config })
        .expect("trajectory serialises")
}

/// `t,x,y,z,dot` with a header row.
pub fn hits_csv(hits: &[SectionHit]) -> String {
    let mut out = String::from("t,x,y,z,dot\n");
    for h in hits {
        let _ = writeln!(out, "{},{},{},{},{}", h.t, h.x[0], h.x[1], h.x[2], h.dot);
    }
    out
}
