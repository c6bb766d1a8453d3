//! Team-level aggregation: state distribution, mean engagement state,
//! and the group-disengagement alert, sampled on a fixed period across
//! unsynchronized participant streams.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::pipeline::FrameResult;
use crate::state::EngagementState;

/// Group-disengagement alert cutoff: strictly more than 40% disengaged.
pub const DEFAULT_ALERT_THRESHOLD: f64 = 0.40;

/// Default spacing between team snapshots, seconds.
pub const DEFAULT_SNAPSHOT_PERIOD_S: f64 = 1.0;

#[derive(Debug, Error)]
pub enum TeamError {
    #[error("cannot aggregate an empty participant set")]
    EmptyTeam,
    #[error("alert threshold must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("snapshot period must be positive, got {0}")]
    InvalidPeriod(f64),
    #[error("no participant produced any results")]
    NoResults,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The team's state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TeamSnapshot {
    pub timestamp: f64,
    pub per_participant: BTreeMap<String, EngagementState>,
    /// Participant count per state value 1..=6 (index `value - 1`).
    pub distribution: [usize; 6],
    /// Arithmetic mean of the numeric state values, in [1, 6].
    pub mean_state: f64,
    /// Fraction of participants in Disengagement.
    pub disengaged_fraction: f64,
    /// True when strictly more than the threshold fraction is disengaged.
    pub alert: bool,
}

/// Folds one instant's per-participant states into a snapshot.
pub fn aggregate(
    states: &BTreeMap<String, EngagementState>,
    timestamp: f64,
    alert_threshold: f64,
) -> Result<TeamSnapshot, TeamError> {
    if states.is_empty() {
        return Err(TeamError::EmptyTeam);
    }
    if !(0.0..=1.0).contains(&alert_threshold) {
        return Err(TeamError::InvalidThreshold(alert_threshold));
    }
    let mut distribution = [0usize; 6];
    for state in states.values() {
        distribution[(state.value() - 1) as usize] += 1;
    }
    let n = states.len() as f64;
    let mean_state = states.values().map(|s| s.value() as f64).sum::<f64>() / n;
    let disengaged_fraction = distribution[0] as f64 / n;
    Ok(TeamSnapshot {
        timestamp,
        per_participant: states.clone(),
        distribution,
        mean_state,
        disengaged_fraction,
        alert: disengaged_fraction > alert_threshold,
    })
}

/// Slack for "at or before" timestamp comparisons across float roundoff.
const TIME_EPS: f64 = 1e-9;

/// Samples the participants' result streams on a fixed period.
///
/// The first snapshot lands on the earliest timestamp any participant
/// reported; sampling continues while the snapshot time is at or before
/// the last timestamp seen anywhere. At each snapshot a participant
/// contributes their latest final state at or before that time
/// (sample-and-hold); participants who have not reported yet are left
/// out of that snapshot.
pub fn align_streams(
    results: &[Vec<FrameResult>],
    period_s: f64,
    alert_threshold: f64,
) -> Result<Vec<TeamSnapshot>, TeamError> {
    if !(period_s > 0.0) || !period_s.is_finite() {
        return Err(TeamError::InvalidPeriod(period_s));
    }
    let active: Vec<&Vec<FrameResult>> = results.iter().filter(|r| !r.is_empty()).collect();
    if active.is_empty() {
        return Err(TeamError::NoResults);
    }
    let start = active
        .iter()
        .map(|r| r[0].timestamp)
        .fold(f64::INFINITY, f64::min);
    let end = active
        .iter()
        .map(|r| r[r.len() - 1].timestamp)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut snapshots = Vec::new();
    let mut cursors = vec![0usize; active.len()];
    let mut tick = 0u64;
    loop {
        let at = start + tick as f64 * period_s;
        if at > end + TIME_EPS {
            break;
        }
        let mut states = BTreeMap::new();
        for (list, cursor) in active.iter().zip(cursors.iter_mut()) {
            while *cursor + 1 < list.len() && list[*cursor + 1].timestamp <= at + TIME_EPS {
                *cursor += 1;
            }
            let latest = &list[*cursor];
            if latest.timestamp <= at + TIME_EPS {
                states.insert(latest.participant_id.clone(), latest.final_state);
            }
        }
        if !states.is_empty() {
            snapshots.push(aggregate(&states, at, alert_threshold)?);
        }
        tick += 1;
    }
    Ok(snapshots)
}

pub const SNAPSHOTS_MAGIC: &str = "engage-snapshots";
pub const SNAPSHOTS_VERSION: u32 = 1;

/// Renders snapshots as
/// `timestamp n c1 c2 c3 c4 c5 c6 mean fraction alert` lines under a
/// `engage-snapshots 1` header.
pub fn snapshots_to_string(snapshots: &[TeamSnapshot]) -> String {
    let mut out = format!("{SNAPSHOTS_MAGIC} {SNAPSHOTS_VERSION}\n");
    for s in snapshots {
        out.push_str(&format!("{} {}", s.timestamp, s.per_participant.len()));
        for count in s.distribution {
            out.push_str(&format!(" {count}"));
        }
        out.push_str(&format!(
            " {} {} {}\n",
            s.mean_state,
            s.disengaged_fraction,
            if s.alert { 1 } else { 0 }
        ));
    }
    out
}

pub fn write_snapshots_file(snapshots: &[TeamSnapshot], path: &Path) -> Result<(), TeamError> {
    fs::write(path, snapshots_to_string(snapshots))?;
    Ok(())
}
