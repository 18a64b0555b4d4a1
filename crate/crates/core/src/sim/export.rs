//! Line-delimited trajectory records.
//!
//! One JSON object per line. An episode starts with a marker line
//! `{"episode": k, "object": name, "target": [x, z], "seed": s}` followed by
//! one record per control step with fields in this order:
//!
//! `episode, tick, time, thrower_q, thrower_qd, catcher_q, catcher_qd,
//! object_position, object_velocity, attachment, flight_id, reward, terms,
//! cause`
//!
//! `flight_id` names the free-flight parabola the object is on (a new id after
//! every release or bounce) and is null while the object is held.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sim::config::WorldConfig;
use crate::sim::reward::RewardTerms;
use crate::sim::world::{Attachment, FailureCause, StepOutcome, WorldState, CATCHER, THROWER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMarker {
    pub episode: u32,
    pub object: String,
    pub target: [f64; 2],
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub episode: u32,
    pub tick: u32,
    pub time: f64,
    pub thrower_q: [f64; 4],
    pub thrower_qd: [f64; 4],
    pub catcher_q: [f64; 4],
    pub catcher_qd: [f64; 4],
    pub object_position: [f64; 2],
    pub object_velocity: [f64; 2],
    pub attachment: Attachment,
    pub flight_id: Option<u32>,
    pub reward: f64,
    pub terms: RewardTerms,
    pub cause: FailureCause,
}

/// Either kind of line in a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrajectoryLine {
    Record(TrajectoryRecord),
    Marker(EpisodeMarker),
}

impl TrajectoryRecord {
    pub fn capture(config: &WorldConfig, episode: u32, state: &WorldState, outcome: Option<&StepOutcome>) -> Self {
        let flight_id = match state.object.attachment {
            Attachment::Free => state.flight.map(|f| f.id),
            _ => None,
        };
        Self {
            episode,
            tick: state.tick,
            time: state.time(config),
            thrower_q: state.arms[THROWER].q,
            thrower_qd: state.arms[THROWER].qd,
            catcher_q: state.arms[CATCHER].q,
            catcher_qd: state.arms[CATCHER].qd,
            object_position: state.object.position,
            object_velocity: state.object.velocity,
            attachment: state.object.attachment,
            flight_id,
            reward: outcome.map_or(0.0, |o| o.reward),
            terms: outcome.map_or_else(RewardTerms::default, |o| o.terms),
            cause: outcome.map_or(FailureCause::None, |o| o.cause),
        }
    }
}

pub fn write_line<W: Write, T: Serialize>(out: &mut W, line: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, line).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn parse_lines(text: &str) -> Result<Vec<TrajectoryLine>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| crate::error::Error::format("trajectory", e.to_string()))
        })
        .collect()
}
