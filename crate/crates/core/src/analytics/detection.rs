use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Rate;
use crate::engine::Seat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Judgment {
    Human,
    Ai,
}

/// One human judge's post-game verdicts on every other seat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentSheet {
    pub game_id: String,
    pub judge: String,
    pub judge_seat: Seat,
    pub judgments: BTreeMap<Seat, Judgment>,
}

impl JudgmentSheet {
    /// Seats in `1..=seats` other than the judge's that lack a verdict.
    pub fn missing(&self, seats: u8) -> Vec<Seat> {
        (1..=seats)
            .map(Seat)
            .filter(|s| *s != self.judge_seat && !self.judgments.contains_key(s))
            .collect()
    }
}

/// Who actually sat in a seat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "participant", rename_all = "lowercase")]
pub enum SeatIdentity {
    Human,
    Ai(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DetectionError {
    #[error("no ground truth for seat {seat} of game {game_id}")]
    MissingGroundTruth { game_id: String, seat: Seat },
}

/// Per AI participant: judgments that correctly said "ai" over all judgments of its seats.
pub fn detection_accuracy(
    sheets: &[JudgmentSheet],
    truth: &BTreeMap<String, BTreeMap<Seat, SeatIdentity>>,
) -> Result<BTreeMap<String, Rate>, DetectionError> {
    let mut out: BTreeMap<String, Rate> = BTreeMap::new();
    for sheet in sheets {
        for (seat, verdict) in &sheet.judgments {
            let identity = truth
                .get(&sheet.game_id)
                .and_then(|g| g.get(seat))
                .ok_or_else(|| DetectionError::MissingGroundTruth {
                    game_id: sheet.game_id.clone(),
                    seat: *seat,
                })?;
            if let SeatIdentity::Ai(participant) = identity {
                let rate = out.entry(participant.clone()).or_insert(Rate { hits: 0, total: 0 });
                rate.total += 1;
                rate.hits += u32::from(*verdict == Judgment::Ai);
            }
        }
    }
    Ok(out)
}
