use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agents::{build_observation, Action, AgentSpec, Stage};
use crate::engine::{replay_with, Faction, GameEvent, GameLog, Role, Seat};

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("game {game_id}: {detail}")]
    Malformed { game_id: String, detail: String },
}

/// Offline agent evaluation against annotated games.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OfflineReport {
    pub voting_events: u32,
    pub identity_predictions: u32,
    pub vote_accuracy: Option<f64>,
    pub abstention_rate: Option<f64>,
    /// Predictions whose faction matches the truth.
    pub alignment_accuracy: Option<f64>,
    /// F1 with Werewolf as the positive class.
    pub wolf_f1: Option<f64>,
}

/// Werewolf-positive confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u32,
    pub fp: u32,
    pub fn_: u32,
    pub tn: u32,
}

impl Confusion {
    pub fn add(&mut self, predicted_wolf: bool, actual_wolf: bool) {
        match (predicted_wolf, actual_wolf) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    /// `None` only when there are no positives on either side.
    pub fn f1(&self) -> Option<f64> {
        let denom = 2 * self.tp + self.fp + self.fn_;
        (denom > 0).then(|| f64::from(2 * self.tp) / f64::from(denom))
    }
}

fn ratio(num: u32, den: u32) -> Option<f64> {
    (den > 0).then(|| f64::from(num) / f64::from(den))
}

/// Scores one predicted role map against the truth.
pub fn score_prediction(
    predicted: &BTreeMap<Seat, Role>,
    truth: &BTreeMap<Seat, Role>,
    aligned: &mut u32,
    total: &mut u32,
    confusion: &mut Confusion,
) {
    for (seat, actual) in truth {
        let Some(guess) = predicted.get(seat) else {
            continue;
        };
        *total += 1;
        *aligned += u32::from(guess.faction() == actual.faction());
        confusion.add(guess.is_wolf(), actual.is_wolf());
    }
}

/// Replays each game to every first ballot and asks the agent, from each living
/// village seat, for a vote and a full role prediction.
pub fn offline_eval(games: &[GameLog], agent: &AgentSpec) -> Result<OfflineReport, SchemaError> {
    let mut votes = 0u32;
    let mut on_wolf = 0u32;
    let mut abstained = 0u32;
    let mut predictions = 0u32;
    let mut aligned = 0u32;
    let mut confusion = Confusion::default();
    for log in games {
        let malformed = |detail: String| SchemaError::Malformed {
            game_id: log.game_id.clone(),
            detail,
        };
        if log.roles.len() != usize::from(log.setup.seats()) {
            return Err(malformed("ground-truth roles do not cover every seat".into()));
        }
        let mut failure = None;
        replay_with(log, |state, _, event| {
            let GameEvent::Ballot { ballot_index: 0, .. } = event else {
                return;
            };
            for seat in state.alive().clone() {
                if state.role(seat).faction() != Faction::Village {
                    continue;
                }
                let mut player = agent.build(seat, log.seed, &log.roles);
                let vote = build_observation(state, seat, Stage::Vote)
                    .map(|obs| player.decide(&obs).action);
                let guess = build_observation(state, seat, Stage::RolePrediction)
                    .map(|obs| player.decide(&obs).action);
                match (vote, guess) {
                    (Ok(Action::Vote(v)), Ok(Action::RolePrediction(roles))) => {
                        votes += 1;
                        match v.target {
                            None => abstained += 1,
                            Some(t) => on_wolf += u32::from(log.roles[&t].is_wolf()),
                        }
                        score_prediction(&roles, &log.roles, &mut aligned, &mut predictions, &mut confusion);
                    }
                    (Err(e), _) | (_, Err(e)) => failure = Some(e.to_string()),
                    _ => failure = Some(format!("agent answered seat {seat} with the wrong stage")),
                }
            }
        })
        .map_err(|e| malformed(e.to_string()))?;
        if let Some(detail) = failure {
            return Err(malformed(detail));
        }
    }
    Ok(OfflineReport {
        voting_events: votes,
        identity_predictions: predictions,
        vote_accuracy: ratio(on_wolf, votes - abstained),
        abstention_rate: ratio(abstained, votes),
        alignment_accuracy: ratio(aligned, predictions),
        wolf_f1: if predictions > 0 { Some(confusion.f1().unwrap_or(0.0)) } else { None },
    })
}
