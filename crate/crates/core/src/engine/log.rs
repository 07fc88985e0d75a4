use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::state::GameState;
use super::types::*;
use crate::agents::{DecisionRecord, PredictionRecord};

pub const LOG_SCHEMA_VERSION: u32 = 1;

/// Persisted record of one match: ground truth, every event, and the agent transcripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameLog {
    pub schema_version: u32,
    pub game_id: String,
    pub setup: Setup,
    pub seed: u64,
    pub roles: BTreeMap<Seat, Role>,
    pub events: Vec<GameEvent>,
    pub winner: Option<Winner>,
    /// Seat to participant id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub participants: BTreeMap<Seat, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transcripts: Vec<DecisionRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predictions: Vec<PredictionRecord>,
    /// Seats whose agent failed at transport level at least once.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub degraded: BTreeSet<Seat>,
}

impl GameLog {
    /// Snapshot of a finished (or abandoned) state, without transcripts.
    pub fn from_state(game_id: impl Into<String>, state: &GameState) -> GameLog {
        GameLog {
            schema_version: LOG_SCHEMA_VERSION,
            game_id: game_id.into(),
            setup: state.setup().clone(),
            seed: state.setup().seed,
            roles: state.roles(),
            events: state.events().to_vec(),
            winner: state.winner(),
            participants: BTreeMap::new(),
            transcripts: Vec::new(),
            predictions: Vec::new(),
            degraded: BTreeSet::new(),
        }
    }

    /// Number of completed rounds, i.e. the round in which the game ended.
    pub fn rounds(&self) -> u32 {
        self.events.iter().filter_map(GameEvent::round).max().unwrap_or(0)
    }

    /// Canonical single-line JSON.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("game logs always serialize")
    }

    pub fn from_line(line: &str) -> Result<GameLog, LogError> {
        let log: GameLog = serde_json::from_str(line).map_err(|e| LogError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        if log.schema_version != LOG_SCHEMA_VERSION {
            return Err(LogError::Parse {
                line: 0,
                message: format!("unsupported schema_version {}", log.schema_version),
            });
        }
        Ok(log)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub fn write_jsonl<'a>(
    path: &Path,
    logs: impl IntoIterator<Item = &'a GameLog>,
) -> Result<(), LogError> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for log in logs {
        out.write_all(log.to_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<GameLog>, LogError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut logs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let log = GameLog::from_line(&line).map_err(|e| match e {
            LogError::Parse { message, .. } => LogError::Parse {
                line: i + 1,
                message,
            },
            other => other,
        })?;
        logs.push(log);
    }
    Ok(logs)
}

/// Every `*.jsonl` file under `dir`, in file-name order.
pub fn read_dir(dir: &Path) -> Result<Vec<GameLog>, LogError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    let mut logs = Vec::new();
    for p in paths {
        logs.extend(read_jsonl(&p)?);
    }
    Ok(logs)
}

/// Re-executes the recorded decisions and checks every derived event.
pub fn replay(log: &GameLog) -> Result<GameState, EngineError> {
    replay_with(log, |_, _, _| {})
}

/// Like [`replay`], calling `visit(state_before, index, event)` before each decision is applied.
pub fn replay_with<F>(log: &GameLog, mut visit: F) -> Result<GameState, EngineError>
where
    F: FnMut(&GameState, usize, &GameEvent),
{
    let diverge = |index: usize, detail: String| EngineError::ReplayDivergence { index, detail };
    if log.events.is_empty() {
        return Err(diverge(0, "log has no events".into()));
    }
    let mut state = GameState::new_game(log.setup.clone())?;
    if state.roles() != log.roles {
        return Err(diverge(0, "recorded roles differ from the dealt roles".into()));
    }
    let mut index = 0;
    while index < log.events.len() {
        let produced = state.events().len();
        if index < produced {
            if state.events()[index] != log.events[index] {
                return Err(diverge(
                    index,
                    format!(
                        "expected {:?}, recomputed {:?}",
                        log.events[index],
                        state.events()[index]
                    ),
                ));
            }
            index += 1;
            continue;
        }
        let event = &log.events[index];
        if !event.is_decision() {
            return Err(diverge(
                index,
                format!("recorded {event:?} was not produced by the engine"),
            ));
        }
        if state.winner().is_some() {
            return Err(diverge(index, "decision recorded after the game ended".into()));
        }
        visit(&state, index, event);
        apply_decision(&mut state, event, index)?;
    }
    if state.events().len() != log.events.len() {
        return Err(diverge(
            log.events.len(),
            format!(
                "engine produced {} events, log has {}",
                state.events().len(),
                log.events.len()
            ),
        ));
    }
    if state.winner() != log.winner {
        return Err(diverge(
            log.events.len(),
            format!("winner {:?} recorded, {:?} recomputed", log.winner, state.winner()),
        ));
    }
    Ok(state)
}

fn apply_decision(state: &mut GameState, event: &GameEvent, index: usize) -> Result<(), EngineError> {
    let current = state.round();
    let round_check = |round: u32| {
        if round != current {
            Err(EngineError::ReplayDivergence {
                index,
                detail: format!("decision for round {round} during round {current}"),
            })
        } else {
            Ok(())
        }
    };
    match event {
        GameEvent::NightSubmitted { round, packet } => {
            round_check(*round)?;
            state.resolve_night(packet.clone())?;
        }
        GameEvent::Speech {
            round,
            seat,
            payload,
        } => {
            round_check(*round)?;
            state.submit_speech(*seat, payload.clone())?;
        }
        GameEvent::Ballot {
            round,
            ballot_index,
            votes,
        } => {
            round_check(*round)?;
            if state.phase()
                != (Phase::DayVote {
                    ballot_index: *ballot_index,
                })
            {
                return Err(EngineError::ReplayDivergence {
                    index,
                    detail: format!("ballot {ballot_index} recorded in phase {:?}", state.phase()),
                });
            }
            state.apply_ballot(votes)?;
        }
        GameEvent::HunterShot {
            round,
            shooter,
            target,
        } => {
            round_check(*round)?;
            state.hunter_shoot(*shooter, *target)?;
        }
        _ => unreachable!("only decision events are applied"),
    }
    Ok(())
}
