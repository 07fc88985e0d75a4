//! Preference-data selection over game logs.
//!
//! Three selectors label individual decisions as desirable or unacceptable:
//! rule-based heuristics over night actions and votes, staged voting over
//! speeches, and a consistency verifier over speeches. Each label carries the
//! id of the [`Criterion`] that produced it.

mod heuristic;
mod staged;
mod verifier;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::{
    build_observation, build_witch_observation, public_history, render_prompt, render_response,
    Action, HunterAction, Message, NightAction, PublicEvent, Stage, TemplateSet, VotePayload,
};
use crate::engine::{
    consensus_victim, replay_with, EngineError, GameEvent, GameLog, Role, Seat,
};
pub use crate::ktomath::Label;

pub use verifier::{verify_speech, Verdict, Verifier};

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    Heuristic,
    StagedVoting,
    Verifier,
}

impl std::str::FromStr for Selector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "heuristic" => Ok(Selector::Heuristic),
            "vote" | "voting" | "staged" | "staged_voting" => Ok(Selector::StagedVoting),
            "verifier" => Ok(Selector::Verifier),
            other => Err(format!(
                "unknown selector `{other}` (expected heuristic, vote or verifier)"
            )),
        }
    }
}

/// Decision kind a record labels. Hunter shots count as night actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DecisionPhase {
    NightAction,
    Vote,
    Speech,
}

macro_rules! criteria {
    ($($variant:ident => $id:literal, $sel:ident, $phase:ident, $label:ident;)*) => {
        /// Every row of the selection table.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum Criterion {
            $(#[serde(rename = $id)] $variant,)*
        }

        impl Criterion {
            pub const ALL: &'static [Criterion] = &[$(Criterion::$variant,)*];

            pub fn id(self) -> &'static str {
                match self { $(Criterion::$variant => $id,)* }
            }

            pub fn selector(self) -> Selector {
                match self { $(Criterion::$variant => Selector::$sel,)* }
            }

            pub fn phase(self) -> DecisionPhase {
                match self { $(Criterion::$variant => DecisionPhase::$phase,)* }
            }

            pub fn label(self) -> Label {
                match self { $(Criterion::$variant => Label::$label,)* }
            }
        }
    };
}

criteria! {
    WolfTargetsSpecial => "wolf_targets_special", Heuristic, NightAction, Desirable;
    SeerFindsWolf => "seer_finds_wolf", Heuristic, NightAction, Desirable;
    WitchSavesNight1 => "witch_saves_night1", Heuristic, NightAction, Desirable;
    WitchPoisonsWolf => "witch_poisons_wolf", Heuristic, NightAction, Desirable;
    GuardProtectsSpecial => "guard_protects_special", Heuristic, NightAction, Desirable;
    HunterShootsWolf => "hunter_shoots_wolf", Heuristic, NightAction, Desirable;
    WolfNoKill => "wolf_no_kill", Heuristic, NightAction, Undesirable;
    WitchNoSaveNight1 => "witch_no_save_night1", Heuristic, NightAction, Undesirable;
    WitchPoisonsVillager => "witch_poisons_villager", Heuristic, NightAction, Undesirable;
    GuardProtectsWolf => "guard_protects_wolf", Heuristic, NightAction, Undesirable;
    HunterShootsSpecial => "hunter_shoots_special", Heuristic, NightAction, Undesirable;
    VoteEliminatesWolf => "vote_eliminates_wolf", Heuristic, Vote, Desirable;
    SpecialVotesWolf => "special_votes_wolf", Heuristic, Vote, Desirable;
    VoteEliminatesVillager => "vote_eliminates_villager", Heuristic, Vote, Undesirable;
    Abstain => "abstain", Heuristic, Vote, Undesirable;
    SplitFromSeer => "split_from_seer", Heuristic, Vote, Undesirable;
    SplitFromMajority => "split_from_majority", Heuristic, Vote, Undesirable;
    WolfSpeechSurvives => "wolf_speech_survives", StagedVoting, Speech, Desirable;
    VillagerNoVotes => "villager_no_votes", StagedVoting, Speech, Desirable;
    SeerNoVillagerVotes => "seer_no_villager_votes", StagedVoting, Speech, Desirable;
    WolfSpeechEliminated => "wolf_speech_eliminated", StagedVoting, Speech, Undesirable;
    WolfSpeechMajority => "wolf_speech_majority", StagedVoting, Speech, Undesirable;
    VillagerSpeechEliminated => "villager_speech_eliminated", StagedVoting, Speech, Undesirable;
    WitchSpeechSuspected => "witch_speech_suspected", StagedVoting, Speech, Undesirable;
    SeerSpeechMajority => "seer_speech_majority", StagedVoting, Speech, Undesirable;
    SpeechConsistent => "speech_consistent", Verifier, Speech, Desirable;
    SpeechConflict => "speech_conflict", Verifier, Speech, Undesirable;
}

/// One labeled decision in KTO dataset form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub schema_version: u32,
    pub game_id: String,
    pub seat: Seat,
    pub round: u32,
    pub phase: DecisionPhase,
    pub selector: Selector,
    pub criterion: Criterion,
    pub label: Label,
    pub role: Role,
    pub context: Vec<Message>,
    pub response: String,
    /// Set when the requested verifier was unavailable and the structural one answered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

impl PreferenceRecord {
    pub fn key(&self) -> (&str, Seat, u32, DecisionPhase, Selector) {
        (&self.game_id, self.seat, self.round, self.phase, self.selector)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SelectionError {
    #[error("game {game_id}: {source}")]
    Replay {
        game_id: String,
        #[source]
        source: EngineError,
    },
    #[error("game {game_id}: day {round} has speeches but no ballot")]
    MissingBallot { game_id: String, round: u32 },
    #[error("duplicate record for game {game_id}, seat {seat}, round {round}, {phase:?}, {selector:?}")]
    DuplicateRecord {
        game_id: String,
        seat: Seat,
        round: u32,
        phase: DecisionPhase,
        selector: Selector,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Prompt and response for one decision, as logged or re-rendered.
#[derive(Debug, Clone)]
pub(crate) struct Exchange {
    pub context: Vec<Message>,
    pub response: String,
}

/// What a speaker could see when speaking.
#[derive(Debug, Clone)]
pub(crate) struct SpeechMoment {
    pub alive: BTreeSet<Seat>,
    pub public: Vec<PublicEvent>,
}

/// Event index, ballot index and votes of a day's deciding ballot.
pub(crate) type FinalBallot<'a> = (usize, u8, &'a BTreeMap<Seat, Option<Seat>>);

/// A replayed log with the per-decision material selectors need.
pub(crate) struct Walk<'a> {
    pub log: &'a GameLog,
    /// Keyed by `(round, seat, stage, ballot_index)`.
    exchanges: BTreeMap<(u32, Seat, Stage, u8), Exchange>,
    /// Living seats before each decision event, by event index.
    pub alive_before: BTreeMap<usize, BTreeSet<Seat>>,
    pub speeches: BTreeMap<usize, SpeechMoment>,
}

impl<'a> Walk<'a> {
    pub fn new(log: &'a GameLog, templates: &TemplateSet) -> Result<Walk<'a>, SelectionError> {
        let logged: BTreeMap<(u32, Seat, Stage, u8), Exchange> = log
            .transcripts
            .iter()
            .map(|t| {
                (
                    (t.round, t.seat, t.stage, t.ballot_index),
                    Exchange {
                        context: t.messages.clone(),
                        response: t.response.clone(),
                    },
                )
            })
            .collect();
        let mut exchanges = BTreeMap::new();
        let mut alive_before = BTreeMap::new();
        let mut speeches = BTreeMap::new();
        let mut failure = None;
        let replayed = replay_with(log, |state, index, event| {
            alive_before.insert(index, state.alive().clone());
            let mut put = |seat: Seat, stage: Stage, ballot: u8, action: Action| {
                let key = (state.round(), seat, stage, ballot);
                if let Some(x) = logged.get(&key) {
                    exchanges.insert(key, x.clone());
                    return;
                }
                let obs = match (stage, event) {
                    (Stage::NightAction, GameEvent::NightSubmitted { packet, .. })
                        if state.role(seat) == Role::Witch =>
                    {
                        build_witch_observation(state, seat, consensus_victim(&packet.wolf_proposals))
                    }
                    _ => build_observation(state, seat, stage),
                };
                match obs {
                    Ok(obs) => {
                        exchanges.insert(
                            key,
                            Exchange {
                                context: render_prompt(&obs, templates).unwrap_or_default(),
                                response: render_response(&action),
                            },
                        );
                    }
                    Err(e) => failure = Some(e),
                }
            };
            match event {
                GameEvent::NightSubmitted { packet, .. } => {
                    let night = |target, save| {
                        Action::Night(NightAction {
                            target,
                            save,
                            reason: String::new(),
                        })
                    };
                    for wolf in state.living_wolves() {
                        let target = packet.wolf_proposals.get(&wolf).copied().flatten();
                        put(wolf, Stage::NightAction, 0, night(target, false));
                    }
                    for (role, target, save) in [
                        (Role::Seer, packet.seer_target, false),
                        (Role::Guard, packet.guard_target, false),
                        (Role::Witch, packet.witch_poison, packet.witch_save),
                    ] {
                        if let Some(seat) = state.living_with_role(role) {
                            put(seat, Stage::NightAction, 0, night(target, save));
                        }
                    }
                }
                GameEvent::Speech { seat, payload, .. } => {
                    speeches.insert(
                        index,
                        SpeechMoment {
                            alive: state.alive().clone(),
                            public: public_history(state.events()),
                        },
                    );
                    put(*seat, Stage::Speech, 0, Action::Speech(payload.clone()));
                }
                GameEvent::Ballot {
                    ballot_index,
                    votes,
                    ..
                } => {
                    for voter in state.alive().clone() {
                        let target = votes.get(&voter).copied().flatten();
                        put(
                            voter,
                            Stage::Vote,
                            *ballot_index,
                            Action::Vote(VotePayload {
                                target,
                                ..VotePayload::default()
                            }),
                        );
                    }
                }
                GameEvent::HunterShot { shooter, target, .. } => put(
                    *shooter,
                    Stage::HunterShot,
                    0,
                    Action::HunterShot(HunterAction {
                        target: *target,
                        reason: String::new(),
                    }),
                ),
                _ => {}
            }
        });
        let err = |source| SelectionError::Replay {
            game_id: log.game_id.clone(),
            source,
        };
        replayed.map_err(err)?;
        if let Some(e) = failure {
            return Err(err(e));
        }
        Ok(Walk {
            log,
            exchanges,
            alive_before,
            speeches,
        })
    }

    pub fn role(&self, seat: Seat) -> Role {
        self.log.roles[&seat]
    }

    pub fn record(
        &self,
        seat: Seat,
        round: u32,
        stage: Stage,
        ballot: u8,
        criterion: Criterion,
    ) -> PreferenceRecord {
        let exchange = self
            .exchanges
            .get(&(round, seat, stage, ballot))
            .cloned()
            .unwrap_or(Exchange {
                context: Vec::new(),
                response: String::new(),
            });
        PreferenceRecord {
            schema_version: DATASET_SCHEMA_VERSION,
            game_id: self.log.game_id.clone(),
            seat,
            round,
            phase: criterion.phase(),
            selector: criterion.selector(),
            criterion,
            label: criterion.label(),
            role: self.role(seat),
            context: exchange.context,
            response: exchange.response,
            annotation: None,
        }
    }

    /// The last ballot of each day, with its event index.
    pub fn final_ballots(&self) -> BTreeMap<u32, FinalBallot<'_>> {
        let mut out = BTreeMap::new();
        for (i, e) in self.log.events.iter().enumerate() {
            if let GameEvent::Ballot {
                round,
                ballot_index,
                votes,
            } = e
            {
                out.insert(*round, (i, *ballot_index, votes));
            }
        }
        out
    }

    /// Seat removed by the day vote of `round`, if any.
    pub fn voted_out(&self, round: u32) -> Option<Seat> {
        self.log.events.iter().find_map(|e| match e {
            GameEvent::Eliminated {
                round: r,
                seat,
                cause: crate::engine::DeathCause::Vote,
            } if *r == round => Some(*seat),
            _ => None,
        })
    }
}

pub fn select_heuristic(log: &GameLog) -> Result<Vec<PreferenceRecord>, SelectionError> {
    let walk = Walk::new(log, &TemplateSet::default())?;
    Ok(heuristic::select(&walk))
}

pub fn select_staged_voting(log: &GameLog) -> Result<Vec<PreferenceRecord>, SelectionError> {
    let walk = Walk::new(log, &TemplateSet::default())?;
    staged::select(&walk)
}

pub fn select_verifier(
    log: &GameLog,
    verifier: &Verifier,
) -> Result<Vec<PreferenceRecord>, SelectionError> {
    let walk = Walk::new(log, &TemplateSet::default())?;
    Ok(verifier::select(&walk, verifier))
}

/// Runs the chosen selectors over every log, in log order then selector order.
pub fn select_all(
    logs: &[GameLog],
    selectors: &[Selector],
    verifier: &Verifier,
    templates: &TemplateSet,
) -> Result<Vec<PreferenceRecord>, SelectionError> {
    let mut out = Vec::new();
    for log in logs {
        let walk = Walk::new(log, templates)?;
        for selector in selectors {
            match selector {
                Selector::Heuristic => out.extend(heuristic::select(&walk)),
                Selector::StagedVoting => out.extend(staged::select(&walk)?),
                Selector::Verifier => out.extend(verifier::select(&walk, verifier)),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total: usize,
    pub by_label: BTreeMap<String, usize>,
    pub by_selector: BTreeMap<String, usize>,
    pub by_phase: BTreeMap<String, usize>,
    pub by_role: BTreeMap<String, usize>,
    pub by_criterion: BTreeMap<String, usize>,
}

fn wire<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

pub fn dataset_stats(records: &[PreferenceRecord]) -> DatasetStats {
    let mut stats = DatasetStats {
        total: records.len(),
        ..DatasetStats::default()
    };
    for r in records {
        *stats.by_label.entry(wire(&r.label)).or_default() += 1;
        *stats.by_selector.entry(wire(&r.selector)).or_default() += 1;
        *stats.by_phase.entry(wire(&r.phase)).or_default() += 1;
        *stats.by_role.entry(r.role.name().to_string()).or_default() += 1;
        *stats.by_criterion.entry(r.criterion.id().to_string()).or_default() += 1;
    }
    stats
}

/// Rejects records sharing `(game_id, seat, round, phase, selector)`.
pub fn check_unique(records: &[PreferenceRecord]) -> Result<(), SelectionError> {
    let mut seen = BTreeSet::new();
    for r in records {
        if !seen.insert(r.key()) {
            return Err(SelectionError::DuplicateRecord {
                game_id: r.game_id.clone(),
                seat: r.seat,
                round: r.round,
                phase: r.phase,
                selector: r.selector,
            });
        }
    }
    Ok(())
}

/// Writes one JSON record per line and returns summary counts.
pub fn emit_dataset(records: &[PreferenceRecord], path: &Path) -> Result<DatasetStats, SelectionError> {
    check_unique(records)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(dataset_stats(records))
}

pub fn read_dataset(path: &Path) -> Result<Vec<PreferenceRecord>, SelectionError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| SelectionError::Io(std::io::Error::other(e))))
        .collect()
}
