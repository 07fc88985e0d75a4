use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Observation, SpeechPayload, Stage};
use crate::engine::{
    consensus_victim, DeathCause, EngineError, GameEvent, GameState, Phase, Role, Rule, Seat,
    Winner,
};

/// Events only the observing seat is entitled to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PrivateEvent {
    SeerCheck {
        round: u32,
        target: Seat,
        is_wolf: bool,
    },
    WitchNight {
        round: u32,
        victim: Option<Seat>,
        saved: bool,
        poisoned: Option<Seat>,
    },
    GuardNight {
        round: u32,
        target: Option<Seat>,
    },
    WolfNight {
        round: u32,
        proposals: BTreeMap<Seat, Option<Seat>>,
        victim: Option<Seat>,
    },
}

/// Events every seat sees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PublicEvent {
    /// Deaths announced after night `round`; causes are never shown.
    Dawn { round: u32, deaths: BTreeSet<Seat> },
    Speech {
        round: u32,
        seat: Seat,
        payload: SpeechPayload,
    },
    Ballot {
        round: u32,
        ballot_index: u8,
        votes: BTreeMap<Seat, Option<Seat>>,
    },
    VotedOut { round: u32, seat: Seat },
    HunterShot {
        round: u32,
        shooter: Seat,
        target: Option<Seat>,
    },
    GameOver { round: u32, winner: Winner },
}

/// The witch's view of the current night.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitchView {
    pub victim: Option<Seat>,
    pub can_save: bool,
    pub can_poison: bool,
}

pub fn public_history(events: &[GameEvent]) -> Vec<PublicEvent> {
    let mut out = Vec::new();
    for event in events {
        match event {
            GameEvent::NightResolved { round, deaths } => out.push(PublicEvent::Dawn {
                round: *round,
                deaths: deaths.clone(),
            }),
            GameEvent::Speech {
                round,
                seat,
                payload,
            } => out.push(PublicEvent::Speech {
                round: *round,
                seat: *seat,
                payload: payload.clone(),
            }),
            GameEvent::Ballot {
                round,
                ballot_index,
                votes,
            } => out.push(PublicEvent::Ballot {
                round: *round,
                ballot_index: *ballot_index,
                votes: votes.clone(),
            }),
            GameEvent::Eliminated {
                round,
                seat,
                cause: DeathCause::Vote,
            } => out.push(PublicEvent::VotedOut {
                round: *round,
                seat: *seat,
            }),
            GameEvent::HunterShot {
                round,
                shooter,
                target,
            } => out.push(PublicEvent::HunterShot {
                round: *round,
                shooter: *shooter,
                target: *target,
            }),
            GameEvent::GameEnded { round, winner } => out.push(PublicEvent::GameOver {
                round: *round,
                winner: *winner,
            }),
            _ => {}
        }
    }
    out
}

fn private_history(state: &GameState, seat: Seat) -> Vec<PrivateEvent> {
    let role = state.role(seat);
    let mut out = Vec::new();
    let mut witch_victim: BTreeMap<u32, Option<Seat>> = BTreeMap::new();
    for event in state.events() {
        match (role, event) {
            (Role::Seer, GameEvent::SeerResult {
                round,
                seer,
                target,
                is_wolf,
            }) if *seer == seat => out.push(PrivateEvent::SeerCheck {
                round: *round,
                target: *target,
                is_wolf: *is_wolf,
            }),
            (Role::Witch, GameEvent::WitchInformed { round, victim }) => {
                witch_victim.insert(*round, *victim);
            }
            (Role::Witch, GameEvent::NightResolved { round, .. }) => {
                if let Some(victim) = witch_victim.get(round) {
                    let packet = night_packet(state, *round);
                    out.push(PrivateEvent::WitchNight {
                        round: *round,
                        victim: *victim,
                        saved: packet.is_some_and(|p| p.witch_save),
                        poisoned: packet.and_then(|p| p.witch_poison),
                    });
                }
            }
            (Role::Guard, GameEvent::NightSubmitted { round, packet }) => {
                out.push(PrivateEvent::GuardNight {
                    round: *round,
                    target: packet.guard_target,
                })
            }
            (Role::Werewolf, GameEvent::NightSubmitted { round, packet }) => {
                out.push(PrivateEvent::WolfNight {
                    round: *round,
                    proposals: packet.wolf_proposals.clone(),
                    victim: consensus_victim(&packet.wolf_proposals),
                })
            }
            _ => {}
        }
    }
    out
}

fn night_packet(state: &GameState, round: u32) -> Option<&crate::engine::NightPacket> {
    state.events().iter().find_map(|e| match e {
        GameEvent::NightSubmitted { round: r, packet } if *r == round => Some(packet),
        _ => None,
    })
}

/// Builds the filtered view for `seat` at `stage`.
///
/// For the witch at night use [`build_witch_observation`], which also carries
/// the current provisional victim.
pub fn build_observation(
    state: &GameState,
    seat: Seat,
    stage: Stage,
) -> Result<Observation, EngineError> {
    if seat.0 == 0 || seat.0 > state.seats() {
        return Err(EngineError::IllegalAction {
            seat: Some(seat),
            rule: Rule::SeatRange,
        });
    }
    let hunter_turn = stage == Stage::HunterShot && state.pending_hunter() == Some(seat);
    if !state.is_alive(seat) && !hunter_turn {
        return Err(EngineError::IllegalAction {
            seat: Some(seat),
            rule: Rule::DeadActor,
        });
    }
    let role = state.role(seat);
    let teammates = if role.is_wolf() {
        state.wolves().into_iter().filter(|s| *s != seat).collect()
    } else {
        BTreeSet::new()
    };
    let alive = state.alive().clone();
    let (legal_targets, may_pass, witch) = match stage {
        Stage::NightAction => match state.night_options(seat) {
            Some(opts) => {
                let witch = (role == Role::Witch).then_some(WitchView {
                    victim: None,
                    can_save: false,
                    can_poison: opts.poison_available,
                });
                (opts.targets, opts.may_pass, witch)
            }
            None => (BTreeSet::new(), true, None),
        },
        Stage::Speech => (alive.iter().copied().filter(|s| *s != seat).collect(), true, None),
        Stage::Vote => (state.vote_targets(seat), true, None),
        Stage::HunterShot => (alive.clone(), true, None),
        Stage::RolePrediction => ((1..=state.seats()).map(Seat).collect(), false, None),
    };
    let ballot_index = match state.phase() {
        Phase::DayVote { ballot_index } => ballot_index,
        _ => 0,
    };
    let speaking_order = if state.day_order().is_empty() {
        Vec::new()
    } else {
        state.day_order().to_vec()
    };
    Ok(Observation {
        seat,
        role,
        round: state.round(),
        stage,
        variant: state.setup().variant,
        seats: state.seats(),
        alive,
        teammates,
        private_history: private_history(state, seat),
        public_history: public_history(state.events()),
        speaking_order,
        legal_targets,
        may_pass,
        witch,
        ballot_index,
    })
}

/// Night observation for the witch, told tonight's provisional victim.
pub fn build_witch_observation(
    state: &GameState,
    seat: Seat,
    victim: Option<Seat>,
) -> Result<Observation, EngineError> {
    let mut obs = build_observation(state, seat, Stage::NightAction)?;
    if let Some(w) = obs.witch.as_mut() {
        w.victim = victim;
        w.can_save = victim.is_some() && !state.antidote_used();
    }
    Ok(obs)
}
