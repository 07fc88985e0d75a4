use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    Action, Agent, Claim, Decision, HunterAction, NightAction, Observation, PrivateEvent,
    PublicEvent, SpeechPayload, Stage, VotePayload,
};
use crate::engine::{Role, Seat};

fn seat_rng(seed: u64, seat: Seat) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(seat.0));
    rng
}

/// Uniform over the legal targets, plus "none" when passing is allowed.
fn pick(rng: &mut ChaCha8Rng, obs: &Observation) -> Option<Seat> {
    let mut options: Vec<Option<Seat>> = obs.legal_targets.iter().map(|s| Some(*s)).collect();
    if obs.may_pass || options.is_empty() {
        options.push(None);
    }
    *options.choose(rng).expect("options never empty")
}

/// True public facts the observer could cite.
fn true_claims(obs: &Observation) -> Vec<Claim> {
    let mut claims = Vec::new();
    let mut final_ballots: BTreeMap<u32, &BTreeMap<Seat, Option<Seat>>> = BTreeMap::new();
    for event in &obs.public_history {
        match event {
            PublicEvent::Dawn { round, deaths } if deaths.is_empty() => {
                claims.push(Claim::Peaceful { round: *round })
            }
            PublicEvent::Dawn { round, deaths } => claims.extend(deaths.iter().map(|s| Claim::Died {
                round: *round,
                seat: *s,
            })),
            PublicEvent::VotedOut { round, seat } => claims.push(Claim::VotedOut {
                round: *round,
                seat: *seat,
            }),
            PublicEvent::Ballot { round, votes, .. } => {
                final_ballots.insert(*round, votes);
            }
            PublicEvent::HunterShot {
                round,
                shooter,
                target,
            } => claims.push(Claim::Shot {
                round: *round,
                shooter: *shooter,
                target: *target,
            }),
            _ => {}
        }
    }
    for (round, votes) in final_ballots {
        for (voter, target) in votes {
            claims.push(Claim::Voted {
                round,
                voter: *voter,
                target: *target,
            });
        }
    }
    claims
}

fn speech(identity: &str, tags: BTreeMap<Seat, String>, intent: Option<Seat>, claims: Vec<Claim>) -> Action {
    let text = match intent {
        Some(t) => format!("I am a {identity}. Player {t} is my suspect today."),
        None => format!("I am a {identity}. I have nothing to add yet."),
    };
    Action::Speech(SpeechPayload {
        identity_to_present: identity.to_string(),
        identity_tags: tags,
        vote_intent: intent,
        text,
        claims,
    })
}

fn night(target: Option<Seat>) -> Action {
    Action::Night(NightAction {
        target,
        save: false,
        reason: String::new(),
    })
}

fn vote(target: Option<Seat>) -> Action {
    Action::Vote(VotePayload {
        notes: String::new(),
        reason: String::new(),
        target,
    })
}

/// Draws every choice uniformly from the legal options with a per-seat seeded stream.
#[derive(Debug, Clone)]
pub struct RandomLegal {
    rng: ChaCha8Rng,
    guesses: ChaCha8Rng,
}

impl RandomLegal {
    pub fn new(seed: u64, seat: Seat) -> RandomLegal {
        RandomLegal {
            rng: seat_rng(seed, seat),
            guesses: seat_rng(seed ^ 0x9e37_79b9_7f4a_7c15, seat),
        }
    }

    pub fn act(&mut self, obs: &Observation) -> Action {
        let rng = &mut self.rng;
        match obs.stage {
            Stage::NightAction => match &obs.witch {
                Some(w) => {
                    let mut kinds = vec![0u8];
                    if w.can_save {
                        kinds.push(1);
                    }
                    if w.can_poison && !obs.legal_targets.is_empty() {
                        kinds.push(2);
                    }
                    match kinds.choose(rng).copied().unwrap_or(0) {
                        1 => Action::Night(NightAction {
                            target: None,
                            save: true,
                            reason: String::new(),
                        }),
                        2 => {
                            let targets: Vec<Seat> = obs.legal_targets.iter().copied().collect();
                            night(targets.choose(rng).copied())
                        }
                        _ => night(None),
                    }
                }
                None => night(pick(rng, obs)),
            },
            Stage::Speech => {
                let identities = [obs.role.name(), "Villager", "Seer"];
                let identity = *identities.choose(rng).expect("non-empty");
                let labels = ["Werewolf", "Villager", "Unknown"];
                let mut tags = BTreeMap::new();
                for s in 1..=obs.seats {
                    if s != obs.seat.0 && rng.random_bool(0.3) {
                        tags.insert(Seat(s), labels.choose(rng).expect("non-empty").to_string());
                    }
                }
                let intent = pick(rng, obs);
                let mut claims = Vec::new();
                let facts = true_claims(obs);
                if rng.random_bool(0.5) {
                    if let Some(c) = facts.choose(rng) {
                        claims.push(c.clone());
                    }
                }
                if obs.round > 1 && rng.random_bool(0.15) {
                    let alive: Vec<Seat> = obs.alive.iter().copied().collect();
                    if let Some(s) = alive.choose(rng) {
                        claims.push(Claim::Died {
                            round: obs.round - 1,
                            seat: *s,
                        });
                    }
                }
                speech(identity, tags, intent, claims)
            }
            Stage::Vote => vote(pick(rng, obs)),
            Stage::HunterShot => Action::HunterShot(HunterAction {
                target: pick(rng, obs),
                reason: String::new(),
            }),
            Stage::RolePrediction => {
                let pool = obs.variant.composition();
                let map = (1..=obs.seats)
                    .map(Seat)
                    .map(|s| {
                        let role = if s == obs.seat {
                            obs.role
                        } else if obs.teammates.contains(&s) {
                            Role::Werewolf
                        } else {
                            *pool.choose(&mut self.guesses).expect("non-empty composition")
                        };
                        (s, role)
                    })
                    .collect();
                Action::RolePrediction(map)
            }
        }
    }
}

impl Agent for RandomLegal {
    fn decide(&mut self, obs: &Observation) -> Decision {
        Decision::scripted(self.act(obs))
    }
}

/// Test oracle that is handed the true roles at construction and plays them perfectly.
#[derive(Debug, Clone)]
pub struct InformedVillager {
    truth: BTreeMap<Seat, Role>,
}

impl InformedVillager {
    pub fn new(truth: BTreeMap<Seat, Role>, _seed: u64, _seat: Seat) -> InformedVillager {
        InformedVillager { truth }
    }

    fn is_wolf(&self, s: Seat) -> bool {
        self.truth.get(&s).is_some_and(|r| r.is_wolf())
    }

    fn is_special(&self, s: Seat) -> bool {
        self.truth.get(&s).is_some_and(|r| r.is_special())
    }

    fn lowest_wolf_in(&self, set: &BTreeSet<Seat>) -> Option<Seat> {
        set.iter().copied().find(|s| self.is_wolf(*s))
    }

    fn wolf_side_target(&self, obs: &Observation) -> Option<Seat> {
        let village = || obs.legal_targets.iter().copied().filter(|s| !self.is_wolf(*s));
        village()
            .find(|s| self.is_special(*s))
            .or_else(|| village().next())
    }

    pub fn act(&self, obs: &Observation) -> Action {
        let wolf = obs.role.is_wolf();
        match obs.stage {
            Stage::NightAction => match obs.role {
                Role::Werewolf => night(self.wolf_side_target(obs)),
                Role::Seer => {
                    let checked: BTreeSet<Seat> = obs
                        .private_history
                        .iter()
                        .filter_map(|e| match e {
                            PrivateEvent::SeerCheck { target, .. } => Some(*target),
                            _ => None,
                        })
                        .collect();
                    let unchecked: BTreeSet<Seat> =
                        obs.legal_targets.difference(&checked).copied().collect();
                    night(
                        self.lowest_wolf_in(&unchecked)
                            .or_else(|| unchecked.iter().next().copied()),
                    )
                }
                Role::Witch => {
                    let w = obs.witch.clone().unwrap_or(super::WitchView {
                        victim: None,
                        can_save: false,
                        can_poison: false,
                    });
                    let victim_is_village = w.victim.is_some_and(|v| !self.is_wolf(v));
                    if w.can_save && victim_is_village {
                        Action::Night(NightAction {
                            target: None,
                            save: true,
                            reason: String::new(),
                        })
                    } else if w.can_poison {
                        night(self.lowest_wolf_in(&obs.legal_targets))
                    } else {
                        night(None)
                    }
                }
                Role::Guard => night(
                    obs.legal_targets
                        .iter()
                        .copied()
                        .find(|s| self.is_special(*s)),
                ),
                _ => night(None),
            },
            Stage::Speech => {
                let tags = self
                    .truth
                    .iter()
                    .filter(|(s, _)| **s != obs.seat)
                    .map(|(s, r)| (*s, r.name().to_string()))
                    .collect();
                let intent = if wolf {
                    self.wolf_side_target(obs)
                } else {
                    self.lowest_wolf_in(&obs.alive)
                };
                let identity = if wolf { "Villager" } else { obs.role.name() };
                speech(identity, tags, intent, true_claims(obs))
            }
            Stage::Vote => {
                if wolf {
                    vote(self.wolf_side_target(obs))
                } else {
                    vote(self.lowest_wolf_in(&obs.legal_targets))
                }
            }
            Stage::HunterShot => Action::HunterShot(HunterAction {
                target: self.lowest_wolf_in(&obs.legal_targets),
                reason: String::new(),
            }),
            Stage::RolePrediction => Action::RolePrediction(self.truth.clone()),
        }
    }
}

impl Agent for InformedVillager {
    fn decide(&mut self, obs: &Observation) -> Decision {
        Decision::scripted(self.act(obs))
    }
}

/// Wolf baseline: attacks and votes out claimed special roles first, then the
/// lowest-numbered villager. On a village seat it plays like [`RandomLegal`].
#[derive(Debug, Clone)]
pub struct GreedyWolf {
    fallback: RandomLegal,
}

const SPECIAL_CLAIMS: [&str; 8] = ["seer", "witch", "guard", "hunter", "预言家", "女巫", "守卫", "猎人"];

impl GreedyWolf {
    pub fn new(seed: u64, seat: Seat) -> GreedyWolf {
        GreedyWolf {
            fallback: RandomLegal::new(seed, seat),
        }
    }

    fn target(obs: &Observation) -> Option<Seat> {
        let villagers = || {
            obs.legal_targets
                .iter()
                .copied()
                .filter(|s| *s != obs.seat && !obs.teammates.contains(s))
        };
        let claimed: BTreeSet<Seat> = obs
            .public_history
            .iter()
            .filter_map(|e| match e {
                PublicEvent::Speech { seat, payload, .. } => {
                    let claim = payload.identity_to_present.to_lowercase();
                    SPECIAL_CLAIMS
                        .iter()
                        .any(|k| claim.contains(k))
                        .then_some(*seat)
                }
                _ => None,
            })
            .collect();
        villagers()
            .find(|s| claimed.contains(s))
            .or_else(|| villagers().next())
    }

    pub fn act(&mut self, obs: &Observation) -> Action {
        if !obs.role.is_wolf() {
            return self.fallback.act(obs);
        }
        match obs.stage {
            Stage::NightAction => night(Self::target(obs)),
            Stage::Speech => speech("Villager", BTreeMap::new(), Self::target(obs), Vec::new()),
            Stage::Vote => vote(Self::target(obs)),
            Stage::HunterShot => Action::HunterShot(HunterAction::default()),
            Stage::RolePrediction => Action::RolePrediction(
                (1..=obs.seats)
                    .map(Seat)
                    .map(|s| {
                        let role = if s == obs.seat || obs.teammates.contains(&s) {
                            Role::Werewolf
                        } else {
                            Role::SimpleVillager
                        };
                        (s, role)
                    })
                    .collect(),
            ),
        }
    }
}

impl Agent for GreedyWolf {
    fn decide(&mut self, obs: &Observation) -> Decision {
        Decision::scripted(self.act(obs))
    }
}
