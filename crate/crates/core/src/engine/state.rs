use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::types::*;
use crate::agents::SpeechPayload;

/// Matches that reach this round without a winner end in a draw.
pub const ROUND_CAP: u32 = 20;

/// Authoritative hidden-information state of one match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    setup: Setup,
    round: u32,
    phase: Phase,
    alive: BTreeSet<Seat>,
    roles: Vec<Role>,
    antidote_used: bool,
    poison_used: bool,
    guard_last_target: Option<Seat>,
    day_start_seat: Seat,
    events: Vec<GameEvent>,
    day_order: Vec<Seat>,
    speech_queue: VecDeque<Seat>,
    revote_candidates: Option<BTreeSet<Seat>>,
    pending_hunter: Option<Seat>,
}

/// What may be chosen at night by one seat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NightOptions {
    pub targets: BTreeSet<Seat>,
    pub may_pass: bool,
    /// Witch only: whether the antidote is still available.
    pub antidote_available: bool,
    /// Witch only: whether the poison is still available.
    pub poison_available: bool,
}

/// Plurality over non-empty proposals; ties go to the tied target proposed by
/// the lowest-numbered wolf.
pub fn consensus_victim(proposals: &BTreeMap<Seat, Option<Seat>>) -> Option<Seat> {
    let mut counts: BTreeMap<Seat, usize> = BTreeMap::new();
    for target in proposals.values().flatten() {
        *counts.entry(*target).or_default() += 1;
    }
    let best = *counts.values().max()?;
    let tied: BTreeSet<Seat> = counts
        .iter()
        .filter(|(_, c)| **c == best)
        .map(|(s, _)| *s)
        .collect();
    // BTreeMap iterates wolves in seat order.
    proposals
        .values()
        .flatten()
        .find(|t| tied.contains(t))
        .copied()
}

impl GameState {
    /// Deals roles and opens night 1.
    pub fn new_game(setup: Setup) -> Result<GameState, EngineError> {
        let n = setup.seats();
        let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
        let mut composition = setup.variant.composition();
        let roles: Vec<Role> = match &setup.explicit_roles {
            Some(explicit) => {
                if explicit.len() != usize::from(n)
                    || explicit.keys().any(|s| s.0 == 0 || s.0 > n)
                {
                    return Err(EngineError::InvalidSetup(format!(
                        "explicit roles must cover seats 1..={n} exactly"
                    )));
                }
                let mut given: Vec<Role> = explicit.values().copied().collect();
                given.sort();
                composition.sort();
                if given != composition {
                    return Err(EngineError::InvalidSetup(format!(
                        "explicit roles do not match the {} composition",
                        setup.variant
                    )));
                }
                explicit.values().copied().collect()
            }
            None => {
                composition.shuffle(&mut rng);
                composition
            }
        };
        let drawn_start = Seat(rng.random_range(1..=n));
        let day_start_seat = match setup.explicit_day_start {
            Some(s) if s.0 >= 1 && s.0 <= n => s,
            Some(s) => {
                return Err(EngineError::InvalidSetup(format!(
                    "day start seat {s} outside 1..={n}"
                )))
            }
            None => drawn_start,
        };
        let role_map = roles
            .iter()
            .enumerate()
            .map(|(i, r)| (Seat(i as u8 + 1), *r))
            .collect();
        Ok(GameState {
            setup,
            round: 1,
            phase: Phase::NightActions,
            alive: (1..=n).map(Seat).collect(),
            roles,
            antidote_used: false,
            poison_used: false,
            guard_last_target: None,
            day_start_seat,
            events: vec![GameEvent::RolesDealt {
                roles: role_map,
                day_start_seat,
            }],
            day_order: Vec::new(),
            speech_queue: VecDeque::new(),
            revote_candidates: None,
            pending_hunter: None,
        })
    }

    pub fn setup(&self) -> &Setup {
        &self.setup
    }

    pub fn seats(&self) -> u8 {
        self.setup.seats()
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn alive(&self) -> &BTreeSet<Seat> {
        &self.alive
    }

    pub fn is_alive(&self, seat: Seat) -> bool {
        self.alive.contains(&seat)
    }

    pub fn role(&self, seat: Seat) -> Role {
        self.roles[seat.index()]
    }

    pub fn roles(&self) -> BTreeMap<Seat, Role> {
        self.all_seats().map(|s| (s, self.role(s))).collect()
    }

    pub fn all_seats(&self) -> impl Iterator<Item = Seat> {
        (1..=self.seats()).map(Seat)
    }

    pub fn seat_of(&self, role: Role) -> Option<Seat> {
        self.all_seats().find(|s| self.role(*s) == role)
    }

    pub fn living_with_role(&self, role: Role) -> Option<Seat> {
        self.seat_of(role).filter(|s| self.is_alive(*s))
    }

    pub fn wolves(&self) -> BTreeSet<Seat> {
        self.all_seats().filter(|s| self.role(*s).is_wolf()).collect()
    }

    pub fn living_wolves(&self) -> BTreeSet<Seat> {
        self.alive
            .iter()
            .copied()
            .filter(|s| self.role(*s).is_wolf())
            .collect()
    }

    pub fn antidote_used(&self) -> bool {
        self.antidote_used
    }

    pub fn poison_used(&self) -> bool {
        self.poison_used
    }

    pub fn guard_last_target(&self) -> Option<Seat> {
        self.guard_last_target
    }

    pub fn day_start_seat(&self) -> Seat {
        self.day_start_seat
    }

    pub fn events(&self) -> &[GameEvent] {
        &self.events
    }

    pub fn winner(&self) -> Option<Winner> {
        match self.phase {
            Phase::Terminal { winner } => Some(winner),
            _ => None,
        }
    }

    /// The speaking order fixed when the current day opened.
    pub fn day_order(&self) -> &[Seat] {
        &self.day_order
    }

    pub fn next_speaker(&self) -> Option<Seat> {
        match self.phase {
            Phase::DaySpeech => self.speech_queue.front().copied(),
            _ => None,
        }
    }

    pub fn revote_candidates(&self) -> Option<&BTreeSet<Seat>> {
        self.revote_candidates.as_ref()
    }

    pub fn pending_hunter(&self) -> Option<Seat> {
        self.pending_hunter
    }

    fn check_seat(&self, seat: Seat) -> Result<(), EngineError> {
        if seat.0 == 0 || seat.0 > self.seats() {
            return Err(EngineError::illegal(seat, Rule::SeatRange));
        }
        Ok(())
    }

    fn require_alive_target(&self, actor: Seat, target: Seat) -> Result<(), EngineError> {
        self.check_seat(target)
            .map_err(|_| EngineError::illegal(actor, Rule::SeatRange))?;
        if !self.is_alive(target) {
            return Err(EngineError::illegal(actor, Rule::TargetAlive));
        }
        Ok(())
    }

    /// Night choices available to `seat`; `None` when the seat has no night action.
    pub fn night_options(&self, seat: Seat) -> Option<NightOptions> {
        if !self.is_alive(seat) || self.phase != Phase::NightActions {
            return None;
        }
        let alive = self.alive.clone();
        let opts = |targets: BTreeSet<Seat>| NightOptions {
            targets,
            may_pass: true,
            antidote_available: false,
            poison_available: false,
        };
        match self.role(seat) {
            Role::Werewolf => Some(opts(alive)),
            Role::Seer => Some(opts(alive.into_iter().filter(|s| *s != seat).collect())),
            Role::Guard => Some(opts(
                alive
                    .into_iter()
                    .filter(|s| Some(*s) != self.guard_last_target)
                    .collect(),
            )),
            Role::Witch => {
                let targets = if self.poison_used {
                    BTreeSet::new()
                } else {
                    alive.into_iter().filter(|s| *s != seat).collect()
                };
                Some(NightOptions {
                    targets,
                    may_pass: true,
                    antidote_available: !self.antidote_used,
                    poison_available: !self.poison_used,
                })
            }
            Role::SimpleVillager | Role::Hunter => None,
        }
    }

    /// Living seats that act at night, in seat order.
    pub fn night_actors(&self) -> Vec<Seat> {
        self.alive
            .iter()
            .copied()
            .filter(|s| self.role(*s).has_night_action())
            .collect()
    }

    fn validate_packet(&self, packet: &NightPacket) -> Result<Option<Seat>, EngineError> {
        for (&wolf, target) in &packet.wolf_proposals {
            self.check_seat(wolf)?;
            if !self.role(wolf).is_wolf() {
                return Err(EngineError::illegal(wolf, Rule::NotAWolf));
            }
            if !self.is_alive(wolf) {
                return Err(EngineError::illegal(wolf, Rule::DeadActor));
            }
            if let Some(t) = target {
                self.require_alive_target(wolf, *t)?;
            }
        }
        if let Some(target) = packet.guard_target {
            let guard = self
                .living_with_role(Role::Guard)
                .ok_or_else(|| EngineError::illegal(None, Rule::RoleAbsent))?;
            self.require_alive_target(guard, target)?;
            if Some(target) == self.guard_last_target {
                return Err(EngineError::illegal(guard, Rule::ConsecutiveGuard));
            }
        }
        if let Some(target) = packet.seer_target {
            let seer = self
                .living_with_role(Role::Seer)
                .ok_or_else(|| EngineError::illegal(None, Rule::RoleAbsent))?;
            self.require_alive_target(seer, target)?;
            if target == seer {
                return Err(EngineError::illegal(seer, Rule::SeerSelfCheck));
            }
        }
        let victim = consensus_victim(&packet.wolf_proposals);
        if packet.witch_save || packet.witch_poison.is_some() {
            let witch = self
                .living_with_role(Role::Witch)
                .ok_or_else(|| EngineError::illegal(None, Rule::RoleAbsent))?;
            if packet.witch_save && packet.witch_poison.is_some() {
                return Err(EngineError::illegal(witch, Rule::DoublePotion));
            }
            if packet.witch_save {
                if self.antidote_used {
                    return Err(EngineError::illegal(witch, Rule::AntidoteUsed));
                }
                if victim.is_none() {
                    return Err(EngineError::illegal(witch, Rule::NoVictim));
                }
            }
            if let Some(target) = packet.witch_poison {
                if self.poison_used {
                    return Err(EngineError::illegal(witch, Rule::PoisonUsed));
                }
                self.require_alive_target(witch, target)?;
                if target == witch {
                    return Err(EngineError::illegal(witch, Rule::WitchSelfPoison));
                }
            }
        }
        Ok(victim)
    }

    /// Applies one night's decisions and announces the deaths.
    pub fn resolve_night(&mut self, packet: NightPacket) -> Result<BTreeSet<Seat>, EngineError> {
        if self.phase != Phase::NightActions {
            return Err(EngineError::illegal(None, Rule::WrongPhase));
        }
        let victim = self.validate_packet(&packet)?;
        let round = self.round;
        self.events.push(GameEvent::NightSubmitted {
            round,
            packet: packet.clone(),
        });
        if self.living_with_role(Role::Witch).is_some() {
            self.events.push(GameEvent::WitchInformed { round, victim });
        }
        if let (Some(target), Some(seer)) = (packet.seer_target, self.living_with_role(Role::Seer))
        {
            self.events.push(GameEvent::SeerResult {
                round,
                seer,
                target,
                is_wolf: self.role(target).is_wolf(),
            });
        }

        let mut deaths: BTreeMap<Seat, DeathCause> = BTreeMap::new();
        if let Some(v) = victim {
            let guarded = packet.guard_target == Some(v);
            if !guarded && !packet.witch_save {
                deaths.insert(v, DeathCause::WolfKill);
            }
        }
        if let Some(p) = packet.witch_poison {
            deaths.insert(p, DeathCause::Poison);
        }

        if packet.witch_save {
            self.antidote_used = true;
        }
        if packet.witch_poison.is_some() {
            self.poison_used = true;
        }
        self.guard_last_target = packet.guard_target;

        let death_set: BTreeSet<Seat> = deaths.keys().copied().collect();
        self.events.push(GameEvent::NightResolved {
            round,
            deaths: death_set.clone(),
        });
        let mut hunter_window = None;
        for (&seat, &cause) in &deaths {
            self.alive.remove(&seat);
            self.events.push(GameEvent::Eliminated { round, seat, cause });
            if self.role(seat) == Role::Hunter && cause == DeathCause::WolfKill {
                hunter_window = Some(seat);
            }
        }
        if self.finish_if_won() {
            return Ok(death_set);
        }
        match hunter_window {
            Some(hunter) => {
                self.pending_hunter = Some(hunter);
                self.phase = Phase::HunterWindow {
                    cause: DeathCause::WolfKill,
                };
            }
            None => self.open_day(),
        }
        Ok(death_set)
    }

    /// Clockwise order over living seats, starting one seat later each day.
    pub fn speaking_order(&self) -> Vec<Seat> {
        let n = u32::from(self.seats());
        let base = ((u32::from(self.day_start_seat.0) + self.round + n * 2 - 2) % n) + 1;
        (0..n)
            .map(|k| Seat((((base - 1 + k) % n) + 1) as u8))
            .filter(|s| self.is_alive(*s))
            .collect()
    }

    fn open_day(&mut self) {
        self.day_order = self.speaking_order();
        self.speech_queue = self.day_order.iter().copied().collect();
        self.revote_candidates = None;
        self.phase = if self.speech_queue.is_empty() {
            Phase::DayVote { ballot_index: 0 }
        } else {
            Phase::DaySpeech
        };
    }

    /// Records the next speaker's statement.
    pub fn submit_speech(&mut self, seat: Seat, payload: SpeechPayload) -> Result<(), EngineError> {
        if self.phase != Phase::DaySpeech {
            return Err(EngineError::illegal(seat, Rule::WrongPhase));
        }
        if self.speech_queue.front() != Some(&seat) {
            return Err(EngineError::illegal(seat, Rule::NotYourTurn));
        }
        if payload
            .identity_tags
            .keys()
            .any(|s| s.0 == 0 || s.0 > self.seats())
        {
            return Err(EngineError::illegal(seat, Rule::TagSeatRange));
        }
        if let Some(intent) = payload.vote_intent {
            self.require_alive_target(seat, intent)?;
        }
        self.speech_queue.pop_front();
        self.events.push(GameEvent::Speech {
            round: self.round,
            seat,
            payload,
        });
        if self.speech_queue.is_empty() {
            self.phase = Phase::DayVote { ballot_index: 0 };
        }
        Ok(())
    }

    /// Legal ballot targets for `voter` in the current ballot.
    pub fn vote_targets(&self, voter: Seat) -> BTreeSet<Seat> {
        let pool = self.revote_candidates.as_ref().unwrap_or(&self.alive);
        pool.iter()
            .copied()
            .filter(|s| *s != voter && self.is_alive(*s))
            .collect()
    }

    fn normalize_ballots(
        &self,
        ballots: &BTreeMap<Seat, Option<Seat>>,
    ) -> Result<BTreeMap<Seat, Option<Seat>>, EngineError> {
        for (&voter, target) in ballots {
            if voter.0 == 0 || voter.0 > self.seats() {
                return Err(EngineError::IllegalVote {
                    voter,
                    rule: Rule::SeatRange,
                });
            }
            if !self.is_alive(voter) {
                return Err(EngineError::IllegalVote {
                    voter,
                    rule: Rule::DeadActor,
                });
            }
            if let Some(t) = *target {
                if t.0 == 0 || t.0 > self.seats() || !self.is_alive(t) {
                    return Err(EngineError::IllegalVote {
                        voter,
                        rule: Rule::TargetAlive,
                    });
                }
                if t == voter {
                    return Err(EngineError::IllegalVote {
                        voter,
                        rule: Rule::SelfVote,
                    });
                }
                if let Some(c) = &self.revote_candidates {
                    if !c.contains(&t) {
                        return Err(EngineError::IllegalVote {
                            voter,
                            rule: Rule::NotACandidate,
                        });
                    }
                }
            }
        }
        Ok(self
            .alive
            .iter()
            .map(|s| (*s, ballots.get(s).copied().flatten()))
            .collect())
    }

    /// Counts one ballot without changing the state.
    pub fn tally_votes(
        &self,
        ballots: &BTreeMap<Seat, Option<Seat>>,
    ) -> Result<VoteOutcome, EngineError> {
        let ballot_index = match self.phase {
            Phase::DayVote { ballot_index } => ballot_index,
            _ => {
                return Err(EngineError::illegal(None, Rule::WrongPhase));
            }
        };
        let votes = self.normalize_ballots(ballots)?;
        Ok(tally(&votes, ballot_index))
    }

    /// Counts a ballot and applies its outcome.
    pub fn apply_ballot(
        &mut self,
        ballots: &BTreeMap<Seat, Option<Seat>>,
    ) -> Result<VoteOutcome, EngineError> {
        let ballot_index = match self.phase {
            Phase::DayVote { ballot_index } => ballot_index,
            _ => return Err(EngineError::illegal(None, Rule::WrongPhase)),
        };
        let votes = self.normalize_ballots(ballots)?;
        let outcome = tally(&votes, ballot_index);
        self.events.push(GameEvent::Ballot {
            round: self.round,
            ballot_index,
            votes,
        });
        if let Some(seat) = outcome.eliminated {
            self.revote_candidates = None;
            self.apply_elimination(seat, DeathCause::Vote)?;
        } else if let Some(tied) = &outcome.revote_among {
            self.revote_candidates = Some(tied.clone());
            self.phase = Phase::DayVote { ballot_index: 1 };
        } else {
            self.revote_candidates = None;
            self.end_day();
        }
        Ok(outcome)
    }

    /// Removes a seat from play and opens the hunter window where the rules grant one.
    pub fn apply_elimination(&mut self, seat: Seat, cause: DeathCause) -> Result<(), EngineError> {
        self.check_seat(seat)?;
        if !self.is_alive(seat) {
            return Err(EngineError::illegal(seat, Rule::TargetAlive));
        }
        self.alive.remove(&seat);
        self.events.push(GameEvent::Eliminated {
            round: self.round,
            seat,
            cause,
        });
        if self.finish_if_won() {
            return Ok(());
        }
        if self.role(seat) == Role::Hunter
            && matches!(cause, DeathCause::WolfKill | DeathCause::Vote)
        {
            self.pending_hunter = Some(seat);
            self.phase = Phase::HunterWindow { cause };
            return Ok(());
        }
        match cause {
            DeathCause::Vote => self.end_day(),
            DeathCause::WolfKill | DeathCause::Poison => {
                if self.phase == Phase::NightActions {
                    self.open_day();
                }
            }
            DeathCause::HunterShot => {}
        }
        Ok(())
    }

    /// Resolves the pending hunter's revenge shot (or its refusal).
    pub fn hunter_shoot(&mut self, shooter: Seat, target: Option<Seat>) -> Result<(), EngineError> {
        let cause = match self.phase {
            Phase::HunterWindow { cause } => cause,
            _ => return Err(EngineError::illegal(shooter, Rule::WrongPhase)),
        };
        if self.pending_hunter != Some(shooter) {
            return Err(EngineError::illegal(shooter, Rule::NotPendingHunter));
        }
        if let Some(t) = target {
            self.require_alive_target(shooter, t)?;
        }
        self.pending_hunter = None;
        self.events.push(GameEvent::HunterShot {
            round: self.round,
            shooter,
            target,
        });
        if let Some(t) = target {
            self.alive.remove(&t);
            self.events.push(GameEvent::Eliminated {
                round: self.round,
                seat: t,
                cause: DeathCause::HunterShot,
            });
            if self.finish_if_won() {
                return Ok(());
            }
        }
        match cause {
            DeathCause::WolfKill => self.open_day(),
            _ => self.end_day(),
        }
        Ok(())
    }

    /// Current winner, if a faction has met its condition.
    pub fn check_win(&self) -> Option<Winner> {
        let wolves = self.alive.iter().any(|s| self.role(*s).is_wolf());
        if !wolves {
            return Some(Winner::Village);
        }
        let simple = self
            .alive
            .iter()
            .any(|s| self.role(*s) == Role::SimpleVillager);
        let special = self.alive.iter().any(|s| self.role(*s).is_special());
        if !simple || !special {
            return Some(Winner::Wolf);
        }
        None
    }

    fn finish_if_won(&mut self) -> bool {
        match self.check_win() {
            Some(winner) => {
                self.finish(winner);
                true
            }
            None => false,
        }
    }

    fn finish(&mut self, winner: Winner) {
        self.phase = Phase::Terminal { winner };
        self.pending_hunter = None;
        self.speech_queue.clear();
        self.events.push(GameEvent::GameEnded {
            round: self.round,
            winner,
        });
    }

    fn end_day(&mut self) {
        if self.round >= ROUND_CAP {
            self.finish(Winner::Draw);
            return;
        }
        self.round += 1;
        self.day_order.clear();
        self.phase = Phase::NightActions;
    }
}

fn tally(votes: &BTreeMap<Seat, Option<Seat>>, ballot_index: u8) -> VoteOutcome {
    let mut counts: BTreeMap<Seat, usize> = BTreeMap::new();
    for t in votes.values().flatten() {
        *counts.entry(*t).or_default() += 1;
    }
    let Some(&best) = counts.values().max() else {
        return VoteOutcome {
            eliminated: None,
            revote_among: None,
        };
    };
    let top: BTreeSet<Seat> = counts
        .iter()
        .filter(|(_, c)| **c == best)
        .map(|(s, _)| *s)
        .collect();
    if top.len() == 1 {
        VoteOutcome {
            eliminated: top.into_iter().next(),
            revote_among: None,
        }
    } else if ballot_index == 0 {
        VoteOutcome {
            eliminated: None,
            revote_among: Some(top),
        }
    } else {
        VoteOutcome {
            eliminated: None,
            revote_among: None,
        }
    }
}
