use std::collections::BTreeMap;

use super::{Criterion, PreferenceRecord, Walk};
use crate::agents::Stage;
use crate::engine::{consensus_victim, Faction, GameEvent, Role, Seat};

/// Night actions, hunter shots and final-ballot votes.
pub(crate) fn select(walk: &Walk<'_>) -> Vec<PreferenceRecord> {
    let mut out = Vec::new();
    let finals = walk.final_ballots();
    for (index, event) in walk.log.events.iter().enumerate() {
        match event {
            GameEvent::NightSubmitted { round, packet } => {
                let alive = &walk.alive_before[&index];
                let round = *round;
                let living = |role: Role| alive.iter().copied().find(|s| walk.role(*s) == role);
                for wolf in alive.iter().filter(|s| walk.role(**s).is_wolf()) {
                    let target = packet.wolf_proposals.get(wolf).copied().flatten();
                    let hit = match target {
                        None => Some(Criterion::WolfNoKill),
                        Some(t) if round >= 2 && walk.role(t).is_special() => {
                            Some(Criterion::WolfTargetsSpecial)
                        }
                        _ => None,
                    };
                    if let Some(c) = hit {
                        out.push(walk.record(*wolf, round, Stage::NightAction, 0, c));
                    }
                }
                if let (Some(seer), Some(t)) = (living(Role::Seer), packet.seer_target) {
                    if walk.role(t).is_wolf() {
                        out.push(walk.record(seer, round, Stage::NightAction, 0, Criterion::SeerFindsWolf));
                    }
                }
                if let Some(witch) = living(Role::Witch) {
                    let hit = if round == 1 {
                        match consensus_victim(&packet.wolf_proposals) {
                            Some(_) if packet.witch_save => Some(Criterion::WitchSavesNight1),
                            Some(_) => Some(Criterion::WitchNoSaveNight1),
                            None => None,
                        }
                    } else {
                        packet.witch_poison.map(|t| match walk.role(t).faction() {
                            Faction::Wolf => Criterion::WitchPoisonsWolf,
                            Faction::Village => Criterion::WitchPoisonsVillager,
                        })
                    };
                    if let Some(c) = hit {
                        out.push(walk.record(witch, round, Stage::NightAction, 0, c));
                    }
                }
                if let (Some(guard), Some(t)) = (living(Role::Guard), packet.guard_target) {
                    let hit = if walk.role(t).is_wolf() {
                        Some(Criterion::GuardProtectsWolf)
                    } else if round >= 2 && walk.role(t).is_special() {
                        Some(Criterion::GuardProtectsSpecial)
                    } else {
                        None
                    };
                    if let Some(c) = hit {
                        out.push(walk.record(guard, round, Stage::NightAction, 0, c));
                    }
                }
            }
            GameEvent::HunterShot {
                round,
                shooter,
                target: Some(t),
            } => {
                let hit = if walk.role(*t).is_wolf() {
                    Some(Criterion::HunterShootsWolf)
                } else if walk.role(*t).is_special() {
                    Some(Criterion::HunterShootsSpecial)
                } else {
                    None
                };
                if let Some(c) = hit {
                    out.push(walk.record(*shooter, *round, Stage::HunterShot, 0, c));
                }
            }
            GameEvent::Ballot { round, .. } if finals.get(round).map(|f| f.0) == Some(index) => {
                let (_, ballot_index, votes) = finals[round];
                let alive = &walk.alive_before[&index];
                let eliminated = walk.voted_out(*round);
                for voter in alive {
                    let target = votes.get(voter).copied().flatten();
                    if let Some(c) = vote_criterion(walk, alive, votes, *voter, target, eliminated) {
                        out.push(walk.record(*voter, *round, Stage::Vote, ballot_index, c));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Unacceptable rows are checked before desirable ones.
fn vote_criterion(
    walk: &Walk<'_>,
    alive: &std::collections::BTreeSet<Seat>,
    votes: &BTreeMap<Seat, Option<Seat>>,
    voter: Seat,
    target: Option<Seat>,
    eliminated: Option<Seat>,
) -> Option<Criterion> {
    let role = walk.role(voter);
    if role.faction() != Faction::Village {
        return None;
    }
    let Some(target) = target else {
        return Some(Criterion::Abstain);
    };
    let target_role = walk.role(target);
    if eliminated == Some(target) && target_role.faction() == Faction::Village {
        return Some(Criterion::VoteEliminatesVillager);
    }
    let seer = alive.iter().copied().find(|s| walk.role(*s) == Role::Seer);
    match seer {
        Some(seer) => {
            if let Some(Some(seer_target)) = votes.get(&seer) {
                if seer != voter && *seer_target != target {
                    return Some(Criterion::SplitFromSeer);
                }
            }
        }
        None => {
            if let Some(modal) = village_modal_target(walk, alive, votes) {
                if modal != target {
                    return Some(Criterion::SplitFromMajority);
                }
            }
        }
    }
    if target_role.is_wolf() {
        if eliminated == Some(target) {
            return Some(Criterion::VoteEliminatesWolf);
        }
        if role.is_special() {
            return Some(Criterion::SpecialVotesWolf);
        }
    }
    None
}

/// Most common non-abstain target among village-faction voters; `None` on a tie.
fn village_modal_target(
    walk: &Walk<'_>,
    alive: &std::collections::BTreeSet<Seat>,
    votes: &BTreeMap<Seat, Option<Seat>>,
) -> Option<Seat> {
    let mut counts: BTreeMap<Seat, usize> = BTreeMap::new();
    for voter in alive {
        if walk.role(*voter).faction() == Faction::Village {
            if let Some(Some(t)) = votes.get(voter) {
                *counts.entry(*t).or_default() += 1;
            }
        }
    }
    let top = counts.values().copied().max()?;
    let mut leaders = counts.iter().filter(|(_, c)| **c == top);
    let first = leaders.next().map(|(s, _)| *s);
    if leaders.next().is_some() {
        None
    } else {
        first
    }
}
