use std::collections::BTreeSet;

use super::log::GameLog;
use super::state::ROUND_CAP;
use super::types::{GameEvent, Role, Seat, Winner};

fn dead_act(what: &str, seat: Seat, alive: &BTreeSet<Seat>, problems: &mut Vec<String>) {
    if !alive.contains(&seat) {
        problems.push(format!("{what} by or on dead seat {seat}"));
    }
}

fn win_condition(log: &GameLog, alive: &BTreeSet<Seat>) -> Option<Winner> {
    let role = |s: &Seat| log.roles[s];
    if !alive.iter().any(|s| role(s).is_wolf()) {
        return Some(Winner::Village);
    }
    let simple = alive.iter().any(|s| role(s) == Role::SimpleVillager);
    let special = alive.iter().any(|s| role(s).is_special());
    (!simple || !special).then_some(Winner::Wolf)
}

/// Checks the structural invariants of a log straight from its event stream,
/// independently of the state machine: seat conservation, one use per potion,
/// no consecutive guard target, a single terminal verdict that matches the
/// survivors, and termination within the round cap.
pub fn audit(log: &GameLog) -> Result<(), Vec<String>> {
    let mut problems = Vec::new();
    let seats = log.setup.seats();
    if log.roles.len() != usize::from(seats) {
        return Err(vec![format!("{} roles for {seats} seats", log.roles.len())]);
    }
    let mut alive: BTreeSet<Seat> = log.roles.keys().copied().collect();
    let mut saves = 0;
    let mut poisons = 0;
    let mut last_guard: Option<(u32, Seat)> = None;
    let mut ended = None;
    for (i, event) in log.events.iter().enumerate() {
        if ended.is_some() {
            problems.push(format!("event {i} after the game ended"));
        }
        match event {
            GameEvent::NightSubmitted { round, packet } => {
                for (wolf, target) in &packet.wolf_proposals {
                    dead_act("wolf proposal", *wolf, &alive, &mut problems);
                    if let Some(t) = target {
                        dead_act("wolf proposal", *t, &alive, &mut problems);
                    }
                }
                if packet.witch_save && packet.witch_poison.is_some() {
                    problems.push(format!("night {round}: both potions used"));
                }
                saves += usize::from(packet.witch_save);
                poisons += usize::from(packet.witch_poison.is_some());
                if let Some(g) = packet.guard_target {
                    dead_act("guard protection", g, &alive, &mut problems);
                    if last_guard == Some((round - 1, g)) {
                        problems.push(format!("night {round}: seat {g} guarded twice in a row"));
                    }
                }
                last_guard = packet.guard_target.map(|g| (*round, g));
            }
            GameEvent::Speech { seat, .. } => dead_act("speech", *seat, &alive, &mut problems),
            GameEvent::Ballot { votes, .. } => {
                for (voter, target) in votes {
                    dead_act("vote", *voter, &alive, &mut problems);
                    if let Some(t) = target {
                        dead_act("vote", *t, &alive, &mut problems);
                    }
                }
            }
            GameEvent::HunterShot { shooter, target, .. } => {
                if log.roles.get(shooter) != Some(&Role::Hunter) {
                    problems.push(format!("seat {shooter} shot without being the hunter"));
                }
                if let Some(t) = target {
                    dead_act("hunter shot", *t, &alive, &mut problems);
                }
            }
            GameEvent::Eliminated { seat, .. } => {
                if !alive.remove(seat) {
                    problems.push(format!("seat {seat} eliminated twice"));
                } else if i + 1 < log.events.len() && win_condition(log, &alive).is_some() {
                    let next_ends = matches!(
                        log.events[i + 1],
                        GameEvent::GameEnded { .. } | GameEvent::Eliminated { .. }
                    );
                    if !next_ends {
                        problems.push(format!("win condition met at event {i} but play continued"));
                    }
                }
            }
            GameEvent::GameEnded { round, winner } => {
                let expected = win_condition(log, &alive)
                    .or((*round >= ROUND_CAP).then_some(Winner::Draw));
                if expected != Some(*winner) {
                    problems.push(format!("declared {winner}, survivors give {expected:?}"));
                }
                ended = Some(*winner);
            }
            GameEvent::RolesDealt { .. }
            | GameEvent::WitchInformed { .. }
            | GameEvent::SeerResult { .. }
            | GameEvent::NightResolved { .. } => {}
        }
    }
    if saves > 1 || poisons > 1 {
        problems.push(format!("{saves} antidotes and {poisons} poisons used"));
    }
    if ended != log.winner {
        problems.push(format!("log winner {:?}, terminal event {ended:?}", log.winner));
    }
    if log.rounds() > ROUND_CAP {
        problems.push(format!("{} rounds exceeds the cap", log.rounds()));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}
