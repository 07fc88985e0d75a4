use serde::{Deserialize, Serialize};

use crate::engine::{Faction, GameEvent, GameLog, Role, Seat};

/// `hits / total` with both counts kept. Never built with `total == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate {
    pub hits: u32,
    pub total: u32,
}

impl Rate {
    pub fn value(&self) -> f64 {
        f64::from(self.hits) / f64::from(self.total)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counter {
    hits: u32,
    total: u32,
}

impl Counter {
    fn add(&mut self, hit: bool) {
        self.total += 1;
        self.hits += u32::from(hit);
    }

    fn rate(self) -> Option<Rate> {
        (self.total > 0).then_some(Rate {
            hits: self.hits,
            total: self.total,
        })
    }
}

/// Village-side play of the filtered participant.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VillageMetrics {
    pub vote_accuracy: Option<Rate>,
    pub abstention: Option<Rate>,
    /// Seer checks on night 2 that found a wolf.
    pub werewolf_check: Option<Rate>,
    pub save_night1: Option<Rate>,
    pub correct_poison: Option<Rate>,
    pub mispoison: Option<Rate>,
    pub protect_special: Option<Rate>,
    pub misprotect: Option<Rate>,
}

/// Village opponents' play in games where the participant held wolf seats.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OpponentMetrics {
    pub abstention: Option<Rate>,
    /// Seer checks on any night that found a wolf.
    pub seer_check: Option<Rate>,
    pub mispoison: Option<Rate>,
    pub misprotect: Option<Rate>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BehaviorReport {
    pub participant: Option<String>,
    pub games: usize,
    pub village: VillageMetrics,
    pub opponent: OpponentMetrics,
}

impl BehaviorReport {
    /// `(name, rate)` pairs in a fixed order, for tables.
    pub fn rows(&self) -> Vec<(&'static str, Option<Rate>)> {
        let v = &self.village;
        let o = &self.opponent;
        vec![
            ("vote_accuracy", v.vote_accuracy),
            ("abstention", v.abstention),
            ("werewolf_check", v.werewolf_check),
            ("save_night1", v.save_night1),
            ("correct_poison", v.correct_poison),
            ("mispoison", v.mispoison),
            ("protect_special", v.protect_special),
            ("misprotect", v.misprotect),
            ("opponent_abstention", o.abstention),
            ("opponent_seer_check", o.seer_check),
            ("opponent_mispoison", o.mispoison),
            ("opponent_misprotect", o.misprotect),
        ]
    }
}

#[derive(Default)]
struct Tallies {
    vote: Counter,
    abstain: Counter,
    check2: Counter,
    save1: Counter,
    poison_wolf: Counter,
    poison_village: Counter,
    protect_special: Counter,
    protect_wolf: Counter,
}

/// Accumulates village-side tallies for the seats `counts` accepts.
fn tally(log: &GameLog, counts: impl Fn(Seat) -> bool, t: &mut Tallies) {
    let role = |s: Seat| log.roles.get(&s).copied();
    let holder = |r: Role| log.roles.iter().find(|(_, x)| **x == r).map(|(s, _)| *s);
    let village = |s: Seat| role(s).is_some_and(|r| r.faction() == Faction::Village);
    let wolf = |s: Seat| role(s).is_some_and(Role::is_wolf);
    let special = |s: Seat| role(s).is_some_and(Role::is_special);
    let witch = holder(Role::Witch).filter(|s| counts(*s));
    let guard = holder(Role::Guard).filter(|s| counts(*s));
    for event in &log.events {
        match event {
            GameEvent::Ballot { votes, .. } => {
                for (voter, target) in votes {
                    if !village(*voter) || !counts(*voter) {
                        continue;
                    }
                    t.abstain.add(target.is_none());
                    if let Some(target) = target {
                        t.vote.add(wolf(*target));
                    }
                }
            }
            GameEvent::SeerResult {
                round: 2,
                seer,
                is_wolf,
                ..
            } if counts(*seer) => t.check2.add(*is_wolf),
            GameEvent::WitchInformed {
                round: 1,
                victim: Some(_),
            } => {
                if witch.is_some() {
                    let saved = log.events.iter().any(|e| {
                        matches!(e, GameEvent::NightSubmitted { round: 1, packet } if packet.witch_save)
                    });
                    t.save1.add(saved);
                }
            }
            GameEvent::NightSubmitted { packet, .. } => {
                if let (Some(_), Some(p)) = (witch, packet.witch_poison) {
                    t.poison_wolf.add(wolf(p));
                    t.poison_village.add(village(p));
                }
                if let (Some(_), Some(g)) = (guard, packet.guard_target) {
                    t.protect_special.add(special(g));
                    t.protect_wolf.add(wolf(g));
                }
            }
            _ => {}
        }
    }
}

fn owned(log: &GameLog, seat: Seat, participant: Option<&str>) -> bool {
    if log.degraded.contains(&seat) {
        return false;
    }
    match participant {
        None => true,
        Some(p) => log.participants.get(&seat).is_some_and(|x| x == p),
    }
}

/// Behavioral rates over logs; rates with empty denominators are `None`.
pub fn behavioral_metrics(logs: &[GameLog], participant: Option<&str>) -> BehaviorReport {
    let mut own = Tallies::default();
    let mut opp = Tallies::default();
    let mut opp_checks = Counter::default();
    for log in logs {
        tally(log, |s| owned(log, s, participant), &mut own);
        let wolf_side = log.roles.iter().any(|(s, r)| {
            r.is_wolf() && participant.is_none_or(|p| log.participants.get(s).is_some_and(|x| x == p))
        });
        if !wolf_side {
            continue;
        }
        let opponent = |s: Seat| {
            !log.degraded.contains(&s)
                && participant.is_none_or(|p| log.participants.get(&s).is_none_or(|x| x != p))
        };
        tally(log, opponent, &mut opp);
        for e in &log.events {
            if let GameEvent::SeerResult { seer, is_wolf, .. } = e {
                if opponent(*seer) {
                    opp_checks.add(*is_wolf);
                }
            }
        }
    }
    BehaviorReport {
        participant: participant.map(str::to_string),
        games: logs.len(),
        village: VillageMetrics {
            vote_accuracy: own.vote.rate(),
            abstention: own.abstain.rate(),
            werewolf_check: own.check2.rate(),
            save_night1: own.save1.rate(),
            correct_poison: own.poison_wolf.rate(),
            mispoison: own.poison_village.rate(),
            protect_special: own.protect_special.rate(),
            misprotect: own.protect_wolf.rate(),
        },
        opponent: OpponentMetrics {
            abstention: opp.abstain.rate(),
            seer_check: opp_checks.rate(),
            mispoison: opp.poison_village.rate(),
            misprotect: opp.protect_wolf.rate(),
        },
    }
}
