use super::{Criterion, PreferenceRecord, SelectionError, Walk};
use crate::agents::Stage;
use crate::engine::{Faction, GameEvent, Role};

#[derive(Debug, Clone, Copy, Default)]
struct Received {
    total: usize,
    village: usize,
    wolf: usize,
    /// Village-faction ballots that named somebody.
    village_cast: usize,
}

/// Labels each speech by the final ballot of its day.
pub(crate) fn select(walk: &Walk<'_>) -> Result<Vec<PreferenceRecord>, SelectionError> {
    let finals = walk.final_ballots();
    let mut out = Vec::new();
    for event in &walk.log.events {
        let GameEvent::Speech { round, seat, .. } = event else {
            continue;
        };
        let Some((_, _, votes)) = finals.get(round) else {
            return Err(SelectionError::MissingBallot {
                game_id: walk.log.game_id.clone(),
                round: *round,
            });
        };
        let mut r = Received::default();
        for (voter, target) in votes.iter() {
            let voter_faction = walk.role(*voter).faction();
            if voter_faction == Faction::Village && target.is_some() {
                r.village_cast += 1;
            }
            if *target == Some(*seat) {
                r.total += 1;
                match voter_faction {
                    Faction::Village => r.village += 1,
                    Faction::Wolf => r.wolf += 1,
                }
            }
        }
        let eliminated = walk.voted_out(*round) == Some(*seat);
        if let Some(c) = speech_criterion(walk.role(*seat), r, eliminated) {
            out.push(walk.record(*seat, *round, Stage::Speech, 0, c));
        }
    }
    Ok(out)
}

fn majority(part: usize, whole: usize) -> bool {
    whole > 0 && 2 * part > whole
}

fn speech_criterion(role: Role, r: Received, eliminated: bool) -> Option<Criterion> {
    use Criterion::*;
    if role.is_wolf() {
        return Some(if eliminated {
            WolfSpeechEliminated
        } else if majority(r.village, r.village_cast) {
            WolfSpeechMajority
        } else {
            WolfSpeechSurvives
        });
    }
    if role == Role::Witch && r.wolf >= 1 && r.village > 2 {
        return Some(WitchSpeechSuspected);
    }
    if role == Role::Seer && majority(r.village, r.village_cast) {
        return Some(SeerSpeechMajority);
    }
    if eliminated {
        return Some(VillagerSpeechEliminated);
    }
    if role == Role::Seer && r.village == 0 {
        return Some(SeerNoVillagerVotes);
    }
    (r.total == 0).then_some(VillagerNoVotes)
}
