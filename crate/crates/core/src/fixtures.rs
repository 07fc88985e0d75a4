//! Hand-built game logs used by tests, benches and the acceptance suite.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::agents::{Claim, SpeechPayload};
use crate::analytics::RatedGame;
use crate::arena::{simulate, AgentPlan, SimulationPlan};
use crate::engine::{GameLog, GameState, NightPacket, Role, Seat, Setup, SetupVariant, Winner};

const GOLDEN: &str = include_str!("../fixtures/golden_swg9.jsonl");

/// A fully annotated nine-seat game won by the village on day 3.
pub fn golden_game() -> GameLog {
    GameLog::from_line(GOLDEN.trim()).expect("golden fixture parses")
}

fn roles(layout: &[(u8, Role)]) -> BTreeMap<Seat, Role> {
    layout.iter().map(|(s, r)| (Seat(*s), *r)).collect()
}

fn speech(present: &str, intent: Option<u8>, text: &str, claims: Vec<Claim>) -> SpeechPayload {
    SpeechPayload {
        identity_to_present: present.into(),
        identity_tags: BTreeMap::new(),
        vote_intent: intent.map(Seat),
        text: text.into(),
        claims,
    }
}

fn ballots(pairs: &[(u8, Option<u8>)]) -> BTreeMap<Seat, Option<Seat>> {
    pairs.iter().map(|(v, t)| (Seat(*v), t.map(Seat))).collect()
}

fn table_roles() -> BTreeMap<Seat, Role> {
    use Role::*;
    roles(&[
        (1, Guard),
        (2, Werewolf),
        (3, Werewolf),
        (4, Seer),
        (5, SimpleVillager),
        (6, SimpleVillager),
        (7, Werewolf),
        (8, Witch),
        (9, SimpleVillager),
    ])
}

fn proposals(wolves: &[u8], target: u8) -> BTreeMap<Seat, Option<Seat>> {
    wolves.iter().map(|w| (Seat(*w), Some(Seat(target)))).collect()
}

fn silent_day(state: &mut GameState) {
    for seat in state.speaking_order() {
        state.submit_speech(seat, SpeechPayload::silent()).expect("legal speech");
    }
}

/// Two unfinished days with hand-countable village behavior: ten village
/// ballots (seven on wolves, one abstention), a night-1 victim the witch
/// leaves to the guard, one poison on a villager, one guard save on the seer
/// and one on a simple villager, and a night-2 seer check that finds a wolf.
pub fn behavior_fixture() -> GameLog {
    let mut setup = Setup::new(SetupVariant::Swg9, 21);
    setup.explicit_roles = Some(table_roles());
    setup.explicit_day_start = Some(Seat(1));
    let mut state = GameState::new_game(setup).expect("valid setup");
    state
        .resolve_night(NightPacket {
            guard_target: Some(Seat(5)),
            wolf_proposals: proposals(&[2, 3, 7], 5),
            seer_target: Some(Seat(8)),
            ..NightPacket::default()
        })
        .expect("legal night");
    silent_day(&mut state);
    state
        .apply_ballot(&ballots(&[
            (1, Some(2)),
            (2, Some(9)),
            (3, Some(9)),
            (4, Some(2)),
            (5, Some(2)),
            (6, Some(2)),
            (7, Some(9)),
            (8, None),
            (9, Some(3)),
        ]))
        .expect("legal ballot");
    state
        .resolve_night(NightPacket {
            guard_target: Some(Seat(4)),
            wolf_proposals: proposals(&[3, 7], 9),
            witch_poison: Some(Seat(6)),
            seer_target: Some(Seat(7)),
            ..NightPacket::default()
        })
        .expect("legal night");
    silent_day(&mut state);
    state
        .apply_ballot(&ballots(&[
            (1, Some(3)),
            (3, Some(1)),
            (4, Some(3)),
            (5, Some(1)),
            (7, Some(1)),
            (8, Some(4)),
        ]))
        .expect("legal ballot");
    GameLog::from_state("behavior-swg9", &state)
}

/// One day in which the witch draws votes from both factions and is voted out,
/// including a speech that claims a death that never happened.
pub fn witch_suspect_game() -> GameLog {
    let mut setup = Setup::new(SetupVariant::Swg9, 7);
    setup.explicit_roles = Some(table_roles());
    setup.explicit_day_start = Some(Seat(1));
    let mut state = GameState::new_game(setup).expect("valid setup");
    let packet = NightPacket {
        guard_target: Some(Seat(9)),
        wolf_proposals: proposals(&[2, 3, 7], 5),
        witch_save: false,
        witch_poison: None,
        seer_target: Some(Seat(2)),
    };
    state.resolve_night(packet).expect("legal night");
    let order = state.speaking_order();
    for seat in order {
        let payload = match seat.0 {
            8 => speech("Villager", Some(2), "Seat 5 died. I have no role to share.", vec![
                Claim::Died { round: 1, seat: Seat(5) },
            ]),
            4 => speech("Seer", Some(2), "I checked seat 2 and found a wolf.", vec![]),
            9 => speech("Villager", Some(8), "Seat 6 died last night.", vec![Claim::Died {
                round: 1,
                seat: Seat(6),
            }]),
            _ => speech("Villager", Some(8), "Seat 8 is hiding something.", vec![]),
        };
        state.submit_speech(seat, payload).expect("legal speech");
    }
    state
        .apply_ballot(&ballots(&[
            (1, Some(8)),
            (2, Some(8)),
            (3, Some(8)),
            (4, Some(2)),
            (6, Some(8)),
            (7, Some(8)),
            (8, Some(2)),
            (9, Some(8)),
        ]))
        .expect("legal ballot");
    GameLog::from_state("witch-suspect-swg9", &state)
}

/// Fixture logs plus `random_games` seeded random-legal games in each
/// nine-seat composition.
pub fn selection_corpus(random_games: u32) -> Vec<GameLog> {
    let mut logs = vec![golden_game(), witch_suspect_game()];
    for (variant, seed) in [(SetupVariant::Swg9, 11), (SetupVariant::Swh9, 12)] {
        let mut plan = SimulationPlan::new(variant, random_games, seed, AgentPlan::from_kinds("random").expect("known kind"));
        plan.record_transcripts = false;
        logs.extend(simulate(&plan).expect("scripted simulation").into_iter().map(|mut log| {
            log.game_id = format!("{}-{}", variant.label(), log.game_id);
            log
        }));
    }
    logs
}

/// A six-participant pool with known strengths for rating-recovery checks.
#[derive(Debug, Clone)]
pub struct SyntheticPool {
    /// Participant names, weakest first.
    pub ordered: Vec<String>,
    pub games: Vec<RatedGame>,
}

/// Plays `games` nine-seat matches between six participants whose skills are
/// spaced six points apart. Every seat goes to a uniformly drawn participant,
/// performs `N(skill, beta²)`, and the side with the larger summed performance
/// wins.
pub fn synthetic_pool(seed: u64, games: usize, beta: f64) -> SyntheticPool {
    let ordered: Vec<String> = (0..6).map(|i| format!("p{i}")).collect();
    let skill = |i: usize| (i as f64 - 2.5) * 6.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, beta).expect("positive beta");
    let mut out = Vec::with_capacity(games);
    for _ in 0..games {
        let seats: Vec<usize> = (0..9).map(|_| rng.random_range(0..6)).collect();
        let mut perf = |team: &[usize]| -> f64 {
            team.iter().map(|&i| skill(i) + noise.sample(&mut rng)).sum()
        };
        let village = perf(&seats[..6]);
        let wolf = perf(&seats[6..]);
        let names = |team: &[usize]| team.iter().map(|&i| ordered[i].clone()).collect();
        out.push(RatedGame {
            village: names(&seats[..6]),
            wolf: names(&seats[6..]),
            winner: if village > wolf { Winner::Village } else { Winner::Wolf },
        });
    }
    SyntheticPool { ordered, games: out }
}
