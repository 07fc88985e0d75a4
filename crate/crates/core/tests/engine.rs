use std::collections::BTreeMap;

use proptest::prelude::*;
use werewolf_core::agents::SpeechPayload;
use werewolf_core::arena::{simulate, AgentPlan, SimulationPlan};
use werewolf_core::engine::{
    audit, replay, GameEvent, GameLog, GameState, NightPacket, Phase, Role, Rule, Seat, Setup,
    SetupVariant, Winner, ROUND_CAP,
};
use werewolf_core::fixtures::golden_game;

const VARIANTS: [SetupVariant; 4] = [
    SetupVariant::Swg9,
    SetupVariant::Swh9,
    SetupVariant::Sg7,
    SetupVariant::Sw7,
];

fn random_games(variant: SetupVariant, games: u32, seed: u64) -> Vec<GameLog> {
    let mut plan = SimulationPlan::new(variant, games, seed, AgentPlan::from_kinds("random").unwrap());
    plan.record_transcripts = false;
    simulate(&plan).unwrap()
}

fn fixed_state(explicit_day_start: u8) -> GameState {
    use Role::*;
    let mut setup = Setup::new(SetupVariant::Swg9, 3);
    setup.explicit_roles = Some(
        [Guard, Werewolf, Werewolf, Seer, SimpleVillager, SimpleVillager, Werewolf, Witch, SimpleVillager]
            .into_iter()
            .enumerate()
            .map(|(i, r)| (Seat(i as u8 + 1), r))
            .collect(),
    );
    setup.explicit_day_start = Some(Seat(explicit_day_start));
    GameState::new_game(setup).unwrap()
}

fn wolves_target(t: u8) -> BTreeMap<Seat, Option<Seat>> {
    [2, 3, 7].into_iter().map(|w| (Seat(w), Some(Seat(t)))).collect()
}

fn finish_day(state: &mut GameState, ballots: &[(u8, Option<u8>)]) {
    for seat in state.speaking_order() {
        state.submit_speech(seat, SpeechPayload::silent()).unwrap();
    }
    let ballots = ballots.iter().map(|(v, t)| (Seat(*v), t.map(Seat))).collect();
    state.apply_ballot(&ballots).unwrap();
}

#[test]
fn random_legal_matches_hold_every_invariant() {
    for (k, variant) in VARIANTS.into_iter().enumerate() {
        for log in random_games(variant, 250, 100 + k as u64) {
            replay(&log).unwrap_or_else(|e| panic!("{}: {e}", log.game_id));
            if let Err(problems) = audit(&log) {
                panic!("{}: {problems:?}", log.game_id);
            }
            assert!(log.rounds() < ROUND_CAP, "{} reached the cap", log.game_id);
            assert!(matches!(log.winner, Some(Winner::Village | Winner::Wolf)));
        }
    }
}

#[test]
fn simulation_is_deterministic() {
    for variant in VARIANTS {
        assert_eq!(random_games(variant, 20, 9), random_games(variant, 20, 9));
    }
    assert_ne!(random_games(SetupVariant::Swg9, 5, 1), random_games(SetupVariant::Swg9, 5, 2));
}

#[test]
fn logs_round_trip_through_json_lines() {
    for log in random_games(SetupVariant::Swh9, 10, 4).into_iter().chain([golden_game()]) {
        assert_eq!(GameLog::from_line(&log.to_line()).unwrap(), log);
    }
}

#[test]
fn speaking_order_rotates_one_seat_per_day() {
    let log = golden_game();
    let mut firsts = BTreeMap::new();
    for e in &log.events {
        if let GameEvent::Speech { round, seat, .. } = e {
            firsts.entry(*round).or_insert(*seat);
        }
    }
    assert_eq!(firsts.into_values().collect::<Vec<_>>(), vec![Seat(4), Seat(5), Seat(6)]);
}

#[test]
fn guard_cannot_protect_the_same_seat_twice_running() {
    let mut state = fixed_state(1);
    state
        .resolve_night(NightPacket {
            guard_target: Some(Seat(5)),
            wolf_proposals: wolves_target(5),
            ..NightPacket::default()
        })
        .unwrap();
    finish_day(&mut state, &[]);
    let err = state
        .resolve_night(NightPacket {
            guard_target: Some(Seat(5)),
            wolf_proposals: wolves_target(6),
            ..NightPacket::default()
        })
        .unwrap_err();
    assert_eq!(err.rule(), Some(Rule::ConsecutiveGuard));
}

#[test]
fn guarded_victim_survives_but_poison_ignores_the_guard() {
    let mut state = fixed_state(1);
    let deaths = state
        .resolve_night(NightPacket {
            guard_target: Some(Seat(5)),
            wolf_proposals: wolves_target(5),
            witch_poison: Some(Seat(6)),
            ..NightPacket::default()
        })
        .unwrap();
    assert_eq!(deaths.into_iter().collect::<Vec<_>>(), vec![Seat(6)]);
}

#[test]
fn potions_are_single_use_and_exclusive() {
    let mut state = fixed_state(1);
    let both = NightPacket {
        wolf_proposals: wolves_target(5),
        witch_save: true,
        witch_poison: Some(Seat(2)),
        ..NightPacket::default()
    };
    assert_eq!(state.resolve_night(both).unwrap_err().rule(), Some(Rule::DoublePotion));
    let self_poison = NightPacket {
        wolf_proposals: wolves_target(5),
        witch_poison: Some(Seat(8)),
        ..NightPacket::default()
    };
    assert_eq!(state.resolve_night(self_poison).unwrap_err().rule(), Some(Rule::WitchSelfPoison));
    state
        .resolve_night(NightPacket {
            wolf_proposals: wolves_target(5),
            witch_save: true,
            ..NightPacket::default()
        })
        .unwrap();
    assert!(state.antidote_used());
    finish_day(&mut state, &[]);
    let again = NightPacket {
        wolf_proposals: wolves_target(6),
        witch_save: true,
        ..NightPacket::default()
    };
    assert_eq!(state.resolve_night(again).unwrap_err().rule(), Some(Rule::AntidoteUsed));
}

#[test]
fn tied_vote_gets_one_revote_then_nobody_leaves() {
    let mut state = fixed_state(1);
    state.resolve_night(NightPacket::default()).unwrap();
    finish_day(&mut state, &[(1, Some(2)), (2, Some(1))]);
    assert_eq!(state.phase(), Phase::DayVote { ballot_index: 1 });
    let outside = [(Seat(3), Some(Seat(4)))].into_iter().collect();
    assert_eq!(state.apply_ballot(&outside).unwrap_err().rule(), Some(Rule::NotACandidate));
    let ballots = [(Seat(1), Some(Seat(2))), (Seat(2), Some(Seat(1)))].into_iter().collect();
    let outcome = state.apply_ballot(&ballots).unwrap();
    assert_eq!(outcome.eliminated, None);
    assert_eq!(state.phase(), Phase::NightActions);
    assert_eq!(state.alive().len(), 9);
}

#[test]
fn self_votes_and_dead_actors_are_rejected() {
    let mut state = fixed_state(1);
    state
        .resolve_night(NightPacket {
            wolf_proposals: wolves_target(5),
            ..NightPacket::default()
        })
        .unwrap();
    assert!(!state.is_alive(Seat(5)));
    for seat in state.speaking_order() {
        state.submit_speech(seat, SpeechPayload::silent()).unwrap();
    }
    let selfie = [(Seat(1), Some(Seat(1)))].into_iter().collect();
    assert_eq!(state.apply_ballot(&selfie).unwrap_err().rule(), Some(Rule::SelfVote));
    let ghost = [(Seat(5), Some(Seat(1)))].into_iter().collect();
    assert_eq!(state.apply_ballot(&ghost).unwrap_err().rule(), Some(Rule::DeadActor));
}

#[test]
fn tampered_logs_fail_replay() {
    let mut log = golden_game();
    let idx = log
        .events
        .iter()
        .position(|e| matches!(e, GameEvent::NightResolved { round: 3, .. }))
        .unwrap();
    log.events[idx] = GameEvent::NightResolved {
        round: 3,
        deaths: Default::default(),
    };
    assert!(replay(&log).is_err());

    let mut log = golden_game();
    log.winner = Some(Winner::Wolf);
    assert!(replay(&log).is_err());
}

#[test]
fn audit_flags_a_reused_antidote() {
    let mut log = golden_game();
    for e in &mut log.events {
        if let GameEvent::NightSubmitted { round: 2, packet } = e {
            packet.witch_save = true;
        }
    }
    assert!(audit(&log).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_seed_yields_a_valid_terminated_game(seed in any::<u64>(), v in 0usize..4) {
        let logs = random_games(VARIANTS[v], 1, seed);
        let log = &logs[0];
        prop_assert!(replay(log).is_ok());
        prop_assert!(audit(log).is_ok());
        prop_assert!(log.winner.is_some());
    }

    #[test]
    fn deal_matches_the_composition(seed in any::<u64>(), v in 0usize..4) {
        let variant = VARIANTS[v];
        let state = GameState::new_game(Setup::new(variant, seed)).unwrap();
        let mut dealt: Vec<Role> = state.roles().into_values().collect();
        let mut expected = variant.composition();
        dealt.sort_by_key(|r| r.name());
        expected.sort_by_key(|r| r.name());
        prop_assert_eq!(dealt, expected);
        prop_assert!(state.day_start_seat().0 >= 1 && state.day_start_seat().0 <= variant.seats());
    }
}
