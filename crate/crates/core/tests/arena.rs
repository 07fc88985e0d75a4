use std::collections::BTreeMap;
use std::net::TcpListener;

use statrs::distribution::{ChiSquared, ContinuousCDF};
use werewolf_core::agents::{AgentKind, AgentSpec, RemoteSpec};
use werewolf_core::arena::{
    derive_seed, head_to_head, random_assignment, random_competition, run_match, simulate,
    tally_participants, write_run, AgentPlan, Manifest, MatchOptions, Pool, SimulationPlan,
    SwapSeed, TournamentMode, TournamentPlan,
};
use werewolf_core::engine::{audit, read_jsonl, replay, Faction, Seat, Setup, SetupVariant, Winner};
use werewolf_core::exec::{map_indexed, Execution};

fn h2h_plan(games: u32, swap_seed: SwapSeed, a: AgentKind, b: AgentKind) -> TournamentPlan {
    TournamentPlan {
        mode: TournamentMode::Head2head,
        setup: SetupVariant::Swg9,
        games,
        seed: 42,
        concurrency: 0,
        swap_seed,
        predict_roles: false,
        record_transcripts: false,
        participants: vec![AgentSpec::scripted("a", a), AgentSpec::scripted("b", b)],
    }
}

fn village_wins(plan: &SimulationPlan) -> usize {
    simulate(plan)
        .unwrap()
        .iter()
        .filter(|l| l.winner == Some(Winner::Village))
        .count()
}

#[test]
fn informed_village_beats_random_wolves() {
    let mut plan = SimulationPlan::new(SetupVariant::Swg9, 500, 2024, AgentPlan::from_kinds("informed:random").unwrap());
    plan.record_transcripts = false;
    assert!(village_wins(&plan) as f64 >= 0.9 * 500.0);
}

#[test]
fn greedy_wolves_beat_random_village() {
    let mut plan = SimulationPlan::new(SetupVariant::Swg9, 500, 2024, AgentPlan::from_kinds("random:greedy").unwrap());
    plan.record_transcripts = false;
    assert!(village_wins(&plan) as f64 <= 0.4 * 500.0);
}

#[test]
fn head_to_head_swaps_factions_every_game() {
    let result = head_to_head(&h2h_plan(20, SwapSeed::Fresh, AgentKind::RandomLegal, AgentKind::GreedyWolf)).unwrap();
    for (i, log) in result.logs.iter().enumerate() {
        let expected_village = if i % 2 == 0 { "a" } else { "b" };
        for (seat, role) in &log.roles {
            let owner = &log.participants[seat];
            let village_owner = role.faction() == Faction::Village;
            assert_eq!(owner == expected_village, village_owner, "game {i} seat {seat}");
        }
    }
    for t in [result.a_as_village, result.a_as_wolf, result.b_as_village, result.b_as_wolf] {
        assert_eq!(t.games, 10);
    }
}

#[test]
fn identical_sides_with_mirrored_seeds_split_evenly() {
    let result = head_to_head(&h2h_plan(40, SwapSeed::Mirrored, AgentKind::RandomLegal, AgentKind::RandomLegal)).unwrap();
    assert_eq!(result.average_a(), Some(0.5));
    assert_eq!(result.average_b(), Some(0.5));
}

#[test]
fn head_to_head_plan_rules() {
    let mut odd = h2h_plan(3, SwapSeed::Fresh, AgentKind::RandomLegal, AgentKind::RandomLegal);
    assert!(odd.validate().is_err());
    odd.games = 4;
    odd.participants.pop();
    assert!(odd.validate().is_err());
    let mut dup = h2h_plan(4, SwapSeed::Fresh, AgentKind::RandomLegal, AgentKind::RandomLegal);
    dup.participants[1].name = "a".into();
    assert!(dup.validate().is_err());
}

#[test]
fn plans_parse_from_toml() {
    let text = r#"
        mode = "random"
        setup = "swh9"
        games = 12
        seed = 5
        concurrency = 2

        [[participants]]
        name = "r"
        kind = "random_legal"

        [[participants]]
        name = "g"
        kind = "greedy_wolf"
    "#;
    let plan = TournamentPlan::from_toml(text).unwrap();
    assert_eq!(plan.setup, SetupVariant::Swh9);
    assert_eq!(plan.hash(), TournamentPlan::from_toml(text).unwrap().hash());
    assert!(TournamentPlan::from_toml(&text.replace("games = 12", "games = 12\nbogus = 1")).is_err());
    let remote_without_table = text.replace("kind = \"greedy_wolf\"", "kind = \"remote\"");
    assert!(TournamentPlan::from_toml(&remote_without_table).is_err());
}

#[test]
fn single_participant_always_wins() {
    let plan = TournamentPlan {
        mode: TournamentMode::Random,
        participants: vec![AgentSpec::scripted("solo", AgentKind::RandomLegal)],
        ..h2h_plan(10, SwapSeed::Fresh, AgentKind::RandomLegal, AgentKind::RandomLegal)
    };
    let result = random_competition(&plan).unwrap();
    let solo = &result.participants[0];
    assert_eq!(solo.game_win_rate(), Some(1.0));
    assert_eq!(solo.seats, 90);
}

#[test]
fn random_competition_is_concurrency_invariant() {
    let mut plan = TournamentPlan {
        mode: TournamentMode::Random,
        games: 24,
        participants: vec![
            AgentSpec::scripted("r", AgentKind::RandomLegal),
            AgentSpec::scripted("g", AgentKind::GreedyWolf),
            AgentSpec::scripted("i", AgentKind::InformedVillager),
        ],
        ..h2h_plan(2, SwapSeed::Fresh, AgentKind::RandomLegal, AgentKind::RandomLegal)
    };
    plan.concurrency = 1;
    let sequential = random_competition(&plan).unwrap();
    plan.concurrency = 4;
    let parallel = random_competition(&plan).unwrap();
    assert_eq!(sequential.logs, parallel.logs);
    let names: Vec<String> = ["r", "g", "i"].map(String::from).to_vec();
    let stats = tally_participants(&names, &parallel.logs);
    assert_eq!(stats.iter().map(|s| s.seats).sum::<u32>(), 24 * 9);
    for s in &stats {
        let formatted = s.formatted();
        assert!(formatted.contains('±') && formatted.starts_with("0."), "{formatted}");
    }
}

#[test]
fn seat_assignment_is_uniform() {
    let names: Vec<String> = ["a", "b", "c", "d"].map(String::from).to_vec();
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    let games = 2000;
    for i in 0..games {
        for name in random_assignment(9, i, 9, &names).into_values() {
            *counts.entry(name).or_default() += 1.0;
        }
    }
    let expected = (games * 9) as f64 / names.len() as f64;
    let stat: f64 = counts.values().map(|c| (c - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new(3.0).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi-square {stat} >= {critical}");
}

#[test]
fn seeds_depend_on_index_and_stream() {
    assert_eq!(derive_seed(1, 2, "match"), derive_seed(1, 2, "match"));
    assert_ne!(derive_seed(1, 2, "match"), derive_seed(1, 3, "match"));
    assert_ne!(derive_seed(1, 2, "match"), derive_seed(1, 2, "assign"));
}

#[test]
fn execution_modes_agree() {
    let f = |i: usize| derive_seed(7, i as u64, "x");
    assert_eq!(map_indexed(100, Execution::Sequential, f), map_indexed(100, Execution::with_threads(3), f));
}

#[test]
fn transcripts_and_predictions_are_recorded() {
    let pool = Pool::new([AgentSpec::scripted("r", AgentKind::RandomLegal)]).unwrap();
    let setup = Setup::new(SetupVariant::Sw7, 3);
    let assignment = (1..=7).map(|s| (Seat(s), "r".to_string())).collect();
    let log = run_match(setup, &assignment, &pool, "m", &MatchOptions::default()).unwrap();
    replay(&log).unwrap();
    audit(&log).unwrap();
    assert!(!log.transcripts.is_empty());
    assert!(log.rounds() < 2 || !log.predictions.is_empty());
    let bare = run_match(Setup::new(SetupVariant::Sw7, 3), &(1..=7).map(|s| (Seat(s), "r".to_string())).collect(), &pool, "m", &MatchOptions::bare()).unwrap();
    assert!(bare.transcripts.is_empty() && bare.predictions.is_empty());
    assert_eq!(bare.events, log.events);
}

#[test]
fn unreachable_remote_agents_degrade_without_aborting() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    drop(listener);
    let mut remote = RemoteSpec::new(endpoint, "m");
    remote.timeout_secs = 1.0;
    remote.max_retries = 0;
    let spec = AgentSpec {
        name: "remote".into(),
        kind: AgentKind::Remote,
        remote: Some(remote),
    };
    let pool = Pool::new([spec, AgentSpec::scripted("r", AgentKind::RandomLegal)]).unwrap();
    let assignment = (1..=7)
        .map(|s| (Seat(s), if s == 1 { "remote" } else { "r" }.to_string()))
        .collect();
    let log = run_match(Setup::new(SetupVariant::Sg7, 8), &assignment, &pool, "d", &MatchOptions::default()).unwrap();
    assert!(log.winner.is_some());
    assert!(log.degraded.contains(&Seat(1)));
    replay(&log).unwrap();
}

#[test]
fn run_directory_layout() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = SimulationPlan::new(SetupVariant::Sg7, 5, 1, AgentPlan::from_kinds("random").unwrap());
    plan.record_transcripts = false;
    let logs = simulate(&plan).unwrap();
    let games = write_run(dir.path(), &logs, Manifest::new("simulate", plan.hash(), 0)).unwrap();
    assert_eq!(read_jsonl(&games).unwrap(), logs);
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.games, 5);
    assert_eq!(manifest.plan_hash, plan.hash());
}
