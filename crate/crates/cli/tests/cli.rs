use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use werewolf_core::agents::TemplateSet;
use werewolf_core::engine::read_jsonl;
use werewolf_core::selection::{emit_dataset, select_all, Selector, Verifier};

fn werewolf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_werewolf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/golden_swg9.jsonl")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn replay_reports_the_golden_outcome() {
    let out = werewolf(&["replay", "--log", s(&golden())]);
    assert!(out.status.success(), "{out:?}");
    assert_eq!(stdout(&out).trim(), "winner: Village, rounds: 3");
}

#[test]
fn simulate_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out_dir = dir.path().join(name);
        let out = werewolf(&[
            "simulate", "--setup", "sg7", "--agents", "random", "--games", "12", "--seed", "5",
            "--concurrency", threads, "--out", s(&out_dir),
        ]);
        assert!(out.status.success(), "{out:?}");
        fs::read(out_dir.join("games.jsonl")).unwrap()
    };
    let a = run("a", "0");
    assert_eq!(a, run("b", "0"));
    assert_eq!(a, run("c", "1"));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["games"], 12);
    assert_eq!(manifest["kind"], "simulate");
    assert_eq!(read_jsonl(&dir.path().join("a/games.jsonl")).unwrap().len(), 12);
}

#[test]
fn select_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let cli_out = dir.path().join("cli.jsonl");
    let out = werewolf(&["select", "--logs", s(&golden()), "--out", s(&cli_out)]);
    assert!(out.status.success(), "{out:?}");
    let stats: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();

    let logs = read_jsonl(&golden()).unwrap();
    let all = [Selector::Heuristic, Selector::StagedVoting, Selector::Verifier];
    let recs = select_all(&logs, &all, &Verifier::Structural, &TemplateSet::default()).unwrap();
    let lib_out = dir.path().join("lib.jsonl");
    let lib_stats = emit_dataset(&recs, &lib_out).unwrap();
    assert_eq!(fs::read(&cli_out).unwrap(), fs::read(&lib_out).unwrap());
    assert_eq!(stats["total"], lib_stats.total);

    let heuristic_only = dir.path().join("h.jsonl");
    let out = werewolf(&["select", "--logs", s(&golden()), "--selectors", "heuristic", "--out", s(&heuristic_only)]);
    assert!(out.status.success());
    let text = fs::read_to_string(&heuristic_only).unwrap();
    assert!(text.lines().all(|l| l.contains("\"selector\":\"heuristic\"")));
}

#[test]
fn tournaments_write_a_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    fs::write(
        &plan,
        r#"
mode = "head2head"
setup = "swg9"
games = 6
seed = 11

[[participants]]
name = "oracle"
kind = "informed_villager"

[[participants]]
name = "wolfish"
kind = "greedy_wolf"
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("h2h");
    let out = werewolf(&["tournament", "head2head", "--plan", s(&plan), "--out", s(&out_dir)]);
    assert!(out.status.success(), "{out:?}");
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["result"]["games"], 6);
    let logs = read_jsonl(&out_dir.join("games.jsonl")).unwrap();
    assert_eq!(logs.len(), 6);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["kind"], "head2head");
    assert_eq!(manifest["summary"], summary);

    let wrong = werewolf(&["tournament", "random", "--plan", s(&plan), "--out", s(&out_dir)]);
    assert_eq!(wrong.status.code(), Some(1));

    let rate = werewolf(&["rate", "--logs", s(&out_dir)]);
    assert!(rate.status.success());
    let table = stdout(&rate);
    assert!(table.starts_with("participant,mu,sigma,conservative,games"));
    assert!(table.contains("oracle,") && table.contains("wolfish,"));

    let tables = dir.path().join("tables");
    let analyze = werewolf(&[
        "analyze", "--logs", s(&out_dir), "--offline", s(&golden()), "--agent", "informed", "--out", s(&tables),
    ]);
    assert!(analyze.status.success(), "{analyze:?}");
    for f in ["win_matrix.csv", "behavior.csv", "offline.json"] {
        assert!(tables.join(f).is_file(), "{f}");
    }
    let offline: serde_json::Value =
        serde_json::from_slice(&fs::read(tables.join("offline.json")).unwrap()).unwrap();
    assert_eq!(offline["vote_accuracy"], 1.0);
}

#[test]
fn kto_eval_prints_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("batch.csv");
    fs::write(&data, "0.0,0.0,desirable\n0.0,0.0,undesirable\n").unwrap();
    let out = werewolf(&["kto-eval", "--data", s(&data)]);
    assert!(out.status.success(), "{out:?}");
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["examples"], 2);
    assert_eq!(report["z0"], 0.0);
    // 0.7·σ(0) and 1.0·σ(0) as losses: (0.7 − 0.35) and (1.0 − 0.5)
    assert!((report["loss"].as_f64().unwrap() - 0.425).abs() < 1e-12);

    assert_eq!(werewolf(&["kto-eval", "--data", s(&data), "--beta", "-1"]).status.code(), Some(1));
    fs::write(&data, "0.0,0.0,maybe\n").unwrap();
    assert_eq!(werewolf(&["kto-eval", "--data", s(&data)]).status.code(), Some(1));
}

#[test]
fn exit_codes_separate_bad_input_from_runtime_failures() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(werewolf(&["--help"]).status.code(), Some(0));
    assert_eq!(werewolf(&["--version"]).status.code(), Some(0));
    assert_eq!(werewolf(&["bogus"]).status.code(), Some(1));
    assert_eq!(werewolf(&["simulate"]).status.code(), Some(1));
    let out = s(dir.path());
    assert_eq!(werewolf(&["simulate", "--setup", "swx", "--out", out]).status.code(), Some(1));
    assert_eq!(werewolf(&["simulate", "--agents", "psychic", "--out", out]).status.code(), Some(1));
    assert_eq!(werewolf(&["select", "--logs", out, "--selectors", "magic", "--out", out]).status.code(), Some(1));

    let missing = dir.path().join("missing.jsonl");
    assert_eq!(werewolf(&["replay", "--log", s(&missing)]).status.code(), Some(2));
    assert_eq!(werewolf(&["kto-eval", "--data", s(&missing)]).status.code(), Some(2));
    assert_eq!(werewolf(&["tournament", "random", "--plan", s(&missing), "--out", out]).status.code(), Some(2));

    let garbled = dir.path().join("garbled.jsonl");
    fs::write(&garbled, "{not json}\n").unwrap();
    let replay = werewolf(&["replay", "--log", s(&garbled)]);
    assert_eq!(replay.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&replay.stderr).contains("line 1"));

    let tampered = dir.path().join("tampered.jsonl");
    let text = fs::read_to_string(golden()).unwrap();
    fs::write(&tampered, text.replacen("\"Village\"", "\"Wolf\"", 1)).unwrap();
    assert_eq!(werewolf(&["replay", "--log", s(&tampered)]).status.code(), Some(1));
}
