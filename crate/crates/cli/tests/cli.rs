//! End-to-end checks of the command-line surface: every subcommand runs
//! against real files, outputs parse, and the exit-code contract holds
//! (2 for usage errors, 1 for runtime errors).

use std::path::Path;
use std::process::{Command, Output};

fn bargain() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bargain"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn");
    assert!(
        out.status.success(),
        "command failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn gen_domain(dir: &Path, issues: &str, opposition: &str, seed: u64) {
    run_ok(bargain()
        .args(["gen-domain", "--issues", issues, "--opposition", opposition])
        .args(["--seed", &seed.to_string()])
        .arg("--out")
        .arg(dir));
}

#[test]
fn gen_domain_writes_valid_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(bargain()
        .args(["gen-domain", "--omega", "48", "--opposition", "high", "--seed", "5"])
        .arg("--out")
        .arg(dir.path()));
    let payload: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("summary is JSON");
    assert_eq!(payload["outcomes"], 48);
    assert!(payload["opposition"].as_f64().unwrap() > 0.4);
    for file in ["domain.json", "profile_a.json", "profile_b.json"] {
        assert!(dir.path().join(file).exists(), "{file} missing");
    }
}

#[test]
fn estimate_reports_accuracy_against_known_truth() {
    let dir = tempfile::tempdir().unwrap();
    gen_domain(dir.path(), "3,3,3", "medium", 7);
    let out = run_ok(bargain()
        .arg("estimate-user-model")
        .arg("--domain")
        .arg(dir.path().join("domain.json"))
        .arg("--profile")
        .arg(dir.path().join("profile_a.json"))
        .args(["--fraction", "0.4", "--seed", "3", "--population", "10", "--generations", "30"]));
    let payload: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(payload["rho_on_b"].as_f64().unwrap() > 0.0);
    assert!(payload["ordinal_accuracy"].as_f64().unwrap() > 0.5);
    assert!(payload["cardinal_inaccuracy"].as_f64().unwrap() >= 0.0);
    assert_eq!(payload["b_count"], 11); // ⌈0.4·27⌉
}

#[test]
fn pareto_reports_igd_against_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    gen_domain(dir.path(), "4,4,3", "medium", 9);
    let out = run_ok(bargain()
        .arg("pareto")
        .arg("--domain")
        .arg(dir.path().join("domain.json"))
        .arg("--profile")
        .arg(dir.path().join("profile_a.json"))
        .arg("--profile-b")
        .arg(dir.path().join("profile_b.json"))
        .args(["--seed", "2", "--offline-budget"]));
    let payload: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let igd = payload["igd_vs_brute_force"].as_f64().expect("igd present");
    assert!((0.0..0.2).contains(&igd), "igd {igd}");
    assert!(!payload["front"]["entries"].as_array().unwrap().is_empty());

    // the uniform-opponent prior collapses the front to own-utility argmax
    let out = run_ok(bargain()
        .arg("pareto")
        .arg("--domain")
        .arg(dir.path().join("domain.json"))
        .arg("--profile")
        .arg(dir.path().join("profile_a.json"))
        .args(["--opponent-uniform", "--format", "csv"]));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("own,opponent,bid\n"));
}

#[test]
fn run_and_replay_agree() {
    let dir = tempfile::tempdir().unwrap();
    gen_domain(dir.path(), "3,3", "low", 11);
    let log_path = dir.path().join("session.jsonl");
    run_ok(bargain()
        .arg("run")
        .arg("--domain")
        .arg(dir.path().join("domain.json"))
        .arg("--profile-a")
        .arg(dir.path().join("profile_a.json"))
        .arg("--profile-b")
        .arg(dir.path().join("profile_b.json"))
        .args(["--agent-a", "conceder:2.0", "--agent-b", "boulware:0.2"])
        .args(["--deadline", "100", "--seed", "21"])
        .arg("--out")
        .arg(&log_path));
    let out = run_ok(bargain().arg("replay").arg("--log").arg(&log_path));
    let payload: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(payload["settlement"]["logged"], payload["settlement"]["recomputed"]);
}

#[test]
fn adaptive_agent_runs_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    gen_domain(dir.path(), "3,3", "medium", 13);
    run_ok(bargain()
        .arg("run")
        .arg("--domain")
        .arg(dir.path().join("domain.json"))
        .arg("--profile-a")
        .arg(dir.path().join("profile_a.json"))
        .arg("--profile-b")
        .arg(dir.path().join("profile_b.json"))
        .args(["--agent-a", "adaptive", "--agent-b", "conceder:1.5"])
        .args(["--deadline", "60", "--seed", "4"]));
}

#[test]
fn tournament_metrics_and_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "agents": [
            {"type": "boulware", "exponent": 0.2},
            {"type": "conceder", "exponent": 2.0},
        ],
        "domains": [
            {"type": "synthetic", "name": "d1", "issues": [3, 2], "opposition": "medium"},
        ],
        "profiles": [0.5],
        "repeats": 2,
        "session": {"deadline_rounds": 60, "reservation": 0.1, "discount": 1.0, "agent_discount": 0.95},
        "seed": 17,
    });
    let config_path = dir.path().join("t.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        run_ok(bargain().arg("tournament").arg("--config").arg(&config_path).arg("--out").arg(out));
    }
    let csv_a = std::fs::read(out_a.join("results.csv")).unwrap();
    let csv_b = std::fs::read(out_b.join("results.csv")).unwrap();
    assert_eq!(csv_a, csv_b);

    // metrics recomputed from the logs reproduce results.csv exactly
    let out = run_ok(bargain().arg("metrics").arg("--sessions").arg(out_a.join("sessions")));
    assert_eq!(out.stdout, csv_a);
}

#[test]
fn pipeline_smoke_learn_pretrain_train() {
    let dir = tempfile::tempdir().unwrap();
    gen_domain(dir.path(), "3,2", "medium", 15);
    let arena = format!(
        "{}:{}:{}",
        dir.path().join("domain.json").display(),
        dir.path().join("profile_a.json").display(),
        dir.path().join("profile_b.json").display()
    );

    let model_path = dir.path().join("model.json");
    run_ok(bargain()
        .args(["pretrain", "--arena", &arena])
        .args(["--opponents", "boulware:0.2", "--sessions", "2", "--epochs", "5"])
        .args(["--deadline", "30", "--seed", "1"])
        .arg("--out")
        .arg(&model_path));
    assert!(model_path.exists());

    let strategy_path = dir.path().join("strategy.json");
    run_ok(bargain()
        .args(["learn-template", "--arena", &arena])
        .args(["--opponents", "conceder:2.0", "--population", "4", "--generations", "2"])
        .args(["--deadline", "30", "--seed", "2"])
        .arg("--model")
        .arg(&model_path)
        .arg("--out")
        .arg(&strategy_path));
    assert!(strategy_path.exists());

    let trained_path = dir.path().join("trained.json");
    run_ok(bargain()
        .args(["train-rl", "--arena", &arena])
        .args(["--opponents", "conceder:2.0", "--episodes", "2", "--deadline", "30", "--seed", "3"])
        .arg("--model")
        .arg(&model_path)
        .arg("--strategy")
        .arg(&strategy_path)
        .arg("--out")
        .arg(&trained_path));
    assert!(trained_path.exists());
}

#[test]
fn exit_codes_follow_the_contract() {
    // unknown flag → usage error → 2
    let out = bargain().args(["pareto", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // missing file → runtime error → 1
    let out = bargain()
        .args(["replay", "--log", "/nonexistent/file.jsonl"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
