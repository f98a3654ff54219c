use std::process::{Command, Output};

use boxsearch_cli::read_sim_csv;

fn boxsearch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boxsearch"))
        .env_remove("BOXSEARCH_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn sim_csv_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let out = boxsearch(&[
        "sim", "--alg", "astar", "--prior", "uniform:10", "-k", "3", "--configured-k", "2", "--trials",
        "500", "--seed", "9", "--crash", "1:4", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());

    let text = std::fs::read_to_string(&path).unwrap();
    let (header, rows) = read_sim_csv(&text).unwrap();
    assert_eq!(header.alg, "astar");
    assert_eq!((header.k, header.configured_k), (3, 2));
    assert_eq!((header.trials, header.seed), (500, 9));
    assert_eq!(header.crashes, vec!["1:4".to_string()]);
    assert_eq!(rows.len(), 500);
    assert!(rows.iter().enumerate().all(|(i, r)| r.trial == i as u64));
    assert!(rows.iter().all(|r| (1..=10).contains(&r.treasure_box) && r.discovery_time.is_some()));
}

#[test]
fn censored_trials_leave_discovery_empty() {
    let out = boxsearch(&[
        "sim", "--alg", "uniform", "--prior", "uniform:20", "-k", "2", "--trials", "200", "--crash",
        "1:2", "--crash", "2:2",
    ]);
    assert!(out.status.success());
    let (_, rows) = read_sim_csv(&stdout(&out)).unwrap();
    let censored = rows.iter().filter(|r| r.discovery_time.is_none()).count();
    assert!(censored > 100, "{censored} of 200 censored");
    assert!(rows.iter().all(|r| r.discovery_time.is_none_or(|t| t == 1)));
}

#[test]
fn seed_comes_from_the_environment() {
    let args = ["sim", "--alg", "memory", "--prior", "uniform:30", "-k", "2", "--trials", "300"];
    let with_env = Command::new(env!("CARGO_BIN_EXE_boxsearch"))
        .env("BOXSEARCH_SEED", "123")
        .args(args)
        .output()
        .unwrap();
    let mut explicit = args.to_vec();
    explicit.extend(["--seed", "123"]);
    assert_eq!(with_env.stdout, boxsearch(&explicit).stdout);
    assert_ne!(with_env.stdout, boxsearch(&args).stdout);
}

#[test]
fn eval_reports_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prior.json");
    std::fs::write(&path, r#"{"kind": "custom", "M": 3, "masses": [3, 2, 1]}"#).unwrap();
    let prior = format!("file:{}", path.display());
    let out = boxsearch(&["eval", "--prior", &prior, "-k", "2", "--alg", "astar", "--alg", "cord"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let astar = text.lines().find(|l| l.starts_with("astar,")).unwrap();
    let lower: f64 = astar.split(',').nth(1).unwrap().parse().unwrap();
    assert!((lower - 481.0 / 330.0).abs() < 1e-12, "{text}");
}

#[test]
fn lstar_json_marks_the_infinite_level() {
    let out = boxsearch(&["--format", "json", "lstar", "--prior", "uniform:3", "-k", "2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let alpha = v["alpha"].as_array().unwrap();
    assert!(alpha[0].is_null());
    assert!((alpha[1].as_f64().unwrap() - 2.0 / 9.0).abs() < 1e-12);
}

#[test]
fn trace_emits_one_line_per_step() {
    let out = boxsearch(&["trace", "--alg", "universal", "--prior", "uniform:12", "-k", "2", "--agent", "2", "--steps", "5"]);
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().all(|l| l["agent"] == 2 && l["boxes"].as_array().unwrap().len() == 2));
}

#[test]
fn exit_codes_separate_usage_from_failed_checks() {
    assert_eq!(boxsearch(&["sim", "--alg", "nope", "--prior", "uniform:3"]).status.code(), Some(2));
    assert_eq!(boxsearch(&["eval", "--prior", "zipf:3"]).status.code(), Some(2));
    assert_eq!(boxsearch(&["eval", "--prior", "uniform:3", "-k", "1"]).status.code(), Some(2));
    assert_eq!(boxsearch(&["verify", "bogus"]).status.code(), Some(2));
    let gamma = boxsearch(&["verify", "gamma"]);
    assert_eq!(gamma.status.code(), Some(0));
    assert!(stdout(&gamma).contains("PASS"));
    // A tolerance no finite instance can meet is a failed check, not a usage error.
    let strict = boxsearch(&["verify", "pareto", "--M", "2000", "--tolerance", "1e-12"]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(stdout(&strict).contains("FAIL"));
}
