use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn meshdeploy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshdeploy")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|r| r.unwrap()).collect()
}

fn headers(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(str::to_string).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let idx = headers(path).iter().position(|h| h == name).unwrap();
    read_rows(path).iter().map(|r| r[idx].to_string()).collect()
}

fn write_json(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn gen(dir: &Path, args: &[&str]) -> PathBuf {
    let mut all = vec!["gen", "--out", p(dir)];
    all.extend_from_slice(args);
    let out = meshdeploy(&all);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    dir.join("scenario.json")
}

fn solve(scenario: &Path, out_dir: &Path, extra: &[&str]) -> Output {
    let mut all = vec!["solve", p(scenario), "--out", p(out_dir)];
    all.extend_from_slice(extra);
    meshdeploy(&all)
}

#[test]
fn gen_is_deterministic_per_seed() {
    let tmp = TempDir::new().unwrap();
    let a = gen(&tmp.path().join("a"), &["--preset", "tiny", "--seed", "5"]);
    let b = gen(&tmp.path().join("b"), &["--preset", "tiny", "--seed", "5"]);
    let c = gen(&tmp.path().join("c"), &["--preset", "tiny", "--seed", "6"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    let manifest: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("a/gen.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["outputs"][0]["path"], "scenario.json");
}

#[test]
fn large_preset_dimensions() {
    let tmp = TempDir::new().unwrap();
    let out = meshdeploy(&["gen", "--preset", "paper-fig2", "--seed", "1", "--out", p(tmp.path())]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("5 BAN / 40 SBS / 20 MA sites, 2000 machines, 1600 subareas"), "{}", stdout(&out));
    let sc: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("scenario.json")).unwrap()).unwrap();
    assert_eq!(sc["area"]["w"], 400.0);
}

#[test]
fn zero_machines_is_a_valid_scenario() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_json(tmp.path(), "gen.json", &serde_json::json!({ "n_machines": 0 }));
    let scenario = gen(&tmp.path().join("s"), &["--preset", "tiny", "--config", p(&cfg)]);
    let out = solve(&scenario, &tmp.path().join("run"), &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(column(&tmp.path().join("run/front.csv"), "f3").iter().all(|f3| f3 == "0"));
}

#[test]
fn gen_rejects_bad_parameters() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_json(tmp.path(), "gen.json", &serde_json::json!({ "ban_cost": -1.0 }));
    let out = meshdeploy(&["gen", "--config", p(&cfg), "--out", p(tmp.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("ban_cost"));
}

#[test]
fn tiny_fixture_front_matches_golden() {
    let tmp = TempDir::new().unwrap();
    let out = solve(&fixture("tiny_scenario.json"), tmp.path(), &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let front = tmp.path().join("front.csv");
    assert_eq!(
        headers(&front),
        ["epsilon", "f1", "f2", "f3", "fc", "bound", "heuristic_bound", "solution_file", "source"]
    );
    let golden = fixture("tiny_front_golden.csv");
    for col in ["f1", "f2", "f3", "fc"] {
        assert_eq!(column(&front, col), column(&golden, col), "column {col}");
    }
}

#[test]
fn solver_output_passes_check() {
    let tmp = TempDir::new().unwrap();
    let scenario = fixture("tiny_scenario.json");
    assert_eq!(code(&solve(&scenario, tmp.path(), &["--seed", "3"])), 0);
    let files = column(&tmp.path().join("front.csv"), "solution_file");
    assert!(!files.is_empty());
    for f in files {
        let out = meshdeploy(&["check", p(&scenario), p(&tmp.path().join(&f))]);
        assert_eq!(code(&out), 0, "{f}: {}", stdout(&out));
    }
}

#[test]
fn theta_zero_makes_fc_equal_f2() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&solve(&fixture("tiny_scenario.json"), tmp.path(), &["--theta", "0"])), 0);
    let front = tmp.path().join("front.csv");
    let f2: Vec<f64> = column(&front, "f2").iter().map(|x| x.parse().unwrap()).collect();
    let fc: Vec<f64> = column(&front, "fc").iter().map(|x| x.parse().unwrap()).collect();
    assert_eq!(f2, fc);
}

#[test]
fn restricted_models_run() {
    let tmp = TempDir::new().unwrap();
    let scenario = fixture("tiny_scenario.json");
    for r in ["fiber-only", "single-hop"] {
        let dir = tmp.path().join(r);
        let out = solve(&scenario, &dir, &["--restrict", r]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        for f in column(&dir.join("front.csv"), "solution_file") {
            let doc: Value = serde_json::from_str(&fs::read_to_string(dir.join(&f)).unwrap()).unwrap();
            if r == "fiber-only" {
                assert!(doc["deployment"]["sbss"].as_array().unwrap().is_empty());
            }
            for parent in doc["parents"].as_object().unwrap().values() {
                assert!(parent.as_str().unwrap().starts_with("ban:"));
            }
            let out = meshdeploy(&["check", p(&scenario), p(&dir.join(&f)), "--restrict", r]);
            assert_eq!(code(&out), 0, "{}", stdout(&out));
        }
    }
}

#[test]
fn rerun_from_manifest_config_reproduces_outputs() {
    let tmp = TempDir::new().unwrap();
    let scenario = fixture("tiny_scenario.json");
    let first = tmp.path().join("first");
    assert_eq!(code(&solve(&scenario, &first, &["--seed", "11", "--delta-c", "0.5"])), 0);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(first.join("solve.manifest.json")).unwrap()).unwrap();
    let cfg = write_json(tmp.path(), "config.json", &manifest["config"]);
    let second = tmp.path().join("second");
    assert_eq!(code(&solve(&scenario, &second, &["--config", p(&cfg)])), 0);
    let again: Value = serde_json::from_str(&fs::read_to_string(second.join("solve.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"], again["outputs"]);
    assert_eq!(manifest["scenario_hash"], again["scenario_hash"]);
    assert_eq!(again["config"]["solver"]["delta_c"], 0.5);
}

#[test]
fn malformed_scenario_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let mut sc: Value = serde_json::from_str(&fs::read_to_string(fixture("tiny_scenario.json")).unwrap()).unwrap();
    sc.as_object_mut().unwrap().remove("ban_sites");
    let path = write_json(tmp.path(), "bad.json", &sc);
    let out = solve(&path, &tmp.path().join("run"), &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("ban_sites"), "{}", stderr(&out));

    let out = solve(&tmp.path().join("missing.json"), &tmp.path().join("run"), &[]);
    assert_eq!(code(&out), 2);
}

#[test]
fn check_reports_corrupted_parent() {
    let tmp = TempDir::new().unwrap();
    let scenario = fixture("tiny_scenario.json");
    assert_eq!(code(&solve(&scenario, tmp.path(), &[])), 0);
    let files = column(&tmp.path().join("front.csv"), "solution_file");
    let last = tmp.path().join(files.last().unwrap());
    let mut doc: Value = serde_json::from_str(&fs::read_to_string(&last).unwrap()).unwrap();
    let parents = doc["parents"].as_object_mut().unwrap();
    let key = parents.keys().next().expect("top solution uses an SBS").clone();
    parents.remove(&key);
    let bad = write_json(tmp.path(), "bad_solution.json", &doc);
    let out = meshdeploy(&["check", p(&scenario), p(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("sbs-backhaul"), "{}", stdout(&out));
}

#[test]
fn check_reports_hop_limit() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_json(
        tmp.path(),
        "gen.json",
        &serde_json::json!({
            "n_relays": 0,
            "n_machines": 0,
            "explicit_ban_sites": [{ "x": 5.0, "y": 25.0 }],
            "explicit_sbs_sites": [{ "x": 15.0, "y": 25.0 }, { "x": 25.0, "y": 25.0 }],
            "explicit_ma_sites": []
        }),
    );
    let scenario = gen(&tmp.path().join("s"), &["--preset", "tiny", "--config", p(&cfg)]);
    let doc = serde_json::json!({
        "deployment": { "bans": [0], "sbss": [0, 1], "mas": [] },
        "cover": {},
        "parents": { "0": "ban:0", "1": "sbs:0" },
        "ma_links": {},
        "machines": {},
        "objectives": { "f1": 12.0, "f2": 25, "f3": 0, "fc": 25.0 }
    });
    let sol = write_json(tmp.path(), "hops.json", &doc);
    let out = meshdeploy(&["check", p(&scenario), p(&sol)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("hop-limit"), "{}", stdout(&out));
}

#[test]
fn oracle_agrees_on_tiny_fixture() {
    let tmp = TempDir::new().unwrap();
    let out = meshdeploy(&["oracle", p(&fixture("tiny_scenario.json")), "--out", p(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let status = column(&tmp.path().join("agreement.csv"), "status");
    assert!(!status.is_empty());
    assert!(status.iter().all(|s| s == "match" || s == "dominated"), "{status:?}");
    assert!(column(&tmp.path().join("oracle_front.csv"), "source").iter().all(|s| s == "oracle"));
}

#[test]
fn oracle_compares_an_existing_front() {
    let tmp = TempDir::new().unwrap();
    let scenario = fixture("tiny_scenario.json");
    assert_eq!(code(&solve(&scenario, &tmp.path().join("run"), &[])), 0);
    let front = tmp.path().join("run/front.csv");
    let out = meshdeploy(&["oracle", p(&scenario), "--front", p(&front), "--out", p(&tmp.path().join("or"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(column(&tmp.path().join("or/agreement.csv"), "status").iter().all(|s| s == "match"));
}

#[test]
fn oracle_refuses_large_instances() {
    let tmp = TempDir::new().unwrap();
    let scenario = gen(&tmp.path().join("s"), &["--preset", "paper-fig2"]);
    let out = meshdeploy(&["oracle", p(&scenario), "--out", p(&tmp.path().join("or"))]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("refused"), "{}", stderr(&out));
}

#[test]
fn oracle_on_empty_scenario() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_json(
        tmp.path(),
        "gen.json",
        &serde_json::json!({
            "n_machines": 0,
            "explicit_ban_sites": [],
            "explicit_sbs_sites": [],
            "explicit_ma_sites": []
        }),
    );
    let scenario = gen(&tmp.path().join("s"), &["--preset", "tiny", "--config", p(&cfg)]);
    let out = meshdeploy(&["oracle", p(&scenario), "--out", p(&tmp.path().join("or"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(column(&tmp.path().join("or/agreement.csv"), "status"), ["match"]);
    assert_eq!(read_rows(&tmp.path().join("or/heuristic_front.csv")).len(), 1);
}

#[test]
fn report_writes_gap_table_and_plot_data() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&solve(&fixture("tiny_scenario.json"), tmp.path(), &[])), 0);
    let out = meshdeploy(&["report", p(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("max ratio:"));
    assert_eq!(headers(&tmp.path().join("gap.csv")), ["epsilon", "best_fc", "bound", "ratio"]);
    let series = column(&tmp.path().join("plot.csv"), "series");
    assert!(series.contains(&"solution".to_string()) && series.contains(&"bound".to_string()));
}

#[test]
fn report_with_single_entry_front() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("front.csv"),
        "epsilon,f1,f2,f3,fc,bound,heuristic_bound,solution_file,source\n10.0,10.0,20,0,20.0,10.0,true,,heuristic\n",
    )
    .unwrap();
    fs::write(tmp.path().join("bounds.csv"), "epsilon,bound,relaxed_max,heuristic_bound\n10.0,10.0,10.0,true\n").unwrap();
    let out = meshdeploy(&["report", p(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = read_rows(&tmp.path().join("gap.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][3], "2.0");
}

#[test]
fn report_without_bounds_is_an_error() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&solve(&fixture("tiny_scenario.json"), tmp.path(), &[])), 0);
    fs::remove_file(tmp.path().join("bounds.csv")).unwrap();
    let out = meshdeploy(&["report", p(tmp.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bound file"), "{}", stderr(&out));
}

#[test]
fn bad_flags_exit_with_two() {
    assert_eq!(code(&meshdeploy(&["solve"])), 2);
    assert_eq!(code(&meshdeploy(&["gen", "--out", "x", "--preset", "nope"])), 2);
    let tmp = TempDir::new().unwrap();
    let out = solve(&fixture("tiny_scenario.json"), tmp.path(), &["--delta-c", "0"]);
    assert_eq!(code(&out), 2);
}
