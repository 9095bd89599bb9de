use std::path::Path;
use std::process::{Command, Output};

use endorse_core::data::save_edge_list;
use endorse_core::inference::InteractionSequence;
use endorse_core::model::EndorsementState;
use endorse_core::sim::run_observed;
use endorse_core::{ModelParams, ScoreKind};

fn endorse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_endorse-dyn"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn simulate_args(out: &str) -> Vec<&str> {
    vec![
        "simulate", "--score", "springrank", "--n", "6", "--lambda", "0.99", "--beta1", "3", "--beta2", "-1",
        "--steps", "200", "--seed", "11", "--out", out,
    ]
}

#[test]
fn missing_key_is_a_usage_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = endorse(&["simulate", "--score", "pagerank", "--n", "5", "--lambda", "0.9", "--steps", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("'beta1'"), "{}", stderr(&o));
}

#[test]
fn simulate_is_deterministic_and_run_json_reproduces_it() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for out in [&a, &b] {
        let o = endorse(&simulate_args(out.to_str().unwrap()));
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["trajectory.csv", "final_adjacency.csv", "trajectory.json"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
    let cfg = a.join("run.json");
    let o = endorse(&["simulate", "--config", cfg.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(&a.join("trajectory.csv")), read(&c.join("trajectory.csv")));

    let traj = read(&a.join("trajectory.csv"));
    assert!(traj.starts_with("t,node,gamma\n"));
    assert_eq!(traj.lines().count(), 1 + 200 * 6);
    assert!(!traj.contains('\r'));
}

#[test]
fn key_value_config_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    std::fs::write(&cfg, "score=rootdegree\nn=5\nlambda=0.9\nbeta1=1.0\nsteps=20\nseed=4\n").unwrap();
    let out = dir.path().join("o");
    let o = endorse(&["simulate", "--config", cfg.to_str().unwrap(), "--beta1", "2.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run: serde_json::Value = serde_json::from_str(&read(&out.join("run.json"))).unwrap();
    assert_eq!(run["config"]["beta1"], "2.5");
    assert_eq!(run["config"]["score"], "rootdegree");
    assert_eq!(run["config"]["m"], "1");
}

#[test]
fn malformed_csv_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "period,source,target,count\n1,a,b,2\n2,b,a,two\n").unwrap();
    let out = dir.path().join("o");
    let o = endorse(&["fit", "--data", data.to_str().unwrap(), "--score", "springrank", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn bad_thread_count_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_endorse-dyn"))
        .args(["bifurcate", "--score", "pagerank", "--grid-beta1", "1:1:1", "--out", "unused"])
        .env("ENDORSE_DYN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

fn branch_rows(path: &Path) -> Vec<Vec<String>> {
    read(path)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn single_point_grid_gives_rows_at_that_point_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = endorse(&["bifurcate", "--score", "springrank", "--grid-beta1", "1.5:9:1", "--k", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = branch_rows(&out.join("branches.csv"));
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[0] == "1.5"));
    let egal: Vec<_> = rows.iter().filter(|r| r[1] == "0").collect();
    assert_eq!(egal.len(), 1);
    assert_eq!(egal[0][4], "true");
}

#[test]
fn pagerank_stability_switch_at_critical_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = endorse(&["bifurcate", "--score", "pagerank", "--grid-beta1", "0.5:2:31", "--k", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let critical = 1.0 / 0.85;
    for r in branch_rows(&out.join("branches.csv")).iter().filter(|r| r[1] == "0") {
        let b1: f64 = r[0].parse().unwrap();
        assert_eq!(r[4] == "true", b1 < critical, "beta1 {b1}");
    }
}

#[test]
fn overlay_writes_simulated_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = endorse(&[
        "bifurcate", "--score", "springrank", "--n", "4", "--grid-beta1", "1:3:2", "--k", "1", "--overlay",
        "--lambda", "0.99", "--steps", "3000", "--window", "500", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = read(&out.join("overlay.csv"));
    assert!(text.starts_with("beta1,node,gamma,nearest_stable_distance\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 4);
    let run: serde_json::Value = serde_json::from_str(&read(&out.join("run.json"))).unwrap();
    assert_eq!(run["config"]["overlay"], "true");
}

fn synthetic(path: &Path, seed: u64) {
    let (n, m, periods) = (8, 20, 60);
    let params = ModelParams::new(ScoreKind::SpringRank, 0.9, 2.5, -1.0, m).with_seed(seed);
    let a0 = EndorsementState::uniform(n, m).unwrap().into_adjacency();
    let (_, deltas) = run_observed(&params, &a0, periods).unwrap();
    let seq = InteractionSequence::from_deltas(None, deltas).unwrap();
    save_edge_list(&seq, path).unwrap();
}

#[test]
fn compare_flags_springrank_on_springrank_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("synthetic.csv");
    synthetic(&data, 5);
    let out = dir.path().join("o");
    let o = endorse(&["compare", "--data", data.to_str().unwrap(), "--restarts", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cmp: serde_json::Value = serde_json::from_str(&read(&out.join("comparison.json"))).unwrap();
    assert_eq!(cmp["best"], "springrank");
    assert_eq!(cmp["dataset"], "synthetic");
    let table = read(&out.join("fit_table.csv"));
    assert!(table.starts_with("dataset,score,lambda,se_lambda,beta1,se_beta1,beta2,se_beta2,loglik\n"));
    assert_eq!(table.lines().count(), 4);
    assert_eq!(read(&out.join("criticality.csv")).lines().count(), 4);
}

#[test]
fn fit_writes_result_table_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("synthetic.csv");
    synthetic(&data, 9);
    let out = dir.path().join("o");
    let args = ["fit", "--data", data.to_str().unwrap(), "--score", "springrank", "--restarts", "3", "--out", out.to_str().unwrap()];
    let o = endorse(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let fit: serde_json::Value = serde_json::from_str(&read(&out.join("fit.json"))).unwrap();
    let lambda = fit["lambda"].as_f64().unwrap();
    assert!((0.0..1.0).contains(&lambda));
    assert_eq!(fit["restarts"].as_array().unwrap().len(), 3);
    let report = read(&out.join("criticality.csv"));
    assert!(report.lines().nth(1).unwrap().contains("springrank"));

    let again = dir.path().join("again");
    let cfg = out.join("run.json");
    let o = endorse(&["fit", "--config", cfg.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(&out.join("fit.json")), read(&again.join("fit.json")));
}

#[test]
fn convert_placements_with_direction() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("placements.csv");
    std::fs::write(&input, "period,degree,hiring\n1990,mit,ucla\n1991,ucla,mit\n1991,mit,mit\n").unwrap();
    let out = dir.path().join("o");
    let o = endorse(&["convert", "--from", "placements", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let edges = read(&out.join("edges.csv"));
    assert!(edges.contains("1990,ucla,mit,1\n"), "{edges}");

    let out2 = dir.path().join("p");
    let o = endorse(&[
        "convert", "--from", "placements", "--direction", "degree_to_hiring", "--input", input.to_str().unwrap(),
        "--out", out2.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(read(&out2.join("edges.csv")).contains("1990,mit,ucla,1\n"));

    let o = endorse(&["convert", "--from", "tweets", "--input", input.to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
