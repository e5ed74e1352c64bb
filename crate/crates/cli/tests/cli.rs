use std::path::Path;
use std::process::{Command, Output};

use genmakespan::instances::{gen_random, FamilyKind, InstanceFile, Payload, ResultFile, SizeProfile};
use genmakespan::{DiscreteDistribution, SetSystemInstance};
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_genmakespan"));
    cmd.env("RUST_LOG", "error");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FAST: [&str; 6] = ["--inner-samples", "2000", "--samples", "5000", "--repetitions", "16"];

fn table(text: &str) -> Vec<Vec<f64>> {
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "parameter\tlp_bound\tmakespan\tstderr\tratio\tmax_lp_ratio"
    );
    lines
        .map(|l| l.split('\t').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn solve_single_task() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("one.json");
    let sys = SetSystemInstance::new(1, vec![vec![0]]).unwrap();
    InstanceFile::new("one", Payload::Explicit(sys), vec![DiscreteDistribution::constant(1.5).unwrap()], 1)
        .save(&inst)
        .unwrap();
    let out = run(&["solve", path(&inst)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let result = ResultFile::from_json(&stdout(&out)).unwrap();
    assert_eq!(result.solution.chosen, vec![0]);
    assert_eq!(result.solution.estimate.mean, 1.5);
    assert_eq!(result.config.b, 4.0);
    assert_eq!(result.config.final_samples, 100_000);
}

#[test]
fn missing_file_exits_with_2() {
    let out = run(&["solve", "/nonexistent/instance.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert!(out.stdout.is_empty());
}

#[test]
fn malformed_file_exits_with_2() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("bad.json");
    std::fs::write(&inst, "{\"version\": 1, \"name\": ").unwrap();
    assert_eq!(run(&["solve", path(&inst)]).status.code(), Some(2));
}

#[test]
fn solve_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("tree.json");
    let gen = run(&[
        "gen", "random", "--family", "tree", "-n", "14", "-t", "6", "--seed", "5", "-o", path(&inst),
    ]);
    assert!(gen.status.success());
    let outputs: Vec<Vec<u8>> = ["1", "3"]
        .iter()
        .map(|threads| {
            let file = dir.path().join(format!("r{threads}.json"));
            let mut args = vec!["--threads", threads, "solve", path(&inst), "--seed", "9", "-o", path(&file)];
            args.extend(FAST);
            assert!(run(&args).status.success());
            std::fs::read(&file).unwrap()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn gen_writes_loadable_instances() {
    let dir = TempDir::new().unwrap();
    for args in [
        vec!["gen", "line-gap", "-H", "3"],
        vec!["gen", "general-gap", "-q", "3"],
        vec!["gen", "random", "--family", "disks", "-n", "5", "-t", "2", "--profile", "finite:2:1.5"],
    ] {
        let out = run(&args);
        assert!(out.status.success(), "{args:?}");
        let file = InstanceFile::from_json(&stdout(&out)).unwrap();
        let saved = dir.path().join("x.json");
        let mut with_output = args.clone();
        with_output.extend(["-o", path(&saved)]);
        assert!(run(&with_output).status.success());
        assert_eq!(InstanceFile::load(&saved).unwrap(), file);
    }
    assert_eq!(run(&["gen", "line-gap", "-H", "0"]).status.code(), Some(2));
    assert_eq!(run(&["gen", "random", "--family", "blob", "-n", "3", "-t", "1"]).status.code(), Some(2));
}

#[test]
fn general_gap_sweep() {
    let out = run(&["gap-experiment", "general", "--values", "2,3,4", "--samples", "50000"]);
    assert!(out.status.success());
    let rows = table(&stdout(&out));
    assert_eq!(rows.len(), 3);
    for (row, q) in rows.iter().zip([2.0, 3.0, 4.0]) {
        assert_eq!(row[0], q);
        assert!((row[1] - f64::ln(q)).abs() < 1e-6);
        assert!(row[5] <= 1.0);
        // (1 - 1/e) q lower bound on the all-tasks makespan
        assert!(row[2] >= (1.0 - (-1.0f64).exp()) * q - 4.0 * row[3]);
    }
    // q / ln q is smallest near e, so growth starts at q = 3
    assert!(rows[2][4] > rows[1][4]);
}

#[test]
fn line_gap_sweep() {
    let out = run(&["gap-experiment", "line", "--values", "1,2,3", "--samples", "50000"]);
    let rows = table(&stdout(&out));
    assert_eq!(rows.len(), 3);
    for w in rows.windows(2) {
        assert!(w[1][2] >= w[0][2] - 3.0 * (w[0][3] + w[1][3]));
    }
    assert!(rows.iter().all(|r| r[5] <= 1.0 && r[2] >= 1.0));
}

#[test]
fn single_gap_row_parses() {
    let out = run(&["gap-experiment", "line", "--values", "2", "--samples", "1000"]);
    let rows = table(&stdout(&out));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].len(), 6);
}

fn oracle_ratio(dir: &Path, file: &InstanceFile, seed: &str) -> f64 {
    let inst = dir.join(format!("{}.json", file.name));
    file.save(&inst).unwrap();
    let ledger = dir.join("ledger.csv");
    let mut args = vec!["compare-oracle", path(&inst), "--seed", seed, "--ledger", path(&ledger)];
    args.extend(FAST);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    stdout(&out).trim().split('\t').nth(3).unwrap().parse().unwrap()
}

#[test]
fn oracle_with_everything_selected() {
    let dir = TempDir::new().unwrap();
    let file = gen_random(FamilyKind::Line, 8, &SizeProfile::default(), 8, 2).unwrap();
    assert_eq!(oracle_ratio(dir.path(), &file, "0"), 1.0);
}

#[test]
fn oracle_ratios_on_line_instances() {
    let dir = TempDir::new().unwrap();
    for seed in 0..10 {
        let file = gen_random(FamilyKind::Line, 10, &SizeProfile::default(), 5, 40 + seed).unwrap();
        let ratio = oracle_ratio(dir.path(), &file, "1");
        assert!((1.0..=10.0).contains(&ratio), "{}: {ratio}", file.name);
    }
    let ledger = std::fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    let lines: Vec<&str> = ledger.lines().collect();
    assert_eq!(lines[0], "instance,n,t,seed,algorithm,optimal,ratio");
    assert_eq!(lines.len(), 11);
}

#[test]
fn oracle_resource_limit_exits_with_3() {
    let dir = TempDir::new().unwrap();
    let file = gen_random(FamilyKind::Line, 40, &SizeProfile::default(), 20, 1).unwrap();
    let inst = dir.path().join("big.json");
    file.save(&inst).unwrap();
    let mut args = vec!["compare-oracle", path(&inst), "--ledger", "/dev/null"];
    args.extend(FAST);
    assert_eq!(run(&args).status.code(), Some(3));
}
