use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ise() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ise"))
}

fn case(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/cases").join(name)
}

fn run(args: &[&str]) -> Output {
    ise().args(args).output().expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn run_writes_reports_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let outs: Vec<PathBuf> = ["a", "b"].iter().map(|s| dir.path().join(s)).collect();
    for out in &outs {
        let o = run(&["run", case("toy2.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", text(&o.stderr));
        assert!(text(&o.stdout).contains("mko"));
    }
    for f in ["summary.json", "mko_bounds.csv", "iko_bounds.csv"] {
        let a = std::fs::read(outs[0].join(f)).unwrap();
        let b = std::fs::read(outs[1].join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between reruns");
    }
    let csv = std::fs::read_to_string(outs[0].join("mko_bounds.csv")).unwrap();
    assert!(csv.starts_with("bus,phase,lo,hi,truth,mc_min,mc_max\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(outs[0].join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["methods"][0]["method"], "mko");
    assert_eq!(summary["methods"][0]["truth_contained"], true);
    assert_eq!(summary["methods"][0]["mc_contained"], true);
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&[
        "run",
        case("toy4.json").to_str().unwrap(),
        "--solver",
        "mko",
        "--solver",
        "mc",
        "--trials",
        "25",
        "--seed",
        "9",
        "--line-uncertainty",
        "0.1",
        "--model",
        "IV",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let stdout = text(&o.stdout);
    assert!(stdout.contains("model IV"), "{stdout}");
    assert!(stdout.contains("interval H"), "{stdout}");
    assert!(stdout.contains("mc25"), "{stdout}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["interval_line_parameters"], true);
    assert_eq!(summary["monte_carlo"]["seed"], 9);
    assert_eq!(summary["methods"].as_array().unwrap().len(), 1);
}

#[test]
fn mc_without_trials_is_a_usage_error() {
    let o = run(&["run", case("toy2.json").to_str().unwrap(), "--solver", "mc", "--trials", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("mc_trials"));
}

#[test]
fn lp_is_refused_with_an_explanation() {
    let o = run(&["run", case("toy4.json").to_str().unwrap(), "--solver", "lp"]);
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("LP"), "{}", text(&o.stderr));
}

#[test]
fn solver_failure_gives_nonzero_exit_and_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    // The vertex hull refuses systems with more than 20 interval entries.
    let o = run(&[
        "run",
        case("ieee13_case1.json").to_str().unwrap(),
        "--solver",
        "mko",
        "--solver",
        "hull",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("hull"), "{}", text(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert!(summary.contains("failed_methods"));
}

#[test]
fn audit_counts_the_two_bus_toy() {
    let o = run(&["audit", case("toy2.json").to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let line = text(&o.stdout)
        .lines()
        .find(|l| l.starts_with("three-phase"))
        .unwrap()
        .to_string();
    let cols: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(cols[1], "4", "{line}");
}

#[test]
fn oracle_checks_a_dumped_system() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        case("toy2.json").to_str().unwrap(),
        "--solver",
        "mko",
        "--dump-system",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let system = dir.path().join("system.txt");
    for solver in ["mko", "krawczyk", "iko", "ige"] {
        let o = run(&["oracle", system.to_str().unwrap(), "--solver", solver]);
        assert!(o.status.success(), "{solver}: {}", text(&o.stderr));
        assert!(text(&o.stdout).contains("contains the hull"));
    }
    let o = run(&["oracle", system.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(std::fs::read_to_string(dir.path().join("hull.csv")).unwrap().starts_with("index,lo,hi\n"));
}

#[test]
fn mc_subcommand_writes_the_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "mc",
        case("toy3.json").to_str().unwrap(),
        "--trials",
        "30",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("mc_envelope.csv")).unwrap();
    assert!(csv.starts_with("bus,phase,truth,mc_min,mc_max\n"));
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').skip(3).map(|x| x.parse().unwrap()).collect();
        assert!(v[0] <= v[1], "{line}");
    }
}

#[test]
fn unknown_solver_is_rejected() {
    let o = run(&["run", case("toy2.json").to_str().unwrap(), "--solver", "newton"]);
    assert_eq!(o.status.code(), Some(2));
}
