use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use magnav::grid::load_grid;
use magnav::harness::TrajectoryLog;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magnav")).args(args).output().expect("binary runs")
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn write_reference_map(dir: &Path) -> String {
    let map = p(dir, "map.csv");
    assert!(run(&["synth", "--reference", "--out", &map]).status.success());
    map
}

#[test]
fn help_and_usage_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["simulate", "--help"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["teleport"]).status.code(), Some(1));
    assert_eq!(run(&["synth", "--out", "x.csv"]).status.code(), Some(1));
    assert_eq!(run(&["synth", "--reference", "--spec", "a", "--out", "x.csv"]).status.code(), Some(1));
    assert_eq!(run(&["plan", "--map", "m.csv", "--out", "p.csv", "--goal", "1;2"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--mode", "zigzag", "--out", "t.csv"]).status.code(), Some(1));
}

#[test]
fn synth_entropy_plan_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let map = write_reference_map(d);
    let grid = load_grid::<f64>(&std::fs::read_to_string(&map).unwrap()).unwrap();
    assert_eq!((grid.nx(), grid.ny()), (136, 71));

    let out = run(&["entropy", "--in", &map, "--out", &p(d, "e.csv")]);
    assert!(out.status.success());
    let points = String::from_utf8(out.stdout).unwrap();
    assert!(points.starts_with("x,y,entropy_bits,weight\n"));
    assert!(points.lines().count() > 1);

    let out = run(&["plan", "--map", &map, "--start", "-2.75,-1.25", "--goal", "2.5,0", "--out", &p(d, "path.csv")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("converged=true\n"));
    let path = std::fs::read_to_string(d.join("path.csv")).unwrap();
    assert_eq!(path.lines().nth(1), Some("-2.75,-1.25"));
    assert_eq!(path.lines().last(), Some("2.5,0"));
}

#[test]
fn simulate_outputs_parse_and_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.txt"), "max_steps = 120\nparticles = 300\n").unwrap();
    let go = |name: &str| {
        let out = run(&["simulate", "--config", &p(d, "cfg.txt"), "--seed", "5", "--out", &p(d, name)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (String::from_utf8(out.stdout).unwrap(), std::fs::read_to_string(d.join(name)).unwrap())
    };
    let (summary, traj) = go("a.csv");
    assert_eq!(go("b.csv"), (summary.clone(), traj.clone()));
    assert!(summary.starts_with("mode=entropy_planner\nseed=5\n"));
    assert!(summary.contains("termination=max_steps\n"));
    assert!(summary.contains("steps=120\n"));
    assert_eq!(TrajectoryLog::from_csv(&traj).unwrap().rows.len(), 120);

    let other = run(&["simulate", "--config", &p(d, "cfg.txt"), "--seed", "6", "--out", &p(d, "c.csv")]);
    assert!(other.status.success());
    assert_ne!(std::fs::read_to_string(d.join("c.csv")).unwrap(), traj);
}

#[test]
fn data_errors_exit_2_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let map = write_reference_map(d);
    std::fs::write(d.join("bad.cfg"), "particles = 0\n").unwrap();
    std::fs::write(d.join("both.cfg"), "map_file = a.csv\nsynth_spec = b.synth\n").unwrap();
    let before = files(d);
    let missing_dir = p(d, "nowhere/p.csv");
    let cases: Vec<Vec<String>> = vec![
        vec!["entropy".into(), "--in".into(), p(d, "absent.csv"), "--out".into(), p(d, "e.csv")],
        vec![
            "entropy".into(),
            "--in".into(),
            map.clone(),
            "--bin".into(),
            "0.01".into(),
            "--out".into(),
            p(d, "e.csv"),
        ],
        // The first output would succeed; the second cannot, so neither is written.
        vec![
            "entropy".into(),
            "--in".into(),
            map.clone(),
            "--out".into(),
            p(d, "e.csv"),
            "--points".into(),
            missing_dir,
        ],
        vec![
            "plan".into(),
            "--map".into(),
            map.clone(),
            "--start".into(),
            "-9,0".into(),
            "--out".into(),
            p(d, "path.csv"),
        ],
        vec!["simulate".into(), "--config".into(), p(d, "bad.cfg"), "--out".into(), p(d, "t.csv")],
        vec!["simulate".into(), "--config".into(), p(d, "both.cfg"), "--out".into(), p(d, "t.csv")],
    ];
    for args in &cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8(out.stderr).unwrap().starts_with("error: "));
        assert!(out.stdout.is_empty());
        assert_eq!(files(d), before, "{args:?} left files behind");
    }
}

#[test]
fn outputs_replace_existing_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let target = d.join("map.csv");
    std::fs::write(&target, "stale").unwrap();
    write_reference_map(d);
    assert!(std::fs::read_to_string(&target).unwrap().starts_with("# grid "));
    assert_eq!(files(d), vec![target]);
}
