//! End-to-end runs of the `occnav` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn occnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_occnav"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn bench_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = occnav(&["bench", "--n", "100", "--seed", "7", "--out", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 100 + 1);
}

#[test]
fn detect_prints_json_with_the_documented_keys() {
    let o = occnav(&["detect", "--map", "builtin:doorway", "--pose", "4,4,0", "--out", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 2);
    let keys: Vec<&str> = arr[0].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["x", "y", "direction", "corner_x", "corner_y", "distance"]);
}

#[test]
fn detect_csv_and_svg_outputs() {
    let csv = occnav(&["detect", "--map", "builtin:doorway", "--pose", "4,4,0", "--out", "csv"]);
    assert!(csv.status.success());
    let text = stdout(&csv);
    assert_eq!(text.lines().next().unwrap(), "x,y,direction,corner_x,corner_y,distance");
    assert_eq!(text.lines().count(), 3);
    let svg = occnav(&["detect", "--map", "builtin:doorway", "--pose", "4,4,0", "--out", "svg"]);
    let text = stdout(&svg);
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches("class=\"detection\"").count(), 2);
}

#[test]
fn negative_pose_values_parse() {
    let o = occnav(&["scan", "--map", "builtin:emergence", "--pose", "1,-0.5,-1.2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "index,angle_rad,range_m");
    assert_eq!(text.lines().count(), 721);
}

#[test]
fn detect_params_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("params.json");
    std::fs::write(&p, r#"{"front_limit": 1.0}"#).unwrap();
    let o = occnav(&["detect", "--map", "builtin:doorway", "--pose", "4,4,0", "--params", p.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.as_array().unwrap().is_empty());
}

#[test]
fn classify_reports_the_passage_kind() {
    for (map, pose, kind) in [
        ("builtin:doorway", "5.3,4,0", "Doorway"),
        ("builtin:wall", "4,2.5,0", "WallPassage"),
        ("builtin:pillar", "7.1,3,0", "Pillar"),
        ("builtin:doorway", "2.5,4,0", "NoPassage"),
    ] {
        let o = occnav(&["classify", "--map", map, "--pose", pose]);
        assert!(o.status.success());
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["kind"], kind, "{map} {pose}");
    }
}

#[test]
fn simulate_writes_outputs_and_render_reads_them_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let scenario = scenarios_dir().join("l_corner.json");
    let o = occnav(&["simulate", "--scenario", scenario.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let record = std::fs::read_to_string(out.join("record.csv")).unwrap();
    assert_eq!(
        record.lines().next().unwrap(),
        "t,x,y,vx,vy,mode,n_detections,min_dist_inv,min_dist_vis"
    );
    assert!(std::fs::read_to_string(out.join("path.svg")).unwrap().starts_with("<svg"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["completed"], true);

    let fig = dir.path().join("fig.svg");
    let map = scenarios_dir().join("maps/l_corner.txt");
    let o = occnav(&[
        "render",
        "--in",
        out.join("record.csv").to_str().unwrap(),
        "--out",
        fig.to_str().unwrap(),
        "--map",
        map.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(fig).unwrap();
    let polyline = svg.lines().find(|l| l.contains("class=\"path\"")).unwrap();
    let points = polyline.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    assert_eq!(points.split_whitespace().count(), record.lines().count() - 1);
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = scenarios_dir().join("emergence.json");
    let mut records = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = occnav(&["simulate", "--scenario", scenario.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success());
        records.push(std::fs::read(out.join("record.csv")).unwrap());
    }
    assert_eq!(records[0], records[1]);
}

#[test]
fn planning_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // goal sealed off in a closed pocket: no seed path exists
    let map = dir.path().join("pocket.txt");
    let mut text = String::from("20 10 0.5 0 0\n");
    for row in 0..10 {
        let line: String = (0..20).map(|c| if c == 12 || (row == 0 && c > 12) { '#' } else { '.' }).collect();
        text.push_str(&line);
        text.push('\n');
    }
    std::fs::write(&map, text).unwrap();
    let scenario = dir.path().join("s.json");
    std::fs::write(
        &scenario,
        r#"{"map": "pocket.txt", "start": [2.0, 2.5, 0.0], "goal": [8.0, 2.5], "duration_s": 5.0}"#,
    )
    .unwrap();
    let o = occnav(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("out/record.csv").exists());
}

#[test]
fn help_exits_cleanly() {
    let o = occnav(&["--help"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("simulate"));
}

#[test]
fn input_errors_exit_with_one() {
    let bad = [
        vec!["detect", "--map", "does-not-exist.txt", "--pose", "1,1,0"],
        vec!["detect", "--map", "builtin:doorway", "--pose", "1,1"],
        vec!["detect", "--map", "builtin:doorway", "--pose", "6.1,1,0"],
        vec!["detect", "--map", "builtin:nowhere", "--pose", "1,1,0"],
        vec!["bench", "--n", "0"],
        vec!["bench", "--bogus"],
        vec!["simulate", "--scenario", "missing.json", "--out-dir", "/tmp/never"],
    ];
    for args in bad {
        let o = occnav(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn shipped_scenarios_load() {
    let mut n = 0;
    for entry in std::fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let s = occnav::harness::Scenario::load(&path).unwrap();
        let grid = s.load_grid().unwrap();
        assert!(!grid.is_occupied(s.start_pose().unwrap().position), "{}", path.display());
        assert!(!grid.is_occupied(s.goal_point().unwrap()), "{}", path.display());
        n += 1;
    }
    assert!(n >= 5);
}
