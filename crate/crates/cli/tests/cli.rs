use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn v2a(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_v2a"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, kind: &str, seed: &str, frames: bool) -> std::path::PathBuf {
    let spec = dir.join(format!("{kind}_{seed}.json"));
    assert!(v2a(&[
        "sample-spec",
        "--kind",
        kind,
        "--seed",
        seed,
        "--out",
        p(&spec)
    ])
    .status
    .success());
    let out = dir.join(format!("{kind}_{seed}"));
    let mut args = vec!["simulate", "--spec", p(&spec), "--out", p(&out)];
    if frames {
        args.push("--frames");
    }
    assert!(v2a(&args).status.success());
    out
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.jsonl");
    fs::write(
        &good,
        "{\"video_id\":\"v\",\"frame_index\":0,\"detections\":[{\"class_name\":\"dog\",\"score\":0.8,\"bbox\":[1,2,3,4]}]}\n",
    )
    .unwrap();
    let o = v2a(&["validate", "--detections", p(&good)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("1 frames"));

    let bad = dir.path().join("bad.jsonl");
    fs::write(
        &bad,
        "{\"video_id\":\"v\",\"frame_index\":0,\"detections\":[{\"class_name\":\"dog\",\"score\":0.8,\"bbox\":[5,2,3,4]}]}\n",
    )
    .unwrap();
    let o = v2a(&["validate", "--detections", p(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bbox"));

    let o = v2a(&[
        "validate",
        "--detections",
        p(&dir.path().join("absent.jsonl")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = v2a(&["config-dump"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("hold_limit = 30"));
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, &text).unwrap();
    let again = v2a(&["config-dump", "--config", p(&cfg)]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);

    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(
        v2a(&["config-dump", "--config", p(&cfg)]).status.code(),
        Some(1)
    );
}

#[test]
fn run_and_evaluate_a_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let sc = simulate(dir.path(), "ENTERS_LANE", "7", false);
    let alerts = dir.path().join("alerts.jsonl");
    let o = v2a(&[
        "run",
        "--detections",
        p(&sc.join("detections.jsonl")),
        "--lanes",
        p(&sc.join("lanes.jsonl")),
        "--out",
        p(&alerts),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = fs::read_to_string(&alerts).unwrap();
    let det_lines = fs::read_to_string(sc.join("detections.jsonl"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(log.lines().count(), det_lines);
    assert!(log.contains("STOP_PREDICTED") && log.contains("STOP_IN_LANE"));

    for mode in ["decisions", "episodes"] {
        let report = dir.path().join(format!("alerts_{mode}.json"));
        let o = v2a(&[
            "eval-alerts",
            "--alerts",
            p(&alerts),
            "--truth",
            p(&sc.join("truth.json")),
            "--far-mode",
            mode,
            "--report",
            p(&report),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let r: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(r["padr"], 100.0);
        assert_eq!(r["far"], 0.0);
        assert_eq!(r["far_mode"], mode);
    }

    let report = dir.path().join("det.json");
    let o = v2a(&[
        "eval-det",
        "--pred",
        p(&sc.join("detections.jsonl")),
        "--truth",
        p(&sc.join("truth.json")),
        "--report",
        p(&report),
    ]);
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["classes"][0]["ap"], 1.0);
}

#[test]
fn run_needs_exactly_one_lane_source() {
    let dir = tempfile::tempdir().unwrap();
    let sc = simulate(dir.path(), "STATIC_OFF_LANE", "1", false);
    let dets = sc.join("detections.jsonl");
    let out = dir.path().join("a.jsonl");
    assert_eq!(
        v2a(&["run", "--detections", p(&dets), "--out", p(&out)])
            .status
            .code(),
        Some(2)
    );
    let o = v2a(&[
        "run",
        "--detections",
        p(&dets),
        "--lanes",
        p(&sc.join("lanes.jsonl")),
        "--frames",
        p(dir.path()),
        "--out",
        p(&out),
    ]);
    assert!(!o.status.success());
}

#[test]
fn lane_mismatch_and_missing_frames_are_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let sc = simulate(dir.path(), "STATIC_OFF_LANE", "2", false);
    let dets = sc.join("detections.jsonl");
    let lanes = fs::read_to_string(sc.join("lanes.jsonl")).unwrap();
    // drop the first detection line so lane frame 0 precedes detection frame 1
    let text = fs::read_to_string(&dets).unwrap();
    let shifted = dir.path().join("shifted.jsonl");
    fs::write(
        &shifted,
        text.lines()
            .skip(1)
            .map(|l| format!("{l}\n"))
            .collect::<String>(),
    )
    .unwrap();
    let lane_file = dir.path().join("lanes.jsonl");
    fs::write(&lane_file, lanes).unwrap();
    let o = v2a(&[
        "run",
        "--detections",
        p(&shifted),
        "--lanes",
        p(&lane_file),
        "--out",
        p(&dir.path().join("a")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("detection frame 1") && err.contains("lane file frame 0"),
        "{err}"
    );

    let empty = dir.path().join("empty_frames");
    fs::create_dir(&empty).unwrap();
    let o = v2a(&[
        "run",
        "--detections",
        p(&dets),
        "--frames",
        p(&empty),
        "--out",
        p(&dir.path().join("b")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lanes_subcommand_recovers_rendered_lane() {
    let dir = tempfile::tempdir().unwrap();
    let sc = simulate(dir.path(), "STATIC_OFF_LANE", "3", true);
    let out = dir.path().join("lanes.jsonl");
    let o = v2a(&["lanes", "--frames", p(&sc.join("frames")), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let frames = fs::read_dir(sc.join("frames")).unwrap().count();
    assert_eq!(text.lines().count(), frames);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    let lx = first["left"][0][0].as_f64().unwrap();
    assert!((lx - 100.0).abs() < 5.0, "{lx}");
}

#[test]
fn simulate_rejects_invalid_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    assert!(v2a(&[
        "sample-spec",
        "--kind",
        "ENTERS_LANE",
        "--seed",
        "1",
        "--out",
        p(&spec)
    ])
    .status
    .success());
    let mut v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&spec).unwrap()).unwrap();
    v["frame_count"] = 3.into();
    fs::write(&spec, v.to_string()).unwrap();
    let o = v2a(&[
        "simulate",
        "--spec",
        p(&spec),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
