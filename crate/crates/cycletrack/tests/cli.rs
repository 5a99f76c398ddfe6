use std::path::Path;
use std::process::{Command, Output};

use cycletrack_core::simulator::ScenarioTruth;
use serde_json::Value;

fn cycletrack(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cycletrack")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, v: Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p.display().to_string()
}

#[test]
fn simulate_is_deterministic_and_validates() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(&cycletrack(&["simulate", "--seed", "4", "--out", "a"], d));
    ok(&cycletrack(&["simulate", "--seed", "4", "--out", "b"], d));
    let (a, b) = (json(&d.join("a/manifest.json")), json(&d.join("b/manifest.json")));
    assert_eq!(a, b);
    assert_eq!(a["seeds"], serde_json::json!([4]));
    let names: Vec<&str> = a["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["gt.txt", "det.txt", "disp.csv", "truth.json"]);

    let cfg = write_config(d, "empty.json", serde_json::json!({"scenario": {"duration": 0}}));
    let out = cycletrack(&["simulate", "--config", &cfg, "--out", "c"], d);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty scenario"));
}

#[test]
fn heavy_drop_rate_stays_within_binomial_bounds() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(t.path(), "c.json", serde_json::json!({"scenario": {"lambda_fn": 0.4}}));
    ok(&cycletrack(&["simulate", "--config", &cfg, "--out", "s"], t.path()));
    let truth: ScenarioTruth = serde_json::from_str(&std::fs::read_to_string(t.path().join("s/truth.json")).unwrap()).unwrap();
    let n = truth.tracks.len() as f64;
    let dropped = truth.corruption_log.dropped_count() as f64;
    let sd = (n * 0.4 * 0.6).sqrt();
    assert!((dropped - 0.4 * n).abs() < 4.0 * sd, "{dropped} of {n}");
}

#[test]
fn noiseless_track_counts_every_cell() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let cfg = write_config(
        d,
        "c.json",
        serde_json::json!({
            "scenario": {"det_jitter": 0.0, "lambda_fp": 0.0, "lambda_fn": 0.0, "frame_noise": 0.0},
            "tracker": {"min_hits": 1}, "oracle_sigma": 0.0, "record_timing": false
        }),
    );
    ok(&cycletrack(&["simulate", "--config", &cfg, "--out", "s"], d));
    ok(&cycletrack(&["track", "--config", &cfg, "--det", "s/det.txt", "--out", "t"], d));
    let truth: ScenarioTruth = serde_json::from_str(&std::fs::read_to_string(d.join("s/truth.json")).unwrap()).unwrap();
    let count = json(&d.join("t/count.json"));
    assert_eq!(count["count"].as_u64().unwrap() as usize, truth.track_count());
    assert_eq!(count["tracklets_created"], count["count"]);
    assert_eq!(count["runtime_ms"], Value::Null);

    ok(&cycletrack(&["evaluate", "--config", &cfg, "--gt", "s/gt.txt", "--hyp", "t/hyp.txt", "--out", "t"], d));
    let m = json(&d.join("t/metrics.json"));
    assert_eq!((m["mota"].as_f64(), m["idsw"].as_u64()), (Some(100.0), Some(0)));

    ok(&cycletrack(&["track", "--config", &cfg, "--backward", "sidecar", "--det", "s/det.txt", "--out", "u"], d));
    assert_eq!(json(&d.join("u/count.json"))["count"], count["count"]);
}

#[test]
fn track_records_mode_and_reports_missing_inputs() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(&cycletrack(&["simulate", "--out", "s"], d));
    ok(&cycletrack(&["track", "--fusion-mode", "sort_only", "--det", "s/det.txt", "--out", "t"], d));
    let c = json(&d.join("t/count.json"));
    assert_eq!(c["mode"], "sort_only");
    assert_eq!(c["backward"], Value::Null);
    assert!(c["runtime_ms"].as_f64().unwrap() >= 0.0);
    assert!(c["frames_per_second"].as_f64().unwrap() > 0.0);
    let v = std::fs::read_to_string(d.join("t/velocity.csv")).unwrap();
    assert!(v.starts_with("frame,velocity_px_per_frame\n2,"));

    let out = cycletrack(&["track", "--det", "nope/det.txt", "--out", "t"], d);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope/det.txt"));

    let out = cycletrack(&["track", "--backward", "ncc", "--det", "s/det.txt", "--out", "t"], d);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing displacement source"));

    std::fs::write(d.join("bad.txt"), "1,-1,1,1,2,2,0.9\n2,-1,1,1,2\n").unwrap();
    let out = cycletrack(&["track", "--fusion-mode", "sort_only", "--det", "bad.txt", "--out", "t"], d);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn evaluate_hand_instances() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    std::fs::write(d.join("gt.txt"), "1,1,8,7,6,6,1\n2,1,9,7,6,6,1\n3,1,10,7,6,6,1\n").unwrap();
    std::fs::write(d.join("hyp.txt"), "1,1,8,7,6,6,1\n3,2,10,7,6,6,1\n").unwrap();
    ok(&cycletrack(&["evaluate", "--gt", "gt.txt", "--hyp", "hyp.txt", "--out", "e"], d));
    let m = json(&d.join("e/metrics.json"));
    assert_eq!(m["mota"].as_f64(), Some(33.33));
    assert_eq!((m["fn"].as_u64(), m["idsw"].as_u64()), (Some(1), Some(1)));

    ok(&cycletrack(&["evaluate", "--gt", "gt.txt", "--hyp", "gt.txt", "--out", "s"], d));
    assert_eq!(json(&d.join("s/metrics.json"))["mota"].as_f64(), Some(100.0));

    std::fs::write(d.join("late.txt"), "5,3,10,7,6,6,1\n").unwrap();
    ok(&cycletrack(&["evaluate", "--gt", "gt.txt", "--hyp", "late.txt", "--out", "u"], d));
    let m = json(&d.join("u/metrics.json"));
    assert_eq!((m["fp"].as_u64(), m["fn"].as_u64()), (Some(1), Some(3)));
    let counts = std::fs::read_to_string(d.join("u/counts.csv")).unwrap();
    assert_eq!(counts.lines().last(), Some("5,1,1"));

    std::fs::write(d.join("empty.txt"), "").unwrap();
    let out = cycletrack(&["evaluate", "--gt", "empty.txt", "--hyp", "gt.txt", "--out", "u"], d);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty ground truth"));
}

#[test]
fn analyze_reports_frequency_and_degenerate_inputs() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(&cycletrack(&["simulate", "--out", "s"], d));
    ok(&cycletrack(&["track", "--det", "s/det.txt", "--out", "t"], d));
    ok(&cycletrack(&["evaluate", "--gt", "s/gt.txt", "--hyp", "t/hyp.txt", "--out", "t"], d));
    ok(&cycletrack(&["analyze", "--velocity", "t/velocity.csv", "--counts", "t/counts.csv", "--out", "t"], d));
    let a = json(&d.join("t/analysis.json"));
    assert!((a["dominant_freq"].as_f64().unwrap() - 1.0).abs() < 0.05);
    assert!(a["correlation_warning"].as_str().unwrap().contains("1 count pair"));
    assert!(a["count_error_curve"].as_array().unwrap().len() == 20);
    for svg in ["velocity.svg", "count_error.svg", "correlation.svg"] {
        let s = std::fs::read_to_string(d.join("t").join(svg)).unwrap();
        assert!(s.starts_with("<svg") && s.contains("</svg>"), "{svg}");
    }
    let v = std::fs::read_to_string(d.join("t/velocity.svg")).unwrap();
    assert!(v.contains(">raw<") && v.contains(">lowpass<"));

    let flat: String = std::iter::once("frame,velocity_px_per_frame\n".to_string())
        .chain((2..=1000).map(|f| format!("{f},3.0\n")))
        .collect();
    std::fs::write(d.join("flat.csv"), flat).unwrap();
    ok(&cycletrack(&["analyze", "--velocity", "flat.csv", "--out", "f"], d));
    let a = json(&d.join("f/analysis.json"));
    assert_eq!(a["dominant_freq"], Value::Null);
    assert!(a["dominant_freq_error"].as_str().unwrap().contains("zero variance"));
    assert!(d.join("f/velocity.svg").exists());

    std::fs::write(d.join("pairs.csv"), "hyp,gt\n10,11\n20,19\n30,31\n40,40\n").unwrap();
    ok(&cycletrack(&["analyze", "--velocity", "t/velocity.csv", "--pairs", "pairs.csv", "--out", "p"], d));
    let a = json(&d.join("p/analysis.json"));
    assert!(a["correlation"]["gamma"].as_f64().unwrap() > 0.99);

    std::fs::write(d.join("short.csv"), "frame,velocity_px_per_frame\n2,1.0\n3,2.0\n").unwrap();
    let out = cycletrack(&["analyze", "--velocity", "short.csv", "--out", "x"], d);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("series too short"));
}

#[test]
fn pipeline_aggregates_seeds_and_modes() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(&cycletrack(&["pipeline", "--seed", "2", "--out", "one"], d));
    let agg = json(&d.join("one/aggregate.json"));
    let blocks = agg["blocks"].as_array().unwrap();
    assert_eq!(blocks.len(), 1);
    assert_eq!(blocks[0]["rows"].as_array().unwrap().len(), 1);
    assert_eq!(blocks[0]["counting_accuracy_pct"]["std"].as_f64(), Some(0.0));
    assert!(blocks[0]["correlation_warning"].is_string());

    let cfg = write_config(d, "c.json", serde_json::json!({"seeds": [0, 1, 2], "ablation": true}));
    ok(&cycletrack(&["pipeline", "--config", &cfg, "--out", "abl"], d));
    let agg = json(&d.join("abl/aggregate.json"));
    let modes: Vec<&str> = agg["blocks"].as_array().unwrap().iter().map(|b| b["mode"].as_str().unwrap()).collect();
    assert_eq!(modes, ["cycle", "ct_only", "sort_only"]);
    for b in agg["blocks"].as_array().unwrap() {
        assert_eq!(b["rows"].as_array().unwrap().len(), 3);
        assert!(b["correlation"]["gamma"].is_number());
    }
    let manifest = json(&d.join("abl/manifest.json"));
    assert_eq!(manifest["status"], "complete");
    for f in manifest["files"].as_array().unwrap() {
        assert!(d.join("abl").join(f["path"].as_str().unwrap()).exists());
    }

    let out = cycletrack(&["pipeline", "--config", &write_config(d, "e.json", serde_json::json!({"seeds": []})), "--out", "x"], d);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn failing_seed_leaves_partial_manifest() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let cfg = write_config(d, "c.json", serde_json::json!({"scenario": {"duration": 300}, "seeds": [0]}));
    let out = cycletrack(&["pipeline", "--config", &cfg, "--out", "p"], d);
    assert_eq!(out.status.code(), Some(5));
    let m = json(&d.join("p/manifest.json"));
    assert_eq!(m["status"], "failed");
    assert!(m["error"].as_str().unwrap().contains("seed 0"));
    assert_eq!(m["seeds"], serde_json::json!([]));
    assert!(!m["files"].as_array().unwrap().is_empty());
}

#[test]
fn config_errors_exit_with_config_code() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let cfg = write_config(d, "c.json", serde_json::json!({"trackr": {}}));
    let out = cycletrack(&["simulate", "--config", &cfg, "--out", "x"], d);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
    assert_eq!(cycletrack(&["simulate", "--backward", "magic"], d).status.code(), Some(2));
}

#[test]
fn ncc_backward_runs_on_rendered_frames() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let cfg = write_config(
        d,
        "c.json",
        serde_json::json!({
            "scenario": {
                "duration": 120, "frame_width": 160, "frame_height": 64, "lambda_fp": 0.0, "lambda_fn": 0.0, "det_jitter": 0.0,
                "path": {"kind": "polyline", "points": [[8.0, 32.0], [152.0, 32.0]]}
            },
            "tracker": {"min_hits": 1}, "backward": "ncc"
        }),
    );
    ok(&cycletrack(&["simulate", "--config", &cfg, "--frames", "--out", "s"], d));
    let header = json(&d.join("s/frames.json"));
    assert_eq!(header["dtype"], "f32le");
    assert_eq!(std::fs::metadata(d.join("s/frames.bin")).unwrap().len(), 160 * 64 * 4 * 120);
    ok(&cycletrack(&["track", "--config", &cfg, "--det", "s/det.txt", "--out", "t"], d));
    ok(&cycletrack(&["evaluate", "--config", &cfg, "--gt", "s/gt.txt", "--hyp", "t/hyp.txt", "--out", "t"], d));
    let m = json(&d.join("t/metrics.json"));
    assert_eq!((m["mota"].as_f64(), m["idsw"].as_u64()), (Some(100.0), Some(0)), "{m}");
}
