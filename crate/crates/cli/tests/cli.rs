use std::fs;
use std::path::Path;
use std::process::Command;

use handforge_cli::document::HandSpecDocument;
use handforge_cli::pipeline::{CANDIDATES_FILE, CHECKPOINT_FILE};
use handforge_cli::{run_pipeline, CliError, CloudFormat, PipelineOptions};
use handforge_core::selection::{Interval, SearchIntervals};
use handforge_core::Error;

fn small_doc() -> HandSpecDocument {
    HandSpecDocument {
        search: SearchIntervals {
            x: Interval::new(12.0, 12.0, 1.0),
            y: Interval::new(2.0, 2.0, 1.0),
            z: Interval::new(-9.0, -5.0, 4.0),
            theta_z: Interval::new(45.0, 45.0, 1.0),
        },
        ..HandSpecDocument::default()
    }
}

fn handforge(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_handforge"))
        .args(args)
        .env("HANDFORGE_THREADS", "2")
        .output()
        .unwrap()
}

fn write_doc(dir: &Path, doc: &HandSpecDocument) -> String {
    let path = dir.join("spec.json");
    fs::write(&path, doc.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn small_search_succeeds_with_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_doc(dir.path(), &small_doc());
    let out = dir.path().join("out");
    let o = handforge(&[
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--export-clouds",
        "--cloud-format",
        "csv",
        "--gesture",
        "pointing",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("best base: x 12 mm, y 2 mm"), "{stdout}");

    let csv = fs::read_to_string(out.join(CANDIDATES_FILE)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "x_mm,y_mm,z_mm,theta_z_deg,kapandji_pass,toi,sigma_r_pct,stored"
    );
    assert_eq!(lines.count(), 2);
    assert!(out.join("best.json").exists());
    assert_eq!(fs::read_dir(out.join("clouds")).unwrap().count(), 17);
    assert!(out.join("clouds/thumb-pulp.csv").exists());
    assert!(out.join("gestures/pointing.json").exists());
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"search": {"x": 3}}"#).unwrap();
    let o = handforge(&[
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("search.x"));

    let o = handforge(&["--gesture", "wave", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_gesture_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_doc(dir.path(), &small_doc());
    let o = handforge(&[
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
        "--gesture",
        "wave",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn infeasible_threshold_exits_3_and_keeps_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_doc(dir.path(), &small_doc());
    let out = dir.path().join("out");
    let o = handforge(&[
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--threshold",
        "0.001",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let csv = fs::read_to_string(out.join(CANDIDATES_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn empty_interval_is_a_parse_error() {
    let mut doc = small_doc();
    doc.search.z = Interval::new(0.0, -1.0, 1.0);
    let dir = tempfile::tempdir().unwrap();
    let r = run_pipeline(&doc, dir.path(), &PipelineOptions::default());
    match r {
        Err(e @ CliError::Parse(_)) => {
            assert_eq!(e.exit_code(), 2);
            assert!(e.to_string().starts_with("search"), "{e}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn print_config_echoes_overrides() {
    let o = handforge(&["--print-config", "--grid-step", "1.5", "--seed", "9"]);
    assert!(o.status.success());
    let doc = HandSpecDocument::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(doc.cell_size, 1.5);
    assert_eq!(doc.seed, 9);
}

#[test]
fn bad_thread_count_exits_2() {
    let o = Command::new(env!("CARGO_BIN_EXE_handforge"))
        .args(["--print-config"])
        .env("HANDFORGE_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn checkpoint_resumes_without_recomputing() {
    let dir = tempfile::tempdir().unwrap();
    let doc = small_doc();
    let opts = PipelineOptions::default();
    let first = run_pipeline(&doc, dir.path(), &opts).unwrap();
    assert_eq!(first.resumed, 0);
    let csv = fs::read(dir.path().join(CANDIDATES_FILE)).unwrap();

    // Simulate an interrupted run: keep the header and one record, then a
    // torn line.
    let cp = dir.path().join(CHECKPOINT_FILE);
    let text = fs::read_to_string(&cp).unwrap();
    let kept: Vec<&str> = text.lines().take(2).collect();
    fs::write(&cp, format!("{}\n{{\"index\": 1, \"rec", kept.join("\n"))).unwrap();

    let second = run_pipeline(&doc, dir.path(), &opts).unwrap();
    assert_eq!(second.resumed, 1);
    assert_eq!(second.records, first.records);
    assert_eq!(fs::read(dir.path().join(CANDIDATES_FILE)).unwrap(), csv);

    let third = run_pipeline(&doc, dir.path(), &opts).unwrap();
    assert_eq!(third.resumed, 2);

    // A different document starts over.
    let changed = HandSpecDocument {
        threshold: 30.0,
        ..doc
    };
    assert_eq!(
        run_pipeline(&changed, dir.path(), &opts).unwrap().resumed,
        0
    );
}

#[test]
fn unreachable_search_is_infeasible() {
    let doc = HandSpecDocument {
        search: SearchIntervals {
            x: Interval::single(300.0),
            y: Interval::single(0.0),
            z: Interval::single(0.0),
            theta_z: Interval::single(0.0),
        },
        ..HandSpecDocument::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let r = run_pipeline(
        &doc,
        dir.path(),
        &PipelineOptions {
            clouds: Some(CloudFormat::Ply),
            gestures: vec![],
        },
    );
    assert!(matches!(
        r,
        Err(CliError::Core(Error::NoFeasibleCandidate { .. }))
    ));
    assert!(dir.path().join(CANDIDATES_FILE).exists());
    assert!(!dir.path().join("clouds").exists());
}
