use std::path::Path;
use std::process::{Command, Output};
use std::sync::OnceLock;

use scenemesh::pipeline::{RUN_MANIFEST, STBS};

fn scenemesh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scenemesh"))
        .args(args)
        .env("SCENEMESH_LOG", "error")
        .output()
        .unwrap()
}

fn run_all(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["all", "--run-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    scenemesh(&args)
}

/// One completed demo run shared by the read-only tests.
fn demo_run() -> &'static Path {
    static RUN: OnceLock<tempfile::TempDir> = OnceLock::new();
    RUN.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let out = run_all(tmp.path(), &[]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        tmp
    })
    .path()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn copy_run(to: &Path) {
    for (rel, bytes) in files(demo_run()) {
        let p = to.join(rel);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(p, bytes).unwrap();
    }
}

#[test]
fn all_writes_every_artifact() {
    let dir = demo_run();
    for f in [
        "world/index.json",
        "models/scene_00.json",
        "affinity.json",
        "affinity.csv",
        "clustering.json",
        STBS,
        "profiles.json",
        "query.json",
        "retrieval.csv",
        "map_curve.csv",
        "classify.json",
        "predictions.csv",
        "accuracy.csv",
        "coverage.json",
        "coverage.csv",
        "summaries.csv",
        "report.json",
        "stability.csv",
        "sweep.csv",
        "manifests/evaluate.json",
        RUN_MANIFEST,
    ] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let tmp = std::fs::read_dir(dir).unwrap().filter(|e| {
        let name = e.as_ref().unwrap().file_name();
        name.to_string_lossy().starts_with(".tmp")
    });
    assert_eq!(tmp.count(), 0);
}

#[test]
fn csv_headers_are_stable() {
    let dir = demo_run();
    let header = |f: &str| {
        let text = std::fs::read_to_string(dir.join(f)).unwrap();
        text.lines().next().unwrap().to_string()
    };
    assert_eq!(
        header("retrieval.csv"),
        "model,query_scene,query_clip,rank,scene_id,clip_id,distance"
    );
    assert_eq!(header("map_curve.csv"), "model,t,map");
    assert_eq!(
        header("predictions.csv"),
        "model,scene_id,clip_id,truth,predicted,correct"
    );
    assert_eq!(
        header("accuracy.csv"),
        "model,scene_id,chosen_k,category,accuracy"
    );
    assert_eq!(header("coverage.csv"), "cluster,n_sum,method,mean,sd");
    assert_eq!(header("sweep.csv"), "coeff,scm_accuracy,fm_accuracy");
    assert!(header("affinity.csv").starts_with("scene_id,"));
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_all(tmp.path(), &["--jobs", "3"]).status.success());
    assert_eq!(files(tmp.path()), files(demo_run()));
}

#[test]
fn truncated_model_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    copy_run(tmp.path());
    let model = tmp.path().join("models/scene_02.json");
    let bytes = std::fs::read(&model).unwrap();
    std::fs::write(&model, &bytes[..bytes.len() / 2]).unwrap();
    let out = scenemesh(&["affinity", "--run-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scene_02"));
}

#[test]
fn corrupted_model_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    copy_run(tmp.path());
    let model = tmp.path().join("models/scene_00.json");
    let text = std::fs::read_to_string(&model).unwrap();
    std::fs::write(
        &model,
        text.replacen("\"alpha\": [", "\"alpha\": [-1.0, ", 1),
    )
    .unwrap();
    let out = scenemesh(&["affinity", "--run-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn version_mismatch_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    copy_run(tmp.path());
    let path = tmp.path().join("clustering.json");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(
        &path,
        text.replacen("\"schema_version\": 1", "\"schema_version\": 9", 1),
    )
    .unwrap();
    let out = scenemesh(&["stb", "--run-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_inputs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = scenemesh(&["train", "--run-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    copy_run(tmp.path());
    std::fs::remove_file(tmp.path().join("models/scene_01.json")).unwrap();
    let out = scenemesh(&["affinity", "--run-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_stage_leaves_outputs_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    copy_run(tmp.path());
    let before = std::fs::read(tmp.path().join("affinity.json")).unwrap();
    std::fs::write(tmp.path().join("models/scene_03.json"), b"{").unwrap();
    let out = scenemesh(&[
        "affinity",
        "--run-dir",
        tmp.path().to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(
        std::fs::read(tmp.path().join("affinity.json")).unwrap(),
        before
    );
}

#[test]
fn invalid_config_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let run = run.to_str().unwrap();
    let unknown = tmp.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"lda": {"topics": 3}}"#).unwrap();
    let out = scenemesh(&[
        "gen",
        "--config",
        unknown.to_str().unwrap(),
        "--run-dir",
        run,
    ]);
    assert_eq!(out.status.code(), Some(3));
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"lda": {"k_local": 0}}"#).unwrap();
    let out = scenemesh(&["gen", "--config", bad.to_str().unwrap(), "--run-dir", run]);
    assert_eq!(out.status.code(), Some(3));
    let out = scenemesh(&["gen", "--config", "/nonexistent/c.json", "--run-dir", run]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_rejects_mixed_config() {
    let tmp = tempfile::tempdir().unwrap();
    copy_run(tmp.path());
    let out = scenemesh(&[
        "evaluate",
        "--run-dir",
        tmp.path().to_str().unwrap(),
        "--seed",
        "11",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    let out = scenemesh(&["evaluate", "--run-dir", tmp.path().to_str().unwrap()]);
    assert!(out.status.success());
}

#[test]
fn unknown_stage_is_a_usage_error() {
    let out = scenemesh(&["frobnicate"]);
    assert!(!out.status.success());
}
