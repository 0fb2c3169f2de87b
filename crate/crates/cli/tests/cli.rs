use std::path::Path;
use std::process::{Command, Output};

fn derender(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_derender"))
        .current_dir(dir)
        .env_remove("DERENDER_DATA_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = derender(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn gen_reruns_are_byte_identical() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, &["--seed", "4", "gen", "--task", "dot2d", "--n", "30", "--out", "a"]);
    ok(d, &["--seed", "4", "--threads", "1", "gen", "--task", "dot2d", "--n", "30", "--out", "b"]);
    assert_eq!(read(d.join("a/records.jsonl")), read(d.join("b/records.jsonl")));
    assert_eq!(read(d.join("a/images/000017.png")), read(d.join("b/images/000017.png")));
    assert!(d.join("a/manifest.json").exists());
    assert!(!d.join("a/.partial").exists());
    let lines = String::from_utf8(read(d.join("a/records.jsonl"))).unwrap();
    assert_eq!(lines.lines().count(), 30);
}

#[test]
fn exit_codes_follow_the_policy() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    let bad_task = derender(d, &["gen", "--task", "nope", "--n", "1"]);
    assert_eq!(bad_task.status.code(), Some(2));
    std::fs::write(d.join("c.json"), r#"{"dot2d": {"image_size": 0}}"#).unwrap();
    let bad_cfg = derender(d, &["--config", "c.json", "gen", "--task", "dot2d", "--n", "1", "--out", "x"]);
    assert_eq!(bad_cfg.status.code(), Some(2));
    std::fs::write(d.join("u.json"), r#"{"unknown": 1}"#).unwrap();
    let unknown = derender(d, &["--config", "u.json", "gen", "--task", "dot2d", "--n", "1", "--out", "x"]);
    assert_eq!(unknown.status.code(), Some(2));
    let missing = derender(d, &["train", "--mode", "float", "--data", "nowhere", "--out", "m"]);
    assert_eq!(missing.status.code(), Some(3));
    ok(d, &["gen", "--task", "cogent", "--n", "3", "--out", "once"]);
    let again = derender(d, &["gen", "--task", "cogent", "--n", "3", "--out", "once"]);
    assert_eq!(again.status.code(), Some(2));
}

#[test]
fn divergence_exits_with_code_four() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, &["gen", "--task", "dot2d", "--n", "16", "--out", "data"]);
    std::fs::write(
        d.join("c.json"),
        r#"{"model": {"embed_dim": 8, "heads": 2, "encoder_hidden": 8, "numeric_head_hidden": 4, "context_len": 32},
            "train": {"steps": 5, "batch_size": 4, "learning_rate": 1e30, "grad_clip": 0.0, "log_every": 1, "val_size": 0}}"#,
    )
    .unwrap();
    let out = derender(d, &["--config", "c.json", "train", "--mode", "float", "--data", "data", "--out", "m"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("m/.partial").exists());
}

#[test]
fn eval_against_itself_and_with_deletions() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, &["gen", "--task", "cogent", "--n", "40", "--out", "gt"]);
    std::fs::write(d.join("c.json"), r#"{"eval": {"points_per_object": 64}}"#).unwrap();
    ok(d, &["--config", "c.json", "eval", "--gt", "gt", "--pred", "gt/records.jsonl", "--out", "same"]);
    let csv = String::from_utf8(read(d.join("same/report.csv"))).unwrap();
    let all = csv.lines().nth(1).unwrap();
    assert_eq!(all, "all,0,0,0,100,100,100,100,100,0,0");

    // drop the last object line of every program
    let text = String::from_utf8(read(d.join("gt/records.jsonl"))).unwrap();
    let mut pred = String::new();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let prog = v["program"].as_str().unwrap();
        let mut lines: Vec<&str> = prog.lines().collect();
        lines.pop();
        let cut = lines.iter().map(|l| format!("{l}\n")).collect::<String>();
        pred.push_str(&serde_json::json!({"index": v["index"], "program": cut}).to_string());
        pred.push('\n');
    }
    std::fs::write(d.join("pred.jsonl"), pred).unwrap();
    ok(d, &["--config", "c.json", "eval", "--gt", "gt", "--pred", "pred.jsonl", "--out", "cut"]);
    let report: serde_json::Value = serde_json::from_slice(&read(d.join("cut/report.json"))).unwrap();
    assert_eq!(report["overall"]["count_error"], 1.0);
    assert_eq!(report["overall"]["malformed_rate"], 0.0);
}

#[test]
fn plots_are_deterministic_and_handle_empty_input() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    std::fs::write(d.join("pos.csv"), "index,split,gt_x,gt_y,pred_x,pred_y\n0,val_id,0.1,0.2,0.1,0.2\n1,val_ood,0.5,0.5,,\n").unwrap();
    std::fs::write(d.join("empty.csv"), "index,split,gt_x,gt_y,pred_x,pred_y\n").unwrap();
    ok(d, &["plot", "scatter2d", "--input", "pos.csv", "--out", "a.svg"]);
    ok(d, &["plot", "scatter2d", "--input", "pos.csv", "--out", "b.svg"]);
    assert_eq!(read(d.join("a.svg")), read(d.join("b.svg")));
    let svg = String::from_utf8(read(d.join("a.svg"))).unwrap();
    assert_eq!(svg.matches("#d62728").count(), 2);
    assert_eq!(svg.matches("#1f4fd8").count(), 1);
    assert!(d.join("a.csv").exists());
    ok(d, &["plot", "scatter2d", "--input", "empty.csv", "--out", "e.svg"]);
    let empty = String::from_utf8(read(d.join("e.svg"))).unwrap();
    assert!(empty.starts_with("<svg") && empty.trim_end().ends_with("</svg>"));
    assert!(!empty.contains("<circle"));
    std::fs::write(d.join("m.csv"), "step,ce\n1,2\n").unwrap();
    let missing = derender(d, &["plot", "dynamics", "--input", "m.csv", "--out", "m.svg"]);
    assert_eq!(missing.status.code(), Some(3));
}
