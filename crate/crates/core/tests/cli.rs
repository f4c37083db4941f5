use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            if entry.file_name() != "build" {
                copy_dir(&entry.path(), &target);
            }
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

fn demo() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo"), dir.path());
    let cfg = dir.path().join("scriptorium.kb");
    (dir, cfg)
}

fn run(cfg: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scriptorium"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .env_remove("SCRIPTORIUM_CONFIG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn full_workflow_is_idempotent() {
    let (dir, cfg) = demo();
    let build = dir.path().join("build");

    let o = run(&cfg, &["nei"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("scriptorium ingest"), "{}", stderr(&o));

    for cmd in ["ingest", "nei", "generate"] {
        let o = run(&cfg, &[cmd]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
    }
    assert!(stdout(&run(&cfg, &["ingest"])).contains("merged: 14 entities"));
    let first = tree(&build);
    assert!(first.iter().any(|(p, _)| p.ends_with("merged.kbsc")));
    assert!(first.iter().any(|(p, _)| p.ends_with("sulzer-bodmer.jsonl")));
    assert!(first.iter().any(|(p, _)| p.ends_with("register-persons.html")));

    for cmd in ["ingest", "nei", "generate"] {
        assert_eq!(run(&cfg, &[cmd]).status.code(), Some(0));
    }
    assert!(first == tree(&build), "second run changed outputs");
}

#[test]
fn check_exit_codes() {
    let (dir, cfg) = demo();
    assert_eq!(run(&cfg, &["ingest"]).status.code(), Some(0));
    let o = run(&cfg, &["check"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("C2 warning"));
    assert_eq!(run(&cfg, &["check", "--strict"]).status.code(), Some(1));

    std::fs::write(dir.path().join("notes.ann"), "annotate(\"sulzer-bodmer\", token(0), person, \"gnd:none\").\n").unwrap();
    let o = run(&cfg, &["check"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("notes.ann:1: C1 error"), "{}", stdout(&o));
}

#[test]
fn usage_and_data_errors() {
    let (dir, cfg) = demo();
    assert_eq!(run(&cfg, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&cfg, &["nei", "--param", "k"]).status.code(), Some(2));
    assert_eq!(run(&cfg, &["nei", "--param", "speed=3"]).status.code(), Some(2));
    let o = run(&dir.path().join("missing.kb"), &["nei"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("missing.kb"));

    std::fs::remove_file(dir.path().join("facts/persons.nt")).unwrap();
    let o = run(&cfg, &["ingest"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("persons.nt"), "{}", stderr(&o));
}

#[test]
fn env_var_selects_project() {
    let (_dir, cfg) = demo();
    let o = Command::new(env!("CARGO_BIN_EXE_scriptorium")).arg("ingest").env("SCRIPTORIUM_CONFIG", &cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn parse_prints_items_and_plain_text() {
    let (dir, cfg) = demo();
    let file = dir.path().join("letters/bodmer-sulzer.tex");
    let o = run(&cfg, &["parse", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let first: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert_eq!(first["kind"], "command");
    assert_eq!(first["name"], "kbsender");
    let o = run(&cfg, &["parse", "--plain", file.to_str().unwrap()]);
    assert!(stdout(&o).starts_with("Mein lieber Sulzer,"), "{}", stdout(&o));

    std::fs::write(dir.path().join("bad.tex"), "\\emph{open").unwrap();
    let o = run(&cfg, &["parse", dir.path().join("bad.tex").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("unbalanced braces at byte 5"), "{}", stderr(&o));
}
