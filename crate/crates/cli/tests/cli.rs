use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn scimobility(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scimobility")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn synth(dir: &Path, seed: u64) -> String {
    let synth_cfg = dir.join("small.kv");
    fs::write(&synth_cfg, "synth.researcher_count = 150\n").unwrap();
    let bench = dir.join("bench");
    let out = scimobility(&[
        "synth",
        "--config",
        synth_cfg.to_str().unwrap(),
        "--seed",
        &seed.to_string(),
        "--out",
        bench.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    bench.join("benchmark.kv").to_string_lossy().into_owned()
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&scimobility(&["--help"])), 0);
    assert_eq!(code(&scimobility(&["--version"])), 0);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&scimobility(&[])), 1);
    assert_eq!(code(&scimobility(&["frobnicate"])), 1);
    assert_eq!(code(&scimobility(&["run"])), 1);

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.kv");
    fs::write(&cfg, "input.path = x.jsonl\n").unwrap();
    let out = scimobility(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "missing seed: {}", String::from_utf8_lossy(&out.stderr));

    fs::write(&cfg, "seed = 1\ninput.path = x.jsonl\nbogus.key = 3\n").unwrap();
    assert_eq!(code(&scimobility(&["run", "--config", cfg.to_str().unwrap()])), 1);

    let out = scimobility(&["synth", "--out", tmp.path().join("s").to_str().unwrap()]);
    assert_eq!(code(&out), 1, "synth without a seed");
}

#[test]
fn data_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("in.jsonl"), "not json\nstill not json\n").unwrap();
    let cfg = tmp.path().join("c.kv");
    fs::write(&cfg, "seed = 1\ninput.path = in.jsonl\noutput.dir = out\n").unwrap();
    let out = scimobility(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!tmp.path().join("out").exists());
    assert!(!tmp.path().join("out.partial").exists());

    // A later stage without its inputs.
    let out = scimobility(&["rates", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("w").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn synth_run_and_score() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path(), 4);
    let out = scimobility(&["run", "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let bundle = tmp.path().join("bench/report");
    assert!(bundle.join("manifest.json").is_file());

    let out = scimobility(&[
        "score",
        "--truth",
        tmp.path().join("bench/truth.jsonl").to_str().unwrap(),
        "--bundle",
        bundle.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["disambiguation"]["f1"].as_f64().unwrap() > 0.9);
}

#[test]
fn stage_commands_reproduce_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path(), 5);
    assert_eq!(code(&scimobility(&["run", "--config", &cfg])), 0);
    let stepwise = tmp.path().join("stepwise");
    for stage in ["ingest", "impute", "disambiguate", "gender", "mobility", "disciplines", "rates", "report"] {
        let out = scimobility(&[stage, "--config", &cfg, "--out", stepwise.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(read_dir(&tmp.path().join("bench/report")), read_dir(&stepwise));
}

#[test]
fn locked_output_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path(), 6);
    fs::write(tmp.path().join("bench/report.lock"), "123\n").unwrap();
    let out = scimobility(&["run", "--config", &cfg]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("locked"));
}
