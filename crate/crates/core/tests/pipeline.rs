use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use scimobility::pipeline::bench::write_benchmark;
use scimobility::pipeline::{
    files, lock_path, partial_path, run_pipeline, run_stage, OutputLock, PipelineConfig, PipelineError, STAGES,
};
use scimobility::synth::GeneratorConfig;

fn small(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        researcher_count: 200,
        seed,
        ..GeneratorConfig::default()
    }
}

fn benchmark(dir: &Path, gen: &GeneratorConfig) -> PipelineConfig {
    let path = write_benchmark(dir, gen).unwrap();
    PipelineConfig::from_file(&path).unwrap()
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

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let i = reader.headers().unwrap().iter().position(|h| h == name).unwrap();
    reader.records().map(|r| r.unwrap()[i].to_string()).collect()
}

#[test]
fn bundle_has_every_output_and_no_leftovers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = benchmark(tmp.path(), &small(1));
    let out = run_pipeline(&cfg).unwrap();
    for name in [
        files::RECORDS,
        files::IMPUTED,
        files::REVISED,
        files::EVENTS,
        files::CATEGORIES,
        files::DEPARTURE_RATES,
        files::RETURN_RATES,
        files::COUNTRY_FLOWS,
        files::COLLAB_SCATTER,
        files::CORRELATION,
        files::PYRAMID,
        files::FEMALE_SHARE,
        files::SUMMARY,
        files::MANIFEST,
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    assert!(!partial_path(&out).exists());
    assert!(!lock_path(&out).exists());
    assert!(read_dir(&out).keys().all(|n| !n.starts_with('.')));

    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join(files::MANIFEST)).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    let listed = manifest["files"].as_object().unwrap();
    assert_eq!(listed.len() + 1, read_dir(&out).len());
    assert!(manifest["parameters"].get("output.dir").is_none());
}

#[test]
fn stage_by_stage_matches_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = benchmark(tmp.path(), &small(2));
    let full = run_pipeline(&cfg).unwrap();
    let stepwise: PathBuf = tmp.path().join("stepwise");
    fs::create_dir_all(&stepwise).unwrap();
    cfg.output_dir = stepwise.clone();
    for stage in STAGES {
        run_stage(stage, &cfg, &stepwise).unwrap();
    }
    assert_eq!(read_dir(&full), read_dir(&stepwise));
}

#[test]
fn rerun_replaces_previous_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = benchmark(tmp.path(), &small(3));
    let first = read_dir(&run_pipeline(&cfg).unwrap());
    let second = read_dir(&run_pipeline(&cfg).unwrap());
    assert_eq!(first, second);
}

#[test]
fn different_seed_changes_the_bundle() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = read_dir(&run_pipeline(&benchmark(a.path(), &small(4))).unwrap());
    let second = read_dir(&run_pipeline(&benchmark(b.path(), &small(5))).unwrap());
    assert_ne!(first[files::MANIFEST], second[files::MANIFEST]);
}

#[test]
fn all_non_movers_give_no_mover_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = GeneratorConfig {
        departure_hazard: 0.0,
        immigrant_share: 0.0,
        merge_rate: 0.0,
        ..small(6)
    };
    let out = run_pipeline(&benchmark(tmp.path(), &gen)).unwrap();
    let categories = column(&out.join(files::PYRAMID), "category");
    assert!(!categories.is_empty());
    assert!(categories.iter().all(|c| c == "non_mover"), "{categories:?}");
    assert!(column(&out.join(files::EVENTS), "year").is_empty());
    let returns = column(&out.join(files::RETURN_RATES), "person_years");
    assert!(returns.is_empty(), "{returns:?}");
    let events = column(&out.join(files::DEPARTURE_RATES), "events");
    assert!(events.iter().all(|e| e == "0"));
}

#[test]
fn failed_stage_leaves_nothing_behind() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = benchmark(tmp.path(), &small(7));
    let bad = tmp.path().join("bad.jsonl");
    fs::write(&bad, "{\"not\": \"a record\"}\n{\"also\": 1}\n").unwrap();
    cfg.input = bad;
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(matches!(err, PipelineError::Stage { stage: "ingest", .. }), "{err}");
    assert!(!cfg.output_dir.exists());
    assert!(!partial_path(&cfg.output_dir).exists());
    assert!(!lock_path(&cfg.output_dir).exists());
}

#[test]
fn failed_rerun_keeps_the_previous_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = benchmark(tmp.path(), &small(8));
    let before = read_dir(&run_pipeline(&cfg).unwrap());
    cfg.input = tmp.path().join("does-not-exist.jsonl");
    assert!(run_pipeline(&cfg).is_err());
    assert_eq!(read_dir(&cfg.output_dir), before);
}

#[test]
fn locked_output_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = benchmark(tmp.path(), &small(9));
    let lock = OutputLock::acquire(&cfg.output_dir).unwrap();
    assert!(matches!(OutputLock::acquire(&cfg.output_dir), Err(PipelineError::Locked(_))));
    assert!(matches!(run_pipeline(&cfg), Err(PipelineError::Locked(_))));
    drop(lock);
    run_pipeline(&cfg).unwrap();
}

#[test]
fn foreign_directory_is_not_overwritten() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = benchmark(tmp.path(), &small(10));
    fs::create_dir_all(&cfg.output_dir).unwrap();
    fs::write(cfg.output_dir.join("notes.txt"), "keep me").unwrap();
    assert!(matches!(run_pipeline(&cfg), Err(PipelineError::OutputExists(_))));
    assert_eq!(fs::read_to_string(cfg.output_dir.join("notes.txt")).unwrap(), "keep me");
}
