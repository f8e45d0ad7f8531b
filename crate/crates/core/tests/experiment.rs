use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use modwave::experiment::{
    exit_code_for, report_path, run, write_report, ExperimentConfig, RunManifest, Stage, MANIFEST_FILE,
};
use modwave::Error;

fn free_config(out: &Path) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/free.toml");
    let mut cfg = ExperimentConfig::load(&path).unwrap();
    cfg.output.dir = out.to_path_buf();
    cfg
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, out);
            } else {
                out.insert(p.clone(), fs::read(&p).unwrap());
            }
        }
    }
    let mut m = BTreeMap::new();
    walk(dir, &mut m);
    m
}

#[test]
fn free_run_certifies_and_cook_series_vanish() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&free_config(tmp.path()), Stage::All).unwrap();
    assert_eq!(out.exit_code(), 0);
    assert!(out.manifest.certificates.iter().all(|c| c.passed));
    assert!(!out.dir.join(".lock").exists());

    for kind in ["hj", "dollard", "none"] {
        let text = fs::read_to_string(out.dir.join(format!("cook_{kind}.csv"))).unwrap();
        let mut rows = 0;
        for line in text.lines().skip(1) {
            let g: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert_eq!(g, 0.0, "{kind}: {line}");
            rows += 1;
        }
        assert!(rows > 10);
        let s = out.manifest.slope("cook", &format!("cook_{kind}")).unwrap();
        assert!(s.slope.is_none());
        assert!(s.note.as_deref().unwrap().contains("insufficient range"));
    }
}

#[test]
fn reruns_write_identical_csvs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run(&free_config(a.path()), Stage::All).unwrap();
    let rb = run(&free_config(b.path()), Stage::All).unwrap();
    let first = csv_files(&ra.dir);
    assert!(first.len() > 10);
    assert_eq!(first, csv_files(&rb.dir));

    // Rerunning in place reuses the cached table and rewrites the same bytes.
    let again = run(&free_config(a.path()), Stage::All).unwrap();
    assert_eq!(first, csv_files(&again.dir));
}

#[test]
fn single_stage_rerun_keeps_other_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = free_config(tmp.path());
    let full = run(&cfg, Stage::All).unwrap();
    let n = full.manifest.certificates.len();
    let part = run(&cfg, Stage::Evolve).unwrap();
    assert_eq!(part.manifest.certificates.len(), n);
    assert_eq!(part.manifest.stages.len(), full.manifest.stages.len());
}

#[test]
fn report_leaves_run_directory_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&free_config(tmp.path()), Stage::All).unwrap();
    let before = snapshot(&out.dir);
    let (report, path) = write_report(&out.dir).unwrap();
    assert_eq!(snapshot(&out.dir), before);
    assert_eq!(path, report_path(&out.dir));
    assert!(path.exists() && !path.starts_with(&out.dir));
    assert!(report.all_certified);
    assert!(report.summary.contains("cook_hj"));
}

#[test]
fn horizon_rule_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = free_config(tmp.path());
    cfg.lattice.half_width = 40;
    let e = run(&cfg, Stage::All).unwrap_err();
    assert!(matches!(e, Error::Config(_)), "{e}");
    assert!(e.to_string().contains("horizon rule"), "{e}");
    assert_eq!(exit_code_for(&e), 2);
    assert!(!tmp.path().join("free").exists());
}

#[test]
fn locked_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = free_config(tmp.path());
    let dir = tmp.path().join("free");
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join(".lock"), "1\n").unwrap();
    let e = run(&cfg, Stage::Extend).unwrap_err();
    assert!(e.to_string().contains("locked"), "{e}");
    assert_eq!(exit_code_for(&e), 3);
    assert!(dir.join(".lock").exists());
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = free_config(Path::new("runs"));
    let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    let long = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/long_range.toml");
    let cfg = ExperimentConfig::load(&long).unwrap();
    assert_eq!(cfg.mu(), Some(0.6));
    assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn unknown_keys_and_stages_are_rejected() {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/free.toml")).unwrap();
    let bad = text.replace("seed = 7", "seed = 7\ncolour = \"blue\"");
    assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config(_))));
    assert!(matches!("bogus".parse::<Stage>(), Err(Error::Config(_))));
}

#[test]
fn corrupt_manifest_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join(MANIFEST_FILE), "{ not json").unwrap();
    let e = RunManifest::load(tmp.path()).unwrap_err();
    assert!(matches!(e, Error::Parse(_)), "{e}");
    let e = RunManifest::load(&tmp.path().join("missing")).unwrap_err();
    assert!(e.to_string().contains("missing"), "{e}");
    assert_eq!(exit_code_for(&e), 3);
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_modwave");
    let tmp = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/free.toml");

    let ok = Command::new(bin)
        .args(["run", "--config"])
        .arg(&config)
        .args(["--stage", "extend", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("partition"));

    let report = Command::new(bin).arg("report").arg(tmp.path().join("free")).output().unwrap();
    assert_eq!(report.status.code(), Some(0));
    assert!(tmp.path().join("free.report.json").exists());

    let missing = Command::new(bin).arg("report").arg(tmp.path().join("nope")).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));

    let text = fs::read_to_string(&config).unwrap().replace("half_width = 1024", "half_width = 40");
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, text).unwrap();
    let rejected = Command::new(bin).args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(rejected.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&rejected.stderr).contains("horizon rule"));
}
