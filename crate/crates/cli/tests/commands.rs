use std::fs;
use std::path::Path;
use std::process::Command;

use ocad::checkpoint::{Checkpoint, Model};
use ocad::commands::{checkpoint_path, cmd_eval, cmd_report, cmd_synth, cmd_train, manifest_path, metrics_path};
use ocad::{CliError, ModelKind, RunConfig};
use ocad_core::dataio::pgm::{read_pgm, write_pgm};
use ocad_core::dataio::{ClassLabel, DatasetManifest, Eye, GrayImage, ManifestRow, Orientation, Role};
use ocad_core::ganomaly::GanomalyModel;

fn tiny(root: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    for (k, v) in [
        ("model.image_size", "16"),
        ("model.ngf", "2"),
        ("model.nz", "4"),
        ("model.epochs", "2"),
        ("synth.subjects_per_class", "5"),
        ("synth.images_per_subject", "2"),
        ("folds.k", "2"),
        ("folds.val_pd", "2"),
        ("anogan.steps", "3"),
        ("anogan.images_per_subject", "1"),
        ("report.samples", "1"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg.corpus_dir = root.join("corpus");
    cfg.run_dir = root.join("run");
    cfg
}

fn quiet(_: &str) {}

fn full_pipeline(cfg: &RunConfig) {
    cmd_synth(cfg).unwrap();
    for kind in ["ganomaly", "anogan"] {
        let mut c = cfg.clone();
        c.set("model.kind", kind).unwrap();
        cmd_train(&c, quiet).unwrap();
        cmd_eval(&c, quiet).unwrap();
        cmd_report(&c).unwrap();
    }
}

#[test]
fn pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let summary = cmd_synth(&cfg).unwrap();
    assert_eq!(summary.rows, 20);
    assert_eq!(summary.subjects[&ClassLabel::Pd], 5);

    let ckpts = cmd_train(&cfg, quiet).unwrap();
    assert_eq!(ckpts.len(), 2);
    let log = fs::read_to_string(cfg.run_dir.join("fold0/ganomaly_train.log")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "epoch,enc,ctx,adv,gen,disc");
    assert_eq!(lines.len() - 1, 2);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));

    let report = cmd_eval(&cfg, quiet).unwrap();
    assert_eq!(report.schema, 1);
    assert_eq!(report.folds.len(), 2);
    for f in &report.folds {
        assert_eq!((f.n_pd, f.n_control), (4, 10));
        let roc = fs::read_to_string(cfg.run_dir.join(format!("fold{}/ganomaly_roc.csv", f.fold))).unwrap();
        assert!(roc.starts_with("fpr,tpr,threshold\n"));
        assert!(["enc", "ctx", "adv", "score"].iter().all(|c| f.anova.contains_key(*c)));
    }
    let mean = fs::read_to_string(cfg.run_dir.join("ganomaly_mean_roc.csv")).unwrap();
    assert!(mean.starts_with("fpr,mean_tpr,std_tpr,lower,upper\n"));
    assert_eq!(mean.lines().count(), 102);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(metrics_path(&cfg, ModelKind::Ganomaly)).unwrap()).unwrap();
    assert_eq!(json["schema"], 1);
    assert_eq!(json["positive_rule"], "pd_low");

    let r = cmd_report(&cfg).unwrap();
    assert_eq!(r.images.len(), 6);
    for p in &r.images {
        let img = read_pgm(p).unwrap();
        assert_eq!((img.width(), img.height()), (16, 16));
    }
    // four components × two classes
    assert_eq!(r.quartiles.len(), 8);
    assert!(r.quartiles.iter().all(|q| q.min <= q.q1 && q.q1 <= q.median && q.median <= q.q3 && q.q3 <= q.max));
}

#[test]
fn runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ca, cb) = (tiny(a.path()), tiny(b.path()));
    full_pipeline(&ca);
    full_pipeline(&cb);
    let same = |rel: &str| {
        let x = fs::read(a.path().join(rel)).unwrap();
        let y = fs::read(b.path().join(rel)).unwrap();
        assert!(x == y, "{rel} differs");
    };
    same("corpus/manifest.csv");
    for kind in ["ganomaly", "anogan"] {
        for fold in 0..2 {
            same(&format!("run/fold{fold}/{kind}.ckpt"));
            same(&format!("run/fold{fold}/{kind}_train.log"));
        }
        same(&format!("run/{kind}_metrics.json"));
        same(&format!("run/{kind}_scores.csv"));
        same(&format!("run/{kind}_mean_roc.csv"));
        same(&format!("run/report/{kind}_boxplot.csv"));
    }
}

#[test]
fn zero_epochs_saves_the_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.set("model.epochs", "0").unwrap();
    cfg.set("folds.only", "1").unwrap();
    cmd_synth(&cfg).unwrap();
    let paths = cmd_train(&cfg, quiet).unwrap();
    assert_eq!(paths, vec![checkpoint_path(&cfg, ModelKind::Ganomaly, 1)]);
    let ck = Checkpoint::load(&paths[0]).unwrap();
    assert_eq!((ck.steps, ck.epochs), (0, 0));
    let Model::Ganomaly(m) = ck.clone().into_model().unwrap() else { panic!("kind") };
    let fresh = GanomalyModel::build(cfg.ganomaly_config(ck.model_seed)).unwrap();
    assert_eq!(m, fresh);
    let log = fs::read_to_string(cfg.run_dir.join("fold1/ganomaly_train.log")).unwrap();
    assert_eq!(log.lines().count(), 1);
}

fn write_fixture(dir: &Path, rows: &[(&str, ClassLabel, Role, u8)]) -> DatasetManifest {
    fs::create_dir_all(dir.join("images")).unwrap();
    let rows: Vec<ManifestRow> = rows
        .iter()
        .enumerate()
        .map(|(i, (subject, label, role, value))| {
            let path = format!("images/{i}.pgm");
            write_pgm(dir.join(&path), &GrayImage::filled(16, 16, *value)).unwrap();
            ManifestRow {
                path,
                subject_id: subject.to_string(),
                eye: Eye::Left,
                orientation: Orientation::Horizontal,
                label: *label,
                role: *role,
            }
        })
        .collect();
    let m = DatasetManifest::new(dir, rows);
    m.write(dir.join("manifest.csv")).unwrap();
    m
}

#[test]
fn control_training_rows_are_rejected_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    write_fixture(
        &cfg.corpus_dir,
        &[
            ("pd01", ClassLabel::Pd, Role::Train, 10),
            ("ct01", ClassLabel::Control, Role::Train, 200),
            ("ct02", ClassLabel::Control, Role::Val, 200),
        ],
    );
    let err = cmd_train(&cfg, quiet).unwrap_err();
    assert!(matches!(err, CliError::OneClass(_)), "{err}");
    assert!(!cfg.run_dir.join("fold0").exists());
}

#[test]
fn separable_fixture_reaches_unit_auc() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.set("model.epochs", "0").unwrap();
    // the untrained model's scores for two flat images decide which one
    // plays the PD role, so the fixture is separable under PD-low
    let model = GanomalyModel::build(cfg.ganomaly_config(ocad_core::seed::derive(cfg.seed, "init/ganomaly/fold0"))).unwrap();
    let flat = |v: f64| ocad_core::Tensor::filled(&[1, 16, 16], v / 127.5 - 1.0);
    let (dark, bright) = (30u8, 220u8);
    let dark_low = model.anomaly_score(&flat(dark as f64)).unwrap() < model.anomaly_score(&flat(bright as f64)).unwrap();
    let (pd, ct) = if dark_low { (dark, bright) } else { (bright, dark) };
    write_fixture(
        &cfg.corpus_dir,
        &[
            ("pd01", ClassLabel::Pd, Role::Train, pd),
            ("pd02", ClassLabel::Pd, Role::Val, pd),
            ("pd03", ClassLabel::Pd, Role::Val, pd),
            ("ct01", ClassLabel::Control, Role::Val, ct),
            ("ct02", ClassLabel::Control, Role::Val, ct),
        ],
    );
    cmd_train(&cfg, quiet).unwrap();
    let report = cmd_eval(&cfg, quiet).unwrap();
    assert_eq!(report.folds.len(), 1);
    assert_eq!(report.mean_auc, 1.0);
    assert_eq!(report.folds[0].subject_confusion.f1, 1.0);
}

#[test]
fn mismatched_or_corrupt_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.set("model.epochs", "1").unwrap();
    cmd_synth(&cfg).unwrap();
    cmd_train(&cfg, quiet).unwrap();

    let mut wider = cfg.clone();
    wider.set("model.ngf", "4").unwrap();
    assert!(matches!(cmd_eval(&wider, quiet), Err(CliError::Mismatch(_))));
    // inversion settings are free to change after training
    let mut longer = cfg.clone();
    longer.set("anogan.steps", "7").unwrap();
    cmd_eval(&longer, quiet).unwrap();

    let mut other = cfg.clone();
    other.set("model.kind", "anogan").unwrap();
    assert!(matches!(cmd_eval(&other, quiet), Err(CliError::Io(_))));
    fs::copy(
        checkpoint_path(&cfg, ModelKind::Ganomaly, 0),
        checkpoint_path(&cfg, ModelKind::Anogan, 0),
    )
    .unwrap();
    assert!(matches!(cmd_eval(&other, quiet), Err(CliError::Mismatch(_))));

    let path = checkpoint_path(&cfg, ModelKind::Ganomaly, 1);
    let mut bytes = fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    fs::write(&path, bytes).unwrap();
    assert!(matches!(cmd_eval(&cfg, quiet), Err(CliError::Checkpoint(_))));
}

#[test]
fn report_requires_eval_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    assert!(matches!(cmd_report(&cfg), Err(CliError::Io(_))));
    assert!(matches!(cmd_train(&cfg, quiet), Err(CliError::Io(_))));
    assert!(!manifest_path(&cfg).exists());
}

#[test]
fn binary_reports_one_line_errors() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    fs::write(&conf, "model.epochs = 1\nmodel.bogus = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ocad"))
        .args(["synth", "--config"])
        .arg(&conf)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.starts_with("error: config: "), "{stderr}");

    let out = Command::new(env!("CARGO_BIN_EXE_ocad"))
        .args(["synth", "--set", "synth.subjects_per_class=0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn binary_runs_synth_and_prints_config() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    let set = format!("paths.corpus={}", corpus.display());
    let out = Command::new(env!("CARGO_BIN_EXE_ocad"))
        .args(["synth", "--set", &set, "--set", "synth.images_per_subject=1", "--set", "synth.subjects_per_class=2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(DatasetManifest::read(corpus.join("manifest.csv")).unwrap().rows.len(), 4);

    let out = Command::new(env!("CARGO_BIN_EXE_ocad")).args(["config", "--set", "model.epochs=7"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("model.epochs = 7\n"));
    let mut back = RunConfig::default();
    back.apply_text(&text).unwrap();
    assert_eq!(back.model.epochs, 7);
}
