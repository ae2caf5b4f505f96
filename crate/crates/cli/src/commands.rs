//! The four pipeline commands. Each reads only its config and the files
//! earlier commands wrote, and writes deterministic outputs under the
//! run directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ocad_core::anogan::AnoganModel;
use ocad_core::dataio::pgm::{read_pgm, write_pgm};
use ocad_core::dataio::{from_net_output, to_net_input, ClassLabel, DatasetManifest, GrayImage, ManifestRow, Provenance, Role, SliceImage};
use ocad_core::ganomaly::{normalize_scores, GanomalyModel};
use ocad_core::numerics::dft2d_magnitude;
use ocad_core::seed;
use ocad_core::stats::{
    confusion_at_threshold, make_folds, one_way_anova, roc_auc, select_threshold, subject_aggregate, AnovaResult,
    Confusion, FoldPlan, PositiveRule, Roc, RocPoint, SampleScore,
};
use ocad_core::synthgen::{gen_dataset, CorpusRequest, RoleCount};
use ocad_core::Tensor;
use serde::Serialize;

use crate::checkpoint::{Checkpoint, Model};
use crate::config::{ModelKind, RunConfig};
use crate::error::{io_err, CliError};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const METRICS_SCHEMA: u32 = 1;
/// FPR grid points of the mean ROC curve.
pub const MEAN_ROC_POINTS: usize = 101;

type Result<T> = std::result::Result<T, CliError>;

pub fn manifest_path(cfg: &RunConfig) -> PathBuf {
    cfg.corpus_dir.join(MANIFEST_FILE)
}

fn fold_dir(cfg: &RunConfig, fold: usize) -> PathBuf {
    cfg.run_dir.join(format!("fold{fold}"))
}

pub fn checkpoint_path(cfg: &RunConfig, kind: ModelKind, fold: usize) -> PathBuf {
    fold_dir(cfg, fold).join(format!("{}.ckpt", kind.as_str()))
}

pub fn metrics_path(cfg: &RunConfig, kind: ModelKind) -> PathBuf {
    cfg.run_dir.join(format!("{}_metrics.json", kind.as_str()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSummary {
    pub manifest: PathBuf,
    pub rows: usize,
    pub subjects: BTreeMap<ClassLabel, usize>,
}

/// Synthesizes the corpus: every subject gets `images_per_subject` pool
/// images.
pub fn cmd_synth(cfg: &RunConfig) -> Result<CorpusSummary> {
    let count = cfg.subjects_per_class * cfg.images_per_subject;
    let request = CorpusRequest {
        subjects_per_class: cfg.subjects_per_class,
        counts: [ClassLabel::Pd, ClassLabel::Control]
            .into_iter()
            .map(|label| RoleCount {
                label,
                role: Role::Pool,
                count,
            })
            .collect(),
    };
    let manifest = gen_dataset(&cfg.synth, &request, seed::derive(cfg.seed, "corpus"), &cfg.corpus_dir)?;
    let subjects = [ClassLabel::Pd, ClassLabel::Control]
        .into_iter()
        .map(|l| (l, manifest.subjects(l).len()))
        .collect();
    Ok(CorpusSummary {
        manifest: manifest_path(cfg),
        rows: manifest.rows.len(),
        subjects,
    })
}

/// Training and validation rows of one fold.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldRows {
    pub index: usize,
    pub train: Vec<ManifestRow>,
    pub val: Vec<ManifestRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub folds: Vec<FoldRows>,
    /// Present when folds were planned over pool rows.
    pub plan: Option<FoldPlan>,
}

/// A manifest with explicit `train` rows is used as a single split, after
/// the one-class check. Otherwise folds are planned over the pool rows.
pub fn plan_split(cfg: &RunConfig, manifest: &DatasetManifest) -> Result<Split> {
    if manifest.with_role(Role::Train).next().is_some() {
        if let Some(r) = manifest.with_role(Role::Train).find(|r| r.label != ClassLabel::Pd) {
            return Err(CliError::OneClass(format!(
                "training row {} has label {}; training uses PD only",
                r.path, r.label
            )));
        }
        manifest.check_subject_leakage()?;
        return Ok(Split {
            folds: vec![FoldRows {
                index: 0,
                train: manifest.with_role(Role::Train).cloned().collect(),
                val: manifest.with_role(Role::Val).cloned().collect(),
            }],
            plan: None,
        });
    }
    let plan = make_folds(
        &manifest.subjects(ClassLabel::Pd),
        &manifest.subjects(ClassLabel::Control),
        cfg.folds.k,
        cfg.folds.val_pd,
        seed::derive(cfg.seed, "folds"),
    )?;
    plan.check_leakage()?;
    let pool: Vec<&ManifestRow> = manifest.with_role(Role::Pool).collect();
    let folds = plan
        .folds
        .iter()
        .map(|f| {
            let pick = |ids: &[String], label: ClassLabel| -> Vec<ManifestRow> {
                pool.iter()
                    .filter(|r| r.label == label && ids.contains(&r.subject_id))
                    .map(|r| (*r).clone())
                    .collect()
            };
            let mut val = pick(&f.val_pd, ClassLabel::Pd);
            val.extend(pick(&f.val_control, ClassLabel::Control));
            FoldRows {
                index: f.index,
                train: pick(&f.train_pd, ClassLabel::Pd),
                val,
            }
        })
        .collect();
    Ok(Split {
        folds,
        plan: Some(plan),
    })
}

fn selected_folds(cfg: &RunConfig, split: &Split) -> Result<Vec<FoldRows>> {
    match cfg.folds.only {
        None => Ok(split.folds.clone()),
        Some(i) => split
            .folds
            .get(i)
            .cloned()
            .map(|f| vec![f])
            .ok_or_else(|| CliError::Config(format!("fold {i} does not exist in a {}-fold split", split.folds.len()))),
    }
}

pub fn load_manifest(cfg: &RunConfig) -> Result<DatasetManifest> {
    let path = manifest_path(cfg);
    if !path.exists() {
        return Err(CliError::Io(format!("{}: manifest not found; run `ocad synth` first", path.display())));
    }
    Ok(DatasetManifest::read(&path)?)
}

/// Reads a manifest row's image as a network input of side `size`.
pub fn load_input(manifest: &DatasetManifest, row: &ManifestRow, size: usize) -> Result<Tensor> {
    let pixels = read_pgm(manifest.resolve(row))?;
    let slice = SliceImage {
        pixels,
        orientation: row.orientation,
        provenance: Provenance {
            subject_id: row.subject_id.clone(),
            eye: row.eye,
            sample_index: 0,
            label: row.label,
            augmentation: "none".into(),
        },
    };
    Ok(to_net_input(&slice, size)?)
}

fn init_seed(cfg: &RunConfig, kind: ModelKind, fold: usize) -> u64 {
    seed::derive(cfg.seed, &format!("init/{}/fold{fold}", kind.as_str()))
}

/// Trains one model per selected fold, writing a checkpoint and a CSV
/// training log of per-epoch loss means next to it.
pub fn cmd_train(cfg: &RunConfig, mut progress: impl FnMut(&str)) -> Result<Vec<PathBuf>> {
    let manifest = load_manifest(cfg)?;
    let split = plan_split(cfg, &manifest)?;
    let folds = selected_folds(cfg, &split)?;
    create_dir(&cfg.run_dir)?;
    let kind = cfg.model.kind;
    let mut written = Vec::new();
    for fold in folds {
        if fold.train.is_empty() {
            return Err(CliError::Data(format!("fold {} has no training rows", fold.index)));
        }
        let data = fold
            .train
            .iter()
            .map(|r| Ok((r.label, load_input(&manifest, r, cfg.model.image_size)?)))
            .collect::<Result<Vec<_>>>()?;
        let dir = fold_dir(cfg, fold.index);
        create_dir(&dir)?;
        let mut log = Vec::new();
        let seed = init_seed(cfg, kind, fold.index);
        let ck = match kind {
            ModelKind::Ganomaly => {
                writeln!(log, "epoch,enc,ctx,adv,gen,disc").expect("in-memory write");
                let mut model = GanomalyModel::build(cfg.ganomaly_config(seed))?;
                model.train_with_progress(&data, |_, epoch, l| {
                    writeln!(log, "{epoch},{},{},{},{},{}", l.enc, l.ctx, l.adv, l.gen, l.disc).expect("in-memory write");
                    progress(&format!(
                        "fold {} epoch {epoch}: enc {:.5} ctx {:.5} adv {:.5} disc {:.4}",
                        fold.index, l.enc, l.ctx, l.adv, l.disc
                    ));
                })?;
                Checkpoint::from_ganomaly(&model, cfg)
            }
            ModelKind::Anogan => {
                writeln!(log, "epoch,gen,disc").expect("in-memory write");
                let mut model = AnoganModel::build(cfg.anogan_config(seed))?;
                model.train_with_progress(&data, |_, epoch, l| {
                    writeln!(log, "{epoch},{},{}", l.gen, l.disc).expect("in-memory write");
                    progress(&format!("fold {} epoch {epoch}: gen {:.4} disc {:.4}", fold.index, l.gen, l.disc));
                })?;
                Checkpoint::from_anogan(&model, cfg)
            }
        };
        let path = checkpoint_path(cfg, kind, fold.index);
        ck.save(&path)?;
        write_file(&dir.join(format!("{}_train.log", kind.as_str())), &log)?;
        written.push(path);
    }
    Ok(written)
}

/// One validation sample's scores. `components` holds the named score
/// components; the raw anomaly score is always present as `score`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredRow {
    pub fold: usize,
    pub row: ManifestRow,
    pub raw: f64,
    pub normalized: f64,
    pub components: Vec<(&'static str, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub val_pd_subjects: Vec<String>,
    pub n_pd: usize,
    pub n_control: usize,
    pub auc: f64,
    /// On cohort-normalized scores.
    pub threshold: f64,
    pub sample_confusion: Confusion,
    pub subject_confusion: Confusion,
    pub anova: BTreeMap<String, AnovaResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub schema: u32,
    pub model: String,
    pub seed: u64,
    pub positive_rule: PositiveRule,
    pub criterion: ocad_core::stats::ThresholdCriterion,
    pub folds: Vec<FoldMetrics>,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    /// Per component, PD against control over all folds' normalized values.
    pub anova: BTreeMap<String, AnovaResult>,
    pub uncovered_pd_subjects: Vec<String>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Reads and checks a fold's checkpoint against the requested scorer and
/// the current model settings.
pub fn load_checked(cfg: &RunConfig, fold: usize) -> Result<Model> {
    let path = checkpoint_path(cfg, cfg.model.kind, fold);
    if !path.exists() {
        return Err(CliError::Io(format!("{}: checkpoint not found; run `ocad train` first", path.display())));
    }
    let ck = Checkpoint::load(&path)?;
    if ck.kind != cfg.model.kind {
        return Err(CliError::Mismatch(format!(
            "{} holds a {} model, {} requested",
            path.display(),
            ck.kind.as_str(),
            cfg.model.kind.as_str()
        )));
    }
    let want = cfg.model_echo();
    if let Some((have, wanted)) = ck.config_echo.lines().zip(want.lines()).find(|(a, b)| a != b) {
        return Err(CliError::Mismatch(format!(
            "{}: trained with `{have}`, config has `{wanted}`",
            path.display()
        )));
    }
    let mut model = ck.into_model()?;
    if let Model::Anogan(m) = &mut model {
        m.set_inversion(cfg.anogan.inversion)?;
    }
    Ok(model)
}

/// First `n` rows of every subject, in manifest order; all rows if `n` is 0.
fn per_subject_prefix(rows: &[ManifestRow], n: usize) -> Vec<ManifestRow> {
    if n == 0 {
        return rows.to_vec();
    }
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    rows.iter()
        .filter(|r| {
            let c = seen.entry(&r.subject_id).or_insert(0);
            *c += 1;
            *c <= n
        })
        .cloned()
        .collect()
}

fn score_fold(cfg: &RunConfig, manifest: &DatasetManifest, fold: &FoldRows, model: &Model) -> Result<Vec<ScoredRow>> {
    let rows = match model {
        Model::Ganomaly(_) => fold.val.clone(),
        Model::Anogan(_) => per_subject_prefix(&fold.val, cfg.anogan.images_per_subject),
    };
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let x = load_input(manifest, &row, cfg.model.image_size)?;
        let (raw, components) = match model {
            Model::Ganomaly(m) => {
                let (raw, c) = m.score(&x)?;
                (raw, vec![("enc", c.enc), ("ctx", c.ctx), ("adv", c.adv)])
            }
            Model::Anogan(m) => {
                let s = seed::derive(cfg.seed, &format!("anogan/invert/{}", row.path));
                (m.score(&x, &cfg.anogan.inversion, s)?, vec![])
            }
        };
        out.push(ScoredRow {
            fold: fold.index,
            row,
            raw,
            normalized: 0.0,
            components,
        });
    }
    let raw: Vec<f64> = out.iter().map(|s| s.raw).collect();
    let norm = normalize_scores(&raw)?;
    out.iter_mut().zip(norm).for_each(|(s, n)| s.normalized = n);
    Ok(out)
}

/// Named per-sample series used for ANOVA and boxplots: the normalized
/// score plus every component, each min-max normalized within the fold.
fn component_series(scored: &[ScoredRow]) -> Result<Vec<(String, Vec<f64>)>> {
    let mut series = vec![("score".to_string(), scored.iter().map(|s| s.normalized).collect::<Vec<_>>())];
    if let Some(first) = scored.first() {
        for (j, (name, _)) in first.components.iter().enumerate() {
            let raw: Vec<f64> = scored.iter().map(|s| s.components[j].1).collect();
            let v = normalize_scores(&raw).unwrap_or_else(|_| vec![0.0; raw.len()]);
            series.push((name.to_string(), v));
        }
    }
    Ok(series)
}

fn anova_by_label(labels: &[ClassLabel], series: &[(String, Vec<f64>)]) -> Result<BTreeMap<String, AnovaResult>> {
    let mut out = BTreeMap::new();
    for (name, values) in series {
        let pd: Vec<f64> = values.iter().zip(labels).filter(|(_, l)| **l == ClassLabel::Pd).map(|(v, _)| *v).collect();
        let ct: Vec<f64> = values.iter().zip(labels).filter(|(_, l)| **l == ClassLabel::Control).map(|(v, _)| *v).collect();
        out.insert(name.clone(), one_way_anova(&[&pd, &ct])?);
    }
    Ok(out)
}

/// TPR of the ROC polyline at `fpr`, taking the top of vertical runs.
pub fn roc_tpr_at(points: &[RocPoint], fpr: f64) -> f64 {
    let mut best: f64 = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.fpr <= fpr && fpr <= b.fpr {
            let t = if b.fpr > a.fpr {
                a.tpr + (b.tpr - a.tpr) * (fpr - a.fpr) / (b.fpr - a.fpr)
            } else {
                a.tpr.max(b.tpr)
            };
            best = best.max(t);
        }
    }
    best
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_roc(path: &Path, roc: &Roc) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(csv_err(path))?;
    w.write_record(["fpr", "tpr", "threshold"]).map_err(csv_err(path))?;
    for p in &roc.points {
        w.write_record([p.fpr.to_string(), p.tpr.to_string(), p.threshold.to_string()]).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_mean_roc(path: &Path, rocs: &[Roc]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(csv_err(path))?;
    w.write_record(["fpr", "mean_tpr", "std_tpr", "lower", "upper"]).map_err(csv_err(path))?;
    for i in 0..MEAN_ROC_POINTS {
        let fpr = i as f64 / (MEAN_ROC_POINTS - 1) as f64;
        let tprs: Vec<f64> = rocs.iter().map(|r| roc_tpr_at(&r.points, fpr)).collect();
        let (m, s) = mean_std(&tprs);
        w.write_record([
            fpr.to_string(),
            m.to_string(),
            s.to_string(),
            (m - s).max(0.0).to_string(),
            (m + s).min(1.0).to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Scores every selected fold's validation rows and writes, per model kind:
/// `{kind}_metrics.json`, `{kind}_scores.csv`, `{kind}_components.csv`,
/// `{kind}_mean_roc.csv` and one `fold{i}/{kind}_roc.csv` per fold.
pub fn cmd_eval(cfg: &RunConfig, mut progress: impl FnMut(&str)) -> Result<EvalReport> {
    let manifest = load_manifest(cfg)?;
    let split = plan_split(cfg, &manifest)?;
    let folds = selected_folds(cfg, &split)?;
    let kind = cfg.model.kind;
    let rule = PositiveRule::PdLow;

    let mut all: Vec<ScoredRow> = Vec::new();
    let mut fold_metrics = Vec::new();
    let mut rocs = Vec::new();
    let mut pooled_labels = Vec::new();
    let mut pooled_series: Vec<(String, Vec<f64>)> = Vec::new();
    for fold in &folds {
        let model = load_checked(cfg, fold.index)?;
        let scored = score_fold(cfg, &manifest, fold, &model)?;
        let labels: Vec<ClassLabel> = scored.iter().map(|s| s.row.label).collect();
        let norm: Vec<f64> = scored.iter().map(|s| s.normalized).collect();
        let roc = roc_auc(&norm, &labels, rule)?;
        let choice = select_threshold(&norm, &labels, rule, cfg.criterion)?;
        let samples: Vec<SampleScore> = scored
            .iter()
            .map(|s| SampleScore {
                subject_id: s.row.subject_id.clone(),
                label: s.row.label,
                score: s.normalized,
            })
            .collect();
        let subjects = subject_aggregate(&samples)?;
        let subject_scores: Vec<f64> = subjects.iter().map(|s| s.score).collect();
        let subject_labels: Vec<ClassLabel> = subjects.iter().map(|s| s.label).collect();
        let subject_confusion = confusion_at_threshold(&subject_scores, &subject_labels, choice.threshold, rule);
        let series = component_series(&scored)?;
        let anova = anova_by_label(&labels, &series)?;

        pooled_labels.extend(&labels);
        if pooled_series.is_empty() {
            pooled_series = series.iter().map(|(n, _)| (n.clone(), Vec::new())).collect();
        }
        for ((_, pooled), (_, v)) in pooled_series.iter_mut().zip(&series) {
            pooled.extend(v);
        }
        write_roc(&fold_dir(cfg, fold.index).join(format!("{}_roc.csv", kind.as_str())), &roc)?;
        progress(&format!(
            "fold {}: AUC {:.4}, threshold {:.4}, recall {:.3}, precision {:.3}",
            fold.index, roc.auc, choice.threshold, choice.confusion.recall, choice.confusion.precision
        ));
        fold_metrics.push(FoldMetrics {
            fold: fold.index,
            val_pd_subjects: split
                .plan
                .as_ref()
                .map(|p| p.folds[fold.index].val_pd.clone())
                .unwrap_or_else(|| {
                    let mut ids: Vec<String> = fold.val.iter().filter(|r| r.label == ClassLabel::Pd).map(|r| r.subject_id.clone()).collect();
                    ids.dedup();
                    ids
                }),
            n_pd: labels.iter().filter(|l| **l == ClassLabel::Pd).count(),
            n_control: labels.iter().filter(|l| **l == ClassLabel::Control).count(),
            auc: roc.auc,
            threshold: choice.threshold,
            sample_confusion: choice.confusion,
            subject_confusion,
            anova,
        });
        rocs.push(roc);
        all.extend(scored);
    }

    let aucs: Vec<f64> = fold_metrics.iter().map(|f| f.auc).collect();
    let (mean_auc, std_auc) = mean_std(&aucs);
    let avg = |f: fn(&Confusion) -> f64| mean_std(&fold_metrics.iter().map(|m| f(&m.sample_confusion)).collect::<Vec<_>>()).0;
    let report = EvalReport {
        schema: METRICS_SCHEMA,
        model: kind.as_str().into(),
        seed: cfg.seed,
        positive_rule: rule,
        criterion: cfg.criterion,
        mean_auc,
        std_auc,
        mean_precision: avg(|c| c.precision),
        mean_recall: avg(|c| c.recall),
        mean_f1: avg(|c| c.f1),
        anova: anova_by_label(&pooled_labels, &pooled_series)?,
        folds: fold_metrics,
        uncovered_pd_subjects: split.plan.map(|p| p.uncovered).unwrap_or_default(),
    };

    create_dir(&cfg.run_dir)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Format(e.to_string()))?;
    write_file(&metrics_path(cfg, kind), format!("{json}\n").as_bytes())?;
    write_mean_roc(&cfg.run_dir.join(format!("{}_mean_roc.csv", kind.as_str())), &rocs)?;
    write_scores(&cfg.run_dir.join(format!("{}_scores.csv", kind.as_str())), &all)?;
    write_components(&cfg.run_dir.join(format!("{}_components.csv", kind.as_str())), &all)?;
    Ok(report)
}

fn write_scores(path: &Path, rows: &[ScoredRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(csv_err(path))?;
    w.write_record(["fold", "path", "subject_id", "label", "raw", "normalized"]).map_err(csv_err(path))?;
    for s in rows {
        w.write_record([
            s.fold.to_string(),
            s.row.path.clone(),
            s.row.subject_id.clone(),
            s.row.label.to_string(),
            s.raw.to_string(),
            s.normalized.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Long format, one row per (sample, component), values normalized within
/// the fold.
fn write_components(path: &Path, rows: &[ScoredRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(csv_err(path))?;
    w.write_record(["fold", "path", "label", "component", "value"]).map_err(csv_err(path))?;
    let mut by_fold: BTreeMap<usize, Vec<ScoredRow>> = BTreeMap::new();
    for r in rows {
        by_fold.entry(r.fold).or_default().push(r.clone());
    }
    for (fold, scored) in by_fold {
        for (name, values) in component_series(&scored)? {
            for (s, v) in scored.iter().zip(values) {
                w.write_record([fold.to_string(), s.row.path.clone(), s.row.label.to_string(), name.clone(), v.to_string()])
                    .map_err(csv_err(path))?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quartiles {
    pub component: String,
    pub label: ClassLabel,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quartiles(component: &str, label: ClassLabel, values: &mut [f64]) -> Quartiles {
    values.sort_by(f64::total_cmp);
    Quartiles {
        component: component.into(),
        label,
        n: values.len(),
        min: values[0],
        q1: quantile(values, 0.25),
        median: quantile(values, 0.5),
        q3: quantile(values, 0.75),
        max: values[values.len() - 1],
    }
}

/// 8-bit rendering of `ln(1 + |DFT(X − X')|)`, scaled so the largest value
/// maps to 255. An all-zero difference renders black.
pub fn spectrum_image(x: &Tensor, x_rec: &Tensor) -> Result<GrayImage> {
    let diff = x.zip_map(x_rec, |a, b| a - b)?;
    let [_, h, w] = x.shape() else {
        return Err(CliError::Data(format!("not an image tensor: {:?}", x.shape())));
    };
    let mag = dft2d_magnitude(&diff)?;
    let logs: Vec<f64> = mag.data().iter().map(|m| m.ln_1p()).collect();
    let top = logs.iter().copied().fold(0.0, f64::max);
    let pixels = logs
        .iter()
        .map(|v| if top > 0.0 { (v / top * 255.0).round() as u8 } else { 0 })
        .collect();
    Ok(GrayImage::new(*w, *h, pixels)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportSummary {
    pub images: Vec<PathBuf>,
    pub boxplot: PathBuf,
    pub quartiles: Vec<Quartiles>,
}

fn reconstruct(model: &Model, x: &Tensor, cfg: &RunConfig, row: &ManifestRow) -> Result<Tensor> {
    match model {
        Model::Ganomaly(m) => Ok(m.generator_pass(x)?.x_rec),
        Model::Anogan(m) => {
            let s = seed::derive(cfg.seed, &format!("anogan/invert/{}", row.path));
            let inv = m.invert_latent(x, &cfg.anogan.inversion, s, None)?;
            Ok(m.generate(&inv.z)?)
        }
    }
}

/// Writes X, X' and the difference spectrum for the first
/// `report.samples` validation images per class of the first evaluated
/// fold, plus boxplot quartiles per component and class.
pub fn cmd_report(cfg: &RunConfig) -> Result<ReportSummary> {
    let kind = cfg.model.kind;
    let components = cfg.run_dir.join(format!("{}_components.csv", kind.as_str()));
    if !components.exists() {
        return Err(CliError::Io(format!("{}: not found; run `ocad eval` first", components.display())));
    }
    let manifest = load_manifest(cfg)?;
    let split = plan_split(cfg, &manifest)?;
    let fold = selected_folds(cfg, &split)?.remove(0);
    let model = load_checked(cfg, fold.index)?;
    let out_dir = cfg.run_dir.join("report");
    create_dir(&out_dir)?;

    let mut images = Vec::new();
    for label in [ClassLabel::Pd, ClassLabel::Control] {
        for row in fold.val.iter().filter(|r| r.label == label).take(cfg.report_samples) {
            let x = load_input(&manifest, row, cfg.model.image_size)?;
            let x_rec = reconstruct(&model, &x, cfg, row)?;
            let stem = Path::new(&row.path)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| row.subject_id.clone());
            for (suffix, img) in [
                ("x", from_net_output(&x)?),
                ("xrec", from_net_output(&x_rec)?),
                ("spectrum", spectrum_image(&x, &x_rec)?),
            ] {
                let path = out_dir.join(format!("{}_{stem}_{suffix}.pgm", kind.as_str()));
                write_pgm(&path, &img)?;
                images.push(path);
            }
        }
    }

    let mut groups: BTreeMap<(String, ClassLabel), Vec<f64>> = BTreeMap::new();
    let mut reader = csv::Reader::from_path(&components).map_err(csv_err(&components))?;
    for rec in reader.records() {
        let rec = rec.map_err(csv_err(&components))?;
        let bad = || CliError::Format(format!("{}: malformed row {:?}", components.display(), rec));
        let label: ClassLabel = rec.get(2).ok_or_else(bad)?.parse()?;
        let component = rec.get(3).ok_or_else(bad)?.to_string();
        let value: f64 = rec.get(4).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        groups.entry((component, label)).or_default().push(value);
    }
    let quartile_rows: Vec<Quartiles> = groups
        .iter_mut()
        .map(|((c, l), v)| quartiles(c, *l, v))
        .collect();
    let boxplot = out_dir.join(format!("{}_boxplot.csv", kind.as_str()));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&boxplot).map_err(csv_err(&boxplot))?;
    for q in &quartile_rows {
        w.serialize(q).map_err(csv_err(&boxplot))?;
    }
    w.flush().map_err(|e| io_err(&boxplot, e))?;
    Ok(ReportSummary {
        images,
        boxplot,
        quartiles: quartile_rows,
    })
}
