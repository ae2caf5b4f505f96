//! Run configuration: `key = value` lines with `#` comments. Keys are
//! dotted (`model.epochs`); anything not given keeps its default.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ocad_core::anogan::{AnoganConfig, InversionConfig};
use ocad_core::ganomaly::{GanomalyConfig, LossWeights};
use ocad_core::numerics::AdamConfig;
use ocad_core::stats::ThresholdCriterion;
use ocad_core::synthgen::SynthConfig;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Ganomaly,
    Anogan,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Ganomaly => "ganomaly",
            ModelKind::Anogan => "anogan",
        }
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ganomaly" => Ok(ModelKind::Ganomaly),
            "anogan" => Ok(ModelKind::Anogan),
            other => Err(format!("unknown model kind {other:?}")),
        }
    }
}

/// Settings shared by both models so they stay comparable.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSettings {
    pub kind: ModelKind,
    pub image_size: usize,
    pub nz: usize,
    pub ngf: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnoganSettings {
    pub inversion: InversionConfig,
    /// Validation images scored per subject; 0 scores all of them.
    pub images_per_subject: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldSettings {
    pub k: usize,
    pub val_pd: usize,
    /// Restricts train/eval to one fold.
    pub only: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus_dir: PathBuf,
    pub run_dir: PathBuf,
    pub synth: SynthConfig,
    pub subjects_per_class: usize,
    pub images_per_subject: usize,
    pub model: ModelSettings,
    pub weights: LossWeights,
    pub anogan: AnoganSettings,
    pub folds: FoldSettings,
    pub criterion: ThresholdCriterion,
    /// Validation samples per class rendered by `report`.
    pub report_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            corpus_dir: PathBuf::from("runs/corpus"),
            run_dir: PathBuf::from("runs/default"),
            synth: SynthConfig::default(),
            subjects_per_class: ocad_core::synthgen::DEFAULT_SUBJECTS_PER_CLASS,
            images_per_subject: ocad_core::synthgen::DEFAULT_IMAGES_PER_SUBJECT,
            model: ModelSettings {
                kind: ModelKind::Ganomaly,
                image_size: 64,
                nz: 100,
                ngf: 16,
                epochs: 60,
                batch_size: 1,
                adam: AdamConfig {
                    lr: 5e-5,
                    ..AdamConfig::default()
                },
            },
            weights: LossWeights::default(),
            anogan: AnoganSettings {
                inversion: InversionConfig::default(),
                images_per_subject: 4,
            },
            folds: FoldSettings {
                k: 4,
                val_pd: 3,
                only: None,
            },
            criterion: ThresholdCriterion::MaxF1,
            report_samples: 2,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| CliError::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn criterion_name(c: ThresholdCriterion) -> &'static str {
    match c {
        ThresholdCriterion::MaxF1 => "max_f1",
        ThresholdCriterion::Youden => "youden",
    }
}

impl RunConfig {
    /// Reads `path` over the defaults, then applies `overrides`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {o:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| CliError::Config(format!("line {}: {}", n + 1, e.message())))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let s = &mut self.synth;
        let m = &mut self.model;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "paths.corpus" => self.corpus_dir = PathBuf::from(value),
            "paths.run" => self.run_dir = PathBuf::from(value),
            "synth.fps" => s.fps = parse(key, value)?,
            "synth.duration_s" => s.duration_s = parse(key, value)?,
            "synth.space" => s.space = parse(key, value)?,
            "synth.pupil_sigma" => s.pupil_sigma = parse(key, value)?,
            "synth.tremor_hz_min" => s.tremor_band.0 = parse(key, value)?,
            "synth.tremor_hz_max" => s.tremor_band.1 = parse(key, value)?,
            "synth.tremor_amplitude_min" => s.tremor_amplitude.0 = parse(key, value)?,
            "synth.tremor_amplitude_max" => s.tremor_amplitude.1 = parse(key, value)?,
            "synth.drift" => s.drift = parse(key, value)?,
            "synth.noise_sigma" => s.noise_sigma = parse(key, value)?,
            "synth.jitter" => s.jitter = parse(key, value)?,
            "synth.microsaccade_rate" => s.microsaccade_rate = parse(key, value)?,
            "synth.max_steps" => s.max_steps = parse(key, value)?,
            "synth.refractory_s" => s.refractory_s = parse(key, value)?,
            "synth.step_amplitude_min" => s.step_amplitude.0 = parse(key, value)?,
            "synth.step_amplitude_max" => s.step_amplitude.1 = parse(key, value)?,
            "synth.subjects_per_class" => self.subjects_per_class = parse(key, value)?,
            "synth.images_per_subject" => self.images_per_subject = parse(key, value)?,
            "model.kind" => m.kind = parse(key, value)?,
            "model.image_size" => m.image_size = parse(key, value)?,
            "model.nz" => m.nz = parse(key, value)?,
            "model.ngf" => m.ngf = parse(key, value)?,
            "model.epochs" => m.epochs = parse(key, value)?,
            "model.batch_size" => m.batch_size = parse(key, value)?,
            "model.lr" => m.adam.lr = parse(key, value)?,
            "model.beta1" => m.adam.beta1 = parse(key, value)?,
            "model.beta2" => m.adam.beta2 = parse(key, value)?,
            "model.eps" => m.adam.eps = parse(key, value)?,
            "ganomaly.w_adv" => self.weights.adv = parse(key, value)?,
            "ganomaly.w_ctx" => self.weights.ctx = parse(key, value)?,
            "ganomaly.w_enc" => self.weights.enc = parse(key, value)?,
            "anogan.steps" => self.anogan.inversion.steps = parse(key, value)?,
            "anogan.lambda" => self.anogan.inversion.lambda = parse(key, value)?,
            "anogan.step_size" => self.anogan.inversion.step_size = parse(key, value)?,
            "anogan.images_per_subject" => self.anogan.images_per_subject = parse(key, value)?,
            "folds.k" => self.folds.k = parse(key, value)?,
            "folds.val_pd" => self.folds.val_pd = parse(key, value)?,
            "folds.only" => {
                self.folds.only = match value {
                    "" | "all" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "eval.criterion" => {
                self.criterion = match value {
                    "max_f1" => ThresholdCriterion::MaxF1,
                    "youden" => ThresholdCriterion::Youden,
                    other => return Err(CliError::Config(format!("{key}: unknown criterion {other:?}"))),
                }
            }
            "report.samples" => self.report_samples = parse(key, value)?,
            other => return Err(CliError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let core = |e: ocad_core::Error| CliError::Config(e.to_string());
        self.synth.validate().map_err(core)?;
        self.ganomaly_config(0).validate().map_err(core)?;
        self.anogan_config(0).validate().map_err(core)?;
        if self.subjects_per_class == 0 || self.images_per_subject == 0 {
            return Err(CliError::Config("synth.subjects_per_class and synth.images_per_subject must be positive".into()));
        }
        if let Some(f) = self.folds.only {
            if f >= self.folds.k {
                return Err(CliError::Config(format!("folds.only = {f} but folds.k = {}", self.folds.k)));
            }
        }
        Ok(())
    }

    pub fn ganomaly_config(&self, seed: u64) -> GanomalyConfig {
        let m = &self.model;
        GanomalyConfig {
            nz: m.nz,
            ngf: m.ngf,
            image_size: m.image_size,
            weights: self.weights,
            epochs: m.epochs,
            batch_size: m.batch_size,
            adam: m.adam,
            seed,
        }
    }

    pub fn anogan_config(&self, seed: u64) -> AnoganConfig {
        let m = &self.model;
        AnoganConfig {
            nz: m.nz,
            ngf: m.ngf,
            image_size: m.image_size,
            epochs: m.epochs,
            batch_size: m.batch_size,
            adam: m.adam,
            inversion: self.anogan.inversion,
            seed,
        }
    }

    /// Every key with its current value, in a fixed order. Feeding the
    /// text back through `apply_text` reproduces the config.
    pub fn to_text(&self) -> String {
        let s = &self.synth;
        let m = &self.model;
        let a = &self.anogan;
        let entries: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("paths.corpus", self.corpus_dir.display().to_string()),
            ("paths.run", self.run_dir.display().to_string()),
            ("synth.fps", s.fps.to_string()),
            ("synth.duration_s", s.duration_s.to_string()),
            ("synth.space", s.space.to_string()),
            ("synth.pupil_sigma", s.pupil_sigma.to_string()),
            ("synth.tremor_hz_min", s.tremor_band.0.to_string()),
            ("synth.tremor_hz_max", s.tremor_band.1.to_string()),
            ("synth.tremor_amplitude_min", s.tremor_amplitude.0.to_string()),
            ("synth.tremor_amplitude_max", s.tremor_amplitude.1.to_string()),
            ("synth.drift", s.drift.to_string()),
            ("synth.noise_sigma", s.noise_sigma.to_string()),
            ("synth.jitter", s.jitter.to_string()),
            ("synth.microsaccade_rate", s.microsaccade_rate.to_string()),
            ("synth.max_steps", s.max_steps.to_string()),
            ("synth.refractory_s", s.refractory_s.to_string()),
            ("synth.step_amplitude_min", s.step_amplitude.0.to_string()),
            ("synth.step_amplitude_max", s.step_amplitude.1.to_string()),
            ("synth.subjects_per_class", self.subjects_per_class.to_string()),
            ("synth.images_per_subject", self.images_per_subject.to_string()),
            ("model.kind", m.kind.as_str().to_string()),
            ("model.image_size", m.image_size.to_string()),
            ("model.nz", m.nz.to_string()),
            ("model.ngf", m.ngf.to_string()),
            ("model.epochs", m.epochs.to_string()),
            ("model.batch_size", m.batch_size.to_string()),
            ("model.lr", m.adam.lr.to_string()),
            ("model.beta1", m.adam.beta1.to_string()),
            ("model.beta2", m.adam.beta2.to_string()),
            ("model.eps", m.adam.eps.to_string()),
            ("ganomaly.w_adv", self.weights.adv.to_string()),
            ("ganomaly.w_ctx", self.weights.ctx.to_string()),
            ("ganomaly.w_enc", self.weights.enc.to_string()),
            ("anogan.steps", a.inversion.steps.to_string()),
            ("anogan.lambda", a.inversion.lambda.to_string()),
            ("anogan.step_size", a.inversion.step_size.to_string()),
            ("anogan.images_per_subject", a.images_per_subject.to_string()),
            ("folds.k", self.folds.k.to_string()),
            ("folds.val_pd", self.folds.val_pd.to_string()),
            ("folds.only", self.folds.only.map_or("all".to_string(), |f| f.to_string())),
            ("eval.criterion", criterion_name(self.criterion).to_string()),
            ("report.samples", self.report_samples.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            writeln!(out, "{k} = {v}").expect("writing to a String");
        }
        out
    }

    /// The subset of `to_text` that determines a trained model: everything
    /// except paths, latent-inversion settings and evaluation/report settings.
    pub fn model_echo(&self) -> String {
        self.to_text()
            .lines()
            .filter(|l| {
                !["paths.", "anogan.", "eval.", "report.", "folds.only"]
                    .iter()
                    .any(|p| l.starts_with(p))
            })
            .map(|l| format!("{l}\n"))
            .collect()
    }
}
