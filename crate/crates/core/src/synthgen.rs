//! Synthetic fixation slices.
//!
//! A PD-like gaze trace carries a 4–7 Hz sinusoidal tremor on top of slow
//! drift; a control-like trace has the same drift plus at most a couple of
//! small step displacements. Each trace is rendered as a time × space slice
//! with a Gaussian bright band following the gaze position.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::dataio::manifest::{DatasetManifest, ManifestRow};
use crate::dataio::pgm::{write_pgm, GrayImage};
use crate::dataio::{ClassLabel, Eye, Orientation, Provenance, Role, SliceImage};
use crate::error::{Error, Result};
use crate::seed;

/// Background intensity of a rendered slice.
pub const BACKGROUND: f64 = 40.0;
/// Peak intensity added at the center of the band.
pub const BAND_PEAK: f64 = 170.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub fps: f64,
    pub duration_s: f64,
    /// Spatial extent S of a slice, in pixels.
    pub space: usize,
    /// Width σ_p of the Gaussian band profile.
    pub pupil_sigma: f64,
    /// Tremor frequency band in Hz.
    pub tremor_band: (f64, f64),
    /// Tremor amplitude range in pixels.
    pub tremor_amplitude: (f64, f64),
    /// Largest drift over the whole clip, in pixels.
    pub drift: f64,
    /// Sensor noise σ in intensity levels.
    pub noise_sigma: f64,
    /// Per-frame gaze jitter σ in pixels.
    pub jitter: f64,
    /// Rate of step displacements (microsaccades) in control traces, in Hz.
    pub microsaccade_rate: f64,
    /// Cap on the number of steps per control trace.
    pub max_steps: usize,
    /// Minimum time in seconds between two steps, and between a step and
    /// either end of the clip. Shortened when a clip cannot hold the steps.
    pub refractory_s: f64,
    /// Step displacement magnitude range in pixels.
    pub step_amplitude: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            fps: 60.0,
            duration_s: 5.0,
            space: 210,
            pupil_sigma: 6.0,
            tremor_band: (4.0, 7.0),
            tremor_amplitude: (3.0, 6.0),
            drift: 4.0,
            noise_sigma: 4.0,
            jitter: 0.3,
            microsaccade_rate: 1.0,
            max_steps: 2,
            refractory_s: 1.0,
            step_amplitude: (10.0, 20.0),
        }
    }
}

impl SynthConfig {
    pub fn frames(&self) -> usize {
        (self.fps * self.duration_s).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.fps > 0.0 && self.duration_s > 0.0) {
            return bad(format!("fps {} and duration {} must be positive", self.fps, self.duration_s));
        }
        if self.frames() < 64 {
            return bad(format!("clip has {} samples, at least 64 required", self.frames()));
        }
        let (lo, hi) = self.tremor_band;
        if !(lo > 0.0 && lo <= hi && hi < self.fps / 2.0) {
            return bad(format!("tremor band [{lo}, {hi}] Hz must lie in (0, {}) Hz", self.fps / 2.0));
        }
        if self.space < 8 {
            return bad(format!("space extent {} too small", self.space));
        }
        let (alo, ahi) = self.tremor_amplitude;
        let (slo, shi) = self.step_amplitude;
        if !(0.0 <= alo && alo <= ahi && 0.0 <= slo && slo <= shi) {
            return bad("amplitude ranges must be ordered and non-negative".into());
        }
        if !(self.microsaccade_rate.is_finite() && self.microsaccade_rate >= 0.0) {
            return bad(format!("microsaccade rate {} must be finite and >= 0", self.microsaccade_rate));
        }
        let gap = self.refractory_s * self.fps;
        if !(gap.is_finite() && gap >= 0.0) {
            return bad(format!("refractory period {} s must be finite and >= 0", self.refractory_s));
        }
        if !(self.pupil_sigma > 0.0 && self.drift >= 0.0 && self.noise_sigma >= 0.0 && self.jitter >= 0.0) {
            return bad("band width must be positive, drift/noise/jitter non-negative".into());
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Gaze position per frame, in pixels along the slice's spatial axis.
pub fn synth_trace(class: ClassLabel, cfg: &SynthConfig, rng: &mut impl Rng) -> Vec<f64> {
    let t_len = cfg.frames();
    let center = cfg.space as f64 / 2.0;
    let drift_end = uniform(rng, (-cfg.drift, cfg.drift));
    let mut trace: Vec<f64> = (0..t_len)
        .map(|t| center + drift_end * t as f64 / (t_len - 1) as f64)
        .collect();

    match class {
        ClassLabel::Pd => {
            let amplitude = uniform(rng, cfg.tremor_amplitude);
            let freq = uniform(rng, cfg.tremor_band);
            let phase = rng.random_range(0.0..2.0 * PI);
            for (t, p) in trace.iter_mut().enumerate() {
                *p += amplitude * (2.0 * PI * freq * t as f64 / cfg.fps + phase).sin();
            }
        }
        ClassLabel::Control => {
            let mean = cfg.microsaccade_rate * cfg.duration_s;
            let drawn = if mean > 0.0 {
                Poisson::new(mean).expect("validated rate").sample(rng) as usize
            } else {
                0
            };
            let steps = drawn.min(cfg.max_steps);
            for at in step_times(steps, t_len, (cfg.refractory_s * cfg.fps).round() as usize, rng) {
                let size = uniform(rng, cfg.step_amplitude) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                trace[at..].iter_mut().for_each(|p| *p += size);
            }
        }
    }

    if cfg.jitter > 0.0 {
        let normal = Normal::new(0.0, cfg.jitter).expect("validated jitter");
        trace.iter_mut().for_each(|p| *p += normal.sample(rng));
    }
    trace
}

/// `k` sorted frame indices, uniform over the placements that keep every
/// step `gap` frames from the others and from both ends.
fn step_times(k: usize, t_len: usize, gap: usize, rng: &mut impl Rng) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    let gap = gap.min((t_len - 1) / (k + 1));
    let slack = (t_len - 1) - (k + 1) * gap;
    let mut u: Vec<usize> = (0..k).map(|_| rng.random_range(0..=slack)).collect();
    u.sort_unstable();
    u.iter().enumerate().map(|(i, &v)| v + (i + 1) * gap).collect()
}

/// Renders a `T × S` slice: dark background plus a Gaussian band centered
/// on the (clamped) trace position of each row, plus sensor noise.
pub fn render_pixels(trace: &[f64], cfg: &SynthConfig, rng: &mut impl Rng) -> Result<GrayImage> {
    let s = cfg.space;
    let noise = (cfg.noise_sigma > 0.0).then(|| Normal::new(0.0, cfg.noise_sigma).expect("validated noise"));
    let inv = 1.0 / (2.0 * cfg.pupil_sigma * cfg.pupil_sigma);
    let mut pixels = Vec::with_capacity(trace.len() * s);
    for &p in trace {
        let p = p.clamp(0.0, (s - 1) as f64);
        for x in 0..s {
            let d = x as f64 - p;
            let mut v = BACKGROUND + BAND_PEAK * (-d * d * inv).exp();
            if let Some(n) = &noise {
                v += n.sample(rng);
            }
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(s, trace.len(), pixels)
}

pub fn render_slice(
    trace: &[f64],
    cfg: &SynthConfig,
    orientation: Orientation,
    provenance: Provenance,
    rng: &mut impl Rng,
) -> Result<SliceImage> {
    Ok(SliceImage {
        pixels: render_pixels(trace, cfg, rng)?,
        orientation,
        provenance,
    })
}

/// One synthetic sample drawn from its own seed.
pub fn synth_slice(
    class: ClassLabel,
    cfg: &SynthConfig,
    orientation: Orientation,
    provenance: Provenance,
    seed: u64,
) -> Result<SliceImage> {
    let mut rng = seed::rng(seed);
    let trace = synth_trace(class, cfg, &mut rng);
    render_slice(&trace, cfg, orientation, provenance, &mut rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoleCount {
    pub label: ClassLabel,
    pub role: Role,
    pub count: usize,
}

/// What to synthesize: images per (class, role) drawn from a cohort of
/// `subjects_per_class` synthetic subjects per class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusRequest {
    pub subjects_per_class: usize,
    pub counts: Vec<RoleCount>,
}

/// Images per subject in the default corpus: 5 recordings × 2 eyes × 2
/// slice orientations.
pub const DEFAULT_IMAGES_PER_SUBJECT: usize = 20;
pub const DEFAULT_SUBJECTS_PER_CLASS: usize = 13;

impl Default for CorpusRequest {
    fn default() -> Self {
        let per_class = DEFAULT_SUBJECTS_PER_CLASS * DEFAULT_IMAGES_PER_SUBJECT;
        CorpusRequest {
            subjects_per_class: DEFAULT_SUBJECTS_PER_CLASS,
            counts: vec![
                RoleCount {
                    label: ClassLabel::Pd,
                    role: Role::Pool,
                    count: per_class,
                },
                RoleCount {
                    label: ClassLabel::Control,
                    role: Role::Pool,
                    count: per_class,
                },
            ],
        }
    }
}

pub fn subject_id(label: ClassLabel, index: usize) -> String {
    let prefix = match label {
        ClassLabel::Pd => "pd",
        ClassLabel::Control => "ct",
    };
    format!("{prefix}{:02}", index + 1)
}

/// Splits `subjects` across roles proportionally to their image counts,
/// giving each role at least one subject (largest-remainder rounding).
fn allocate_subjects(subjects: usize, counts: &[usize]) -> Result<Vec<usize>> {
    if subjects < counts.len() {
        return Err(Error::InvalidConfig(format!(
            "{subjects} subjects cannot cover {} disjoint roles",
            counts.len()
        )));
    }
    let total: usize = counts.iter().sum();
    let spare = subjects - counts.len();
    let quotas: Vec<f64> = counts.iter().map(|&c| spare as f64 * c as f64 / total as f64).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| 1 + q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    let mut left = subjects - alloc.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        alloc[i] += 1;
        left -= 1;
    }
    Ok(alloc)
}

/// Writes `images/*.pgm` and `manifest.csv` under `out_dir`. Within one
/// class, roles get disjoint subjects so patient-level splits stay clean.
/// Every sample draws from a seed derived from `master_seed` and its
/// subject/index, so the corpus is byte-reproducible.
pub fn gen_dataset(
    cfg: &SynthConfig,
    request: &CorpusRequest,
    master_seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    cfg.validate()?;
    if request.counts.is_empty() {
        return Err(Error::InvalidConfig("no images requested".into()));
    }
    if let Some(rc) = request.counts.iter().find(|rc| rc.count == 0) {
        return Err(Error::InvalidConfig(format!(
            "requested zero {} images for role {}",
            rc.label, rc.role
        )));
    }
    if request.subjects_per_class == 0 {
        return Err(Error::InvalidConfig("subjects_per_class must be positive".into()));
    }

    let out_dir = out_dir.as_ref();
    let image_dir = out_dir.join("images");
    fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;

    let mut rows = Vec::new();
    for label in [ClassLabel::Pd, ClassLabel::Control] {
        let roles: Vec<&RoleCount> = request.counts.iter().filter(|rc| rc.label == label).collect();
        if roles.is_empty() {
            continue;
        }
        let alloc = allocate_subjects(
            request.subjects_per_class,
            &roles.iter().map(|rc| rc.count).collect::<Vec<_>>(),
        )?;
        let mut next_subject = 0;
        for (rc, n_subjects) in roles.iter().zip(alloc) {
            let subjects: Vec<String> = (next_subject..next_subject + n_subjects)
                .map(|i| subject_id(label, i))
                .collect();
            next_subject += n_subjects;
            for j in 0..rc.count {
                let subject = &subjects[j % subjects.len()];
                let k = j / subjects.len();
                let sequence = k / 4;
                let eye = if (k / 2) % 2 == 0 { Eye::Left } else { Eye::Right };
                let orientation = if k % 2 == 0 { Orientation::Horizontal } else { Orientation::Vertical };
                let provenance = Provenance {
                    subject_id: subject.clone(),
                    eye,
                    sample_index: sequence,
                    label,
                    augmentation: "none".into(),
                };
                let sample_seed = seed::derive(master_seed, &format!("synth/{subject}/{k}"));
                let slice = synth_slice(label, cfg, orientation, provenance, sample_seed)?;
                let rel = format!("images/{subject}_{sequence:03}_{eye}_{orientation}.pgm");
                write_pgm(out_dir.join(&rel), &slice.pixels)?;
                rows.push(ManifestRow {
                    path: rel,
                    subject_id: subject.clone(),
                    eye,
                    orientation,
                    label,
                    role: rc.role,
                });
            }
        }
    }
    let manifest = DatasetManifest::new(out_dir, rows);
    manifest.write(out_dir.join("manifest.csv"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = SynthConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.frames(), 300);
    }

    #[test]
    fn rejects_band_above_nyquist_and_short_clips() {
        let cfg = SynthConfig {
            tremor_band: (4.0, 31.0),
            ..SynthConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SynthConfig {
            duration_s: 1.0,
            ..SynthConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn control_without_drift_noise_or_steps_is_constant() {
        let cfg = SynthConfig {
            drift: 0.0,
            jitter: 0.0,
            max_steps: 0,
            ..SynthConfig::default()
        };
        let trace = synth_trace(ClassLabel::Control, &cfg, &mut seed::rng(3));
        assert!(trace.iter().all(|&p| p == 105.0));
    }

    #[test]
    fn step_times_respect_the_refractory_gap() {
        let mut rng = seed::rng(5);
        for k in 0..=3 {
            for _ in 0..200 {
                let t = step_times(k, 300, 30, &mut rng);
                assert_eq!(t.len(), k);
                assert!(t.iter().all(|&s| (30..=269).contains(&s)), "{t:?}");
                assert!(t.windows(2).all(|w| w[1] - w[0] >= 30), "{t:?}");
            }
        }
        // tight fit: the only placement
        assert_eq!(step_times(2, 91, 30, &mut rng), vec![30, 60]);
        assert_eq!(step_times(2, 64, 30, &mut rng), vec![21, 42]);
    }

    #[test]
    fn constant_trace_renders_identical_rows() {
        let cfg = SynthConfig {
            noise_sigma: 0.0,
            ..SynthConfig::default()
        };
        let img = render_pixels(&[50.3; 80], &cfg, &mut seed::rng(0)).unwrap();
        for t in 1..80 {
            assert_eq!(img.row(t), img.row(0));
        }
    }

    #[test]
    fn subject_allocation_is_proportional_and_complete() {
        assert_eq!(allocate_subjects(13, &[800, 100]).unwrap(), vec![11, 2]);
        assert_eq!(allocate_subjects(13, &[260]).unwrap(), vec![13]);
        assert_eq!(allocate_subjects(2, &[1, 1]).unwrap(), vec![1, 1]);
        assert!(allocate_subjects(1, &[1, 1]).is_err());
    }
}
