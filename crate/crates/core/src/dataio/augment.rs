//! Translation, rotation, mirroring, rescaling and noise augmentation.
//!
//! Geometric transforms resample with bilinear interpolation about the
//! image center; positions that fall outside the source are filled with the
//! image's median intensity.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::pgm::GrayImage;
use super::slices::{sample_bilinear, SliceImage};
use crate::error::{Error, Result};
use crate::seed;

pub const MAX_ROTATION_DEG: f64 = 15.0;
/// Largest translation as a fraction of the image extent.
pub const MAX_TRANSLATION: f64 = 0.10;
pub const RESCALE_RANGE: (f64, f64) = (0.9, 1.1);
/// Largest Gaussian noise standard deviation, in intensity levels.
pub const MAX_NOISE_SIGMA: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MirrorAxis {
    /// Flip left-right (reverse the spatial axis).
    Space,
    /// Flip top-bottom (reverse time).
    Time,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Transform {
    /// Shift by fractions of width (`dx`) and height (`dy`).
    Translate { dx: f64, dy: f64 },
    Rotate { degrees: f64 },
    Mirror { axis: MirrorAxis },
    Rescale { factor: f64 },
    Noise { sigma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Translate,
    Rotate,
    Mirror,
    Rescale,
    Noise,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Translate,
        Family::Rotate,
        Family::Mirror,
        Family::Rescale,
        Family::Noise,
    ];
}

#[derive(Clone, Debug, PartialEq)]
pub enum AugmentSpec {
    /// One output per listed transform.
    Fixed(Vec<Transform>),
    /// `count` outputs, each from a uniformly chosen family with parameters
    /// drawn uniformly inside the guard rails.
    Random { count: usize, families: Vec<Family> },
}

impl Transform {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidConfig(what));
        match *self {
            Transform::Translate { dx, dy } => {
                if !(dx.abs() <= MAX_TRANSLATION && dy.abs() <= MAX_TRANSLATION) {
                    return bad(format!("translation ({dx}, {dy}) exceeds ±{MAX_TRANSLATION} of the extent"));
                }
            }
            Transform::Rotate { degrees } => {
                if !(degrees.abs() <= MAX_ROTATION_DEG) {
                    return bad(format!("rotation {degrees}° exceeds ±{MAX_ROTATION_DEG}°"));
                }
            }
            Transform::Rescale { factor } => {
                if !(RESCALE_RANGE.0..=RESCALE_RANGE.1).contains(&factor) {
                    return bad(format!("rescale factor {factor} outside {RESCALE_RANGE:?}"));
                }
            }
            Transform::Noise { sigma } => {
                if !(0.0..=MAX_NOISE_SIGMA).contains(&sigma) {
                    return bad(format!("noise sigma {sigma} outside [0, {MAX_NOISE_SIGMA}]"));
                }
            }
            Transform::Mirror { .. } => {}
        }
        Ok(())
    }

    pub fn tag(&self) -> String {
        match *self {
            Transform::Translate { dx, dy } => format!("translate({dx:+.4},{dy:+.4})"),
            Transform::Rotate { degrees } => format!("rotate({degrees:+.3})"),
            Transform::Mirror { axis: MirrorAxis::Space } => "mirror(space)".into(),
            Transform::Mirror { axis: MirrorAxis::Time } => "mirror(time)".into(),
            Transform::Rescale { factor } => format!("rescale({factor:.4})"),
            Transform::Noise { sigma } => format!("noise({sigma:.3})"),
        }
    }

    fn draw(family: Family, rng: &mut impl Rng) -> Transform {
        match family {
            Family::Translate => Transform::Translate {
                dx: rng.random_range(-MAX_TRANSLATION..=MAX_TRANSLATION),
                dy: rng.random_range(-MAX_TRANSLATION..=MAX_TRANSLATION),
            },
            Family::Rotate => Transform::Rotate {
                degrees: rng.random_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG),
            },
            Family::Mirror => Transform::Mirror {
                axis: if rng.random_bool(0.5) { MirrorAxis::Space } else { MirrorAxis::Time },
            },
            Family::Rescale => Transform::Rescale {
                factor: rng.random_range(RESCALE_RANGE.0..=RESCALE_RANGE.1),
            },
            Family::Noise => Transform::Noise {
                sigma: rng.random_range(0.0..=MAX_NOISE_SIGMA),
            },
        }
    }

    /// Applies the transform; `seed` only matters for noise.
    pub fn apply(&self, img: &GrayImage, seed: u64) -> Result<GrayImage> {
        self.validate()?;
        let (w, h) = (img.width(), img.height());
        let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
        let out = match *self {
            Transform::Mirror { axis } => GrayImage::from_fn(w, h, |x, y| match axis {
                MirrorAxis::Space => img.get(w - 1 - x, y),
                MirrorAxis::Time => img.get(x, h - 1 - y),
            }),
            Transform::Translate { dx, dy } => {
                let (sx, sy) = (dx * w as f64, dy * h as f64);
                resample(img, |x, y| (x - sx, y - sy))
            }
            Transform::Rotate { degrees } => {
                let (s, c) = degrees.to_radians().sin_cos();
                // inverse rotation maps output positions back to the source
                resample(img, |x, y| {
                    let (u, v) = (x - cx, y - cy);
                    (c * u + s * v + cx, -s * u + c * v + cy)
                })
            }
            Transform::Rescale { factor } => resample(img, |x, y| ((x - cx) / factor + cx, (y - cy) / factor + cy)),
            Transform::Noise { sigma } => {
                if sigma == 0.0 {
                    img.clone()
                } else {
                    let normal = Normal::new(0.0, sigma).expect("validated sigma");
                    let mut rng = seed::rng(seed);
                    let pixels = img
                        .pixels()
                        .iter()
                        .map(|&p| quantize(p as f64 + normal.sample(&mut rng)))
                        .collect();
                    GrayImage::new(w, h, pixels)?
                }
            }
        };
        Ok(out)
    }
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn resample(img: &GrayImage, inverse: impl Fn(f64, f64) -> (f64, f64)) -> GrayImage {
    let fill = img.median() as f64;
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        let (sx, sy) = inverse(x as f64, y as f64);
        quantize(sample_bilinear(img, sx, sy).unwrap_or(fill))
    })
}

pub fn augment(img: &SliceImage, spec: &AugmentSpec, seed: u64) -> Result<Vec<SliceImage>> {
    let transforms: Vec<Transform> = match spec {
        AugmentSpec::Fixed(list) => list.clone(),
        AugmentSpec::Random { count, families } => {
            if families.is_empty() {
                return Err(Error::InvalidConfig("random augmentation needs at least one family".into()));
            }
            let mut rng = seed::rng(seed::derive(seed, "augment/params"));
            (0..*count)
                .map(|_| {
                    let family = families[rng.random_range(0..families.len())];
                    Transform::draw(family, &mut rng)
                })
                .collect()
        }
    };
    transforms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let pixels = t.apply(&img.pixels, seed::derive(seed, &format!("augment/noise/{i}")))?;
            let mut provenance = img.provenance.clone();
            provenance.augmentation = t.tag();
            Ok(SliceImage {
                pixels,
                orientation: img.orientation,
                provenance,
            })
        })
        .collect()
}

/// Grows `images` to `target` entries: the originals first, then one random
/// augmentation per source image, cycling through the sources in order.
pub fn expand_pool(images: &[SliceImage], target: usize, seed: u64) -> Result<Vec<SliceImage>> {
    if images.is_empty() || target < images.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot expand a pool of {} images to {target}",
            images.len()
        )));
    }
    let mut out = images.to_vec();
    let spec = AugmentSpec::Random {
        count: 1,
        families: Family::ALL.to_vec(),
    };
    for k in 0..target - images.len() {
        let src = &images[k % images.len()];
        let mut extra = augment(src, &spec, seed::derive(seed, &format!("pool/{k}")))?;
        out.append(&mut extra);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{ClassLabel, Eye, Orientation, Provenance};

    fn slice() -> SliceImage {
        SliceImage {
            pixels: GrayImage::from_fn(23, 17, |x, y| ((x * 31 + y * 57) % 251) as u8),
            orientation: Orientation::Vertical,
            provenance: Provenance {
                subject_id: "pd02".into(),
                eye: Eye::Left,
                sample_index: 1,
                label: ClassLabel::Pd,
                augmentation: "none".into(),
            },
        }
    }

    #[test]
    fn mirror_twice_restores() {
        let img = slice();
        for axis in [MirrorAxis::Space, MirrorAxis::Time] {
            let once = augment(&img, &AugmentSpec::Fixed(vec![Transform::Mirror { axis }]), 0).unwrap();
            assert_ne!(once[0].pixels, img.pixels);
            let twice = augment(&once[0], &AugmentSpec::Fixed(vec![Transform::Mirror { axis }]), 0).unwrap();
            assert_eq!(twice[0].pixels, img.pixels);
        }
    }

    #[test]
    fn zero_parameter_transforms_are_identities() {
        let img = slice();
        let spec = AugmentSpec::Fixed(vec![
            Transform::Translate { dx: 0.0, dy: 0.0 },
            Transform::Rotate { degrees: 0.0 },
            Transform::Rescale { factor: 1.0 },
            Transform::Noise { sigma: 0.0 },
        ]);
        for out in augment(&img, &spec, 9).unwrap() {
            assert_eq!(out.pixels, img.pixels, "{}", out.provenance.augmentation);
        }
    }

    #[test]
    fn integer_translation_shifts_and_fills_median() {
        let img = slice();
        // 23 px wide: dx = 2/23 shifts right by exactly two columns
        let out = Transform::Translate { dx: 2.0 / 23.0, dy: 0.0 }.apply(&img.pixels, 0).unwrap();
        for y in 0..17 {
            assert_eq!(out.get(0, y), img.pixels.median());
            for x in 2..23 {
                assert_eq!(out.get(x, y), img.pixels.get(x - 2, y));
            }
        }
    }

    #[test]
    fn guard_rails_reject_large_parameters() {
        let img = slice();
        for t in [
            Transform::Rotate { degrees: 15.5 },
            Transform::Translate { dx: 0.11, dy: 0.0 },
            Transform::Rescale { factor: 1.2 },
            Transform::Rescale { factor: 0.85 },
            Transform::Noise { sigma: 9.0 },
        ] {
            assert!(augment(&img, &AugmentSpec::Fixed(vec![t]), 0).is_err(), "{t:?}");
        }
    }

    #[test]
    fn random_spec_is_reproducible_and_tagged() {
        let img = slice();
        let spec = AugmentSpec::Random {
            count: 6,
            families: Family::ALL.to_vec(),
        };
        let a = augment(&img, &spec, 123).unwrap();
        let b = augment(&img, &spec, 123).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert!(a.iter().all(|s| s.provenance.augmentation != "none"));
    }

    #[test]
    fn pool_of_400_expands_to_800() {
        let base = slice();
        let pool: Vec<SliceImage> = (0..400)
            .map(|i| {
                let mut s = base.clone();
                s.provenance.sample_index = i;
                s
            })
            .collect();
        let expanded = expand_pool(&pool, 800, 5).unwrap();
        assert_eq!(expanded.len(), 800);
        assert_eq!(&expanded[..400], &pool[..]);
        assert!(expanded[400..].iter().all(|s| s.provenance.augmentation != "none"));
        assert_eq!(expanded[401].provenance.sample_index, 1);
    }
}
