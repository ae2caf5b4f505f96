use super::frames::FrameSequence;
use super::pgm::GrayImage;
use super::types::{ClassLabel, Eye, Orientation};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Where a slice came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub subject_id: String,
    pub eye: Eye,
    pub sample_index: usize,
    pub label: ClassLabel,
    /// `"none"` for unaugmented slices, otherwise the transform applied.
    pub augmentation: String,
}

/// A time × space image: row `t` is the center line of frame `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceImage {
    pub pixels: GrayImage,
    pub orientation: Orientation,
    pub provenance: Provenance,
}

impl SliceImage {
    /// Number of time rows.
    pub fn time_len(&self) -> usize {
        self.pixels.height()
    }

    /// Number of spatial columns.
    pub fn space_len(&self) -> usize {
        self.pixels.width()
    }
}

/// Horizontal slice takes row ⌊H/2⌋ of every frame, vertical slice takes
/// column ⌊W/2⌋.
pub fn extract_center_slices(seq: &FrameSequence) -> Result<(SliceImage, SliceImage)> {
    seq.validate()?;
    let (w, h) = (seq.width(), seq.height());
    let (cy, cx) = (h / 2, w / 2);
    let t = seq.frames.len();

    let mut horizontal = Vec::with_capacity(t * w);
    let mut vertical = Vec::with_capacity(t * h);
    for frame in &seq.frames {
        horizontal.extend_from_slice(frame.row(cy));
        vertical.extend((0..h).map(|y| frame.get(cx, y)));
    }
    let provenance = Provenance {
        subject_id: seq.subject_id.clone(),
        eye: seq.eye,
        sample_index: seq.sequence,
        label: seq.label,
        augmentation: "none".into(),
    };
    Ok((
        SliceImage {
            pixels: GrayImage::new(w, t, horizontal)?,
            orientation: Orientation::Horizontal,
            provenance: provenance.clone(),
        },
        SliceImage {
            pixels: GrayImage::new(h, t, vertical)?,
            orientation: Orientation::Vertical,
            provenance,
        },
    ))
}

/// Bilinear sample at fractional `(x, y)`; `None` outside the pixel grid.
/// Integer coordinates return the stored pixel exactly.
pub(crate) fn sample_bilinear(img: &GrayImage, x: f64, y: f64) -> Option<f64> {
    const SLACK: f64 = 1e-9;
    let (w, h) = (img.width() as f64, img.height() as f64);
    if !(x >= -SLACK && y >= -SLACK && x <= w - 1.0 + SLACK && y <= h - 1.0 + SLACK) {
        return None;
    }
    let x = x.clamp(0.0, w - 1.0);
    let y = y.clamp(0.0, h - 1.0);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let p = |xx, yy| img.get(xx, yy) as f64;
    let top = if fx == 0.0 { p(x0, y0) } else { p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx };
    if fy == 0.0 {
        return Some(top);
    }
    let bottom = if fx == 0.0 { p(x0, y1) } else { p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx };
    Some(top * (1.0 - fy) + bottom * fy)
}

/// Smallest slice accepted by [`to_net_input`].
pub const MIN_NET_SOURCE: usize = 8;

/// Bilinear resize (half-pixel centers) to `size × size`, then map
/// intensities 0–255 onto [-1, 1]. Output shape is `[1, size, size]`.
pub fn to_net_input(img: &SliceImage, size: usize) -> Result<Tensor> {
    let (w, h) = (img.pixels.width(), img.pixels.height());
    if w < MIN_NET_SOURCE || h < MIN_NET_SOURCE || size == 0 {
        return Err(Error::Degenerate(format!(
            "{w}×{h} slice cannot be resized to a {size}×{size} network input"
        )));
    }
    let (sx, sy) = (w as f64 / size as f64, h as f64 / size as f64);
    let mut data = Vec::with_capacity(size * size);
    for r in 0..size {
        let y = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        for c in 0..size {
            let x = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let v = sample_bilinear(&img.pixels, x, y).expect("clamped inside the grid");
            data.push(v / 127.5 - 1.0);
        }
    }
    Tensor::new(vec![1, size, size], data)
}

/// Maps a `[1, H, W]` (or `[H, W]`) tensor in [-1, 1] back to 8-bit pixels.
pub fn from_net_output(t: &Tensor) -> Result<GrayImage> {
    let (h, w) = match t.shape() {
        [1, h, w] | [h, w] => (*h, *w),
        other => return Err(Error::InvalidTensor(format!("not an image tensor: {other:?}"))),
    };
    let pixels = t
        .data()
        .iter()
        .map(|v| ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(w, h, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_from(frames: Vec<GrayImage>) -> FrameSequence {
        FrameSequence {
            frames,
            fps: 60.0,
            subject_id: "ct03".into(),
            eye: Eye::Right,
            label: ClassLabel::Control,
            sequence: 4,
        }
    }

    fn slice(pixels: GrayImage) -> SliceImage {
        SliceImage {
            pixels,
            orientation: Orientation::Horizontal,
            provenance: Provenance {
                subject_id: "s".into(),
                eye: Eye::Left,
                sample_index: 0,
                label: ClassLabel::Pd,
                augmentation: "none".into(),
            },
        }
    }

    #[test]
    fn constant_frames_give_constant_rows() {
        let frames = (0..300).map(|t| GrayImage::filled(21, 14, (t % 256) as u8)).collect();
        let (h, v) = extract_center_slices(&seq_from(frames)).unwrap();
        assert_eq!((h.time_len(), h.space_len()), (300, 21));
        assert_eq!((v.time_len(), v.space_len()), (300, 14));
        for t in 0..300 {
            assert!(h.pixels.row(t).iter().all(|&p| p as usize == t % 256));
            assert!(v.pixels.row(t).iter().all(|&p| p as usize == t % 256));
        }
        assert_eq!(h.provenance.subject_id, "ct03");
        assert_eq!(h.provenance.sample_index, 4);
    }

    #[test]
    fn bright_column_becomes_vertical_line() {
        let x0 = 5;
        let frames = (0..10)
            .map(|_| GrayImage::from_fn(12, 9, |x, _| if x == x0 { 250 } else { 10 }))
            .collect();
        let (h, _) = extract_center_slices(&seq_from(frames)).unwrap();
        for t in 0..10 {
            for x in 0..12 {
                assert_eq!(h.pixels.get(x, t), if x == x0 { 250 } else { 10 });
            }
        }
    }

    #[test]
    fn center_uses_lower_median_index() {
        // H = 4 → row 2, W = 6 → column 3
        let frames = (0..3).map(|_| GrayImage::from_fn(6, 4, |x, y| (10 * y + x) as u8)).collect();
        let (h, v) = extract_center_slices(&seq_from(frames)).unwrap();
        assert_eq!(h.pixels.row(0), &[20, 21, 22, 23, 24, 25]);
        assert_eq!(v.pixels.row(0), &[3, 13, 23, 33]);
    }

    #[test]
    fn net_input_endpoints() {
        let white = to_net_input(&slice(GrayImage::filled(210, 300, 255)), 64).unwrap();
        assert_eq!(white.shape(), &[1, 64, 64]);
        assert!(white.data().iter().all(|&v| v == 1.0));
        let black = to_net_input(&slice(GrayImage::filled(30, 20, 0)), 64).unwrap();
        assert!(black.data().iter().all(|&v| v == -1.0));
    }

    #[test]
    fn same_size_resize_is_identity() {
        let img = GrayImage::from_fn(64, 64, |x, y| ((x * 7 + y * 13) % 256) as u8);
        let t = to_net_input(&slice(img.clone()), 64).unwrap();
        for (v, &p) in t.data().iter().zip(img.pixels()) {
            assert_eq!(*v, p as f64 / 127.5 - 1.0);
        }
        assert_eq!(from_net_output(&t).unwrap(), img);
    }

    #[test]
    fn tiny_images_rejected() {
        assert!(to_net_input(&slice(GrayImage::filled(7, 64, 3)), 64).is_err());
    }
}
