use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::pgm::{read_pgm, write_pgm, GrayImage};
use super::types::{ClassLabel, Eye};
use crate::error::{Error, Result};

/// Name of the per-directory `key=value` metadata file.
pub const META_FILE: &str = "meta.txt";

/// Default acquisition frame rate.
pub const DEFAULT_FPS: f64 = 60.0;

/// A cropped eye-region recording as grayscale frames.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<GrayImage>,
    pub fps: f64,
    pub subject_id: String,
    pub eye: Eye,
    pub label: ClassLabel,
    /// Index of this recording among the subject's sequences.
    pub sequence: usize,
}

impl FrameSequence {
    pub fn validate(&self) -> Result<()> {
        if self.frames.len() < 2 {
            return Err(Error::InvalidData(format!(
                "a sequence needs at least 2 frames, got {}",
                self.frames.len()
            )));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::InvalidData(format!("fps must be positive, got {}", self.fps)));
        }
        let (w, h) = (self.frames[0].width(), self.frames[0].height());
        if let Some(i) = self.frames.iter().position(|f| f.width() != w || f.height() != h) {
            return Err(Error::InvalidData(format!(
                "frame {i} is {}×{}, expected {w}×{h}",
                self.frames[i].width(),
                self.frames[i].height()
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }
}

fn parse_meta(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("line {}: expected key=value", n + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Loads every `*.pgm` in `dir` in lexicographic filename order together
/// with the directory's metadata file.
pub fn load_frames(dir: impl AsRef<Path>) -> Result<FrameSequence> {
    let dir = dir.as_ref();
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta = parse_meta(&text, &meta_path)?;
    let field = |key: &str| {
        meta.get(key)
            .ok_or_else(|| Error::format(&meta_path, format!("missing key {key:?}")))
    };
    let subject_id = field("subject_id")?.clone();
    let eye = field("eye")?.parse().map_err(|e: Error| Error::format(&meta_path, e.to_string()))?;
    let label = field("label")?.parse().map_err(|e: Error| Error::format(&meta_path, e.to_string()))?;
    let fps = match meta.get("fps") {
        Some(v) => v
            .parse::<f64>()
            .map_err(|_| Error::format(&meta_path, format!("bad fps {v:?}")))?,
        None => DEFAULT_FPS,
    };
    let sequence = match meta.get("sequence") {
        Some(v) => v
            .parse::<usize>()
            .map_err(|_| Error::format(&meta_path, format!("bad sequence {v:?}")))?,
        None => 0,
    };

    let mut names: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "pgm"))
        .collect();
    names.sort();
    let frames = names.iter().map(read_pgm).collect::<Result<Vec<_>>>()?;

    let seq = FrameSequence {
        frames,
        fps,
        subject_id,
        eye,
        label,
        sequence,
    };
    seq.validate().map_err(|e| Error::format(dir, e.to_string()))?;
    Ok(seq)
}

/// Writes frames as `frame_00000.pgm`, ... plus the metadata file.
pub fn write_frames(dir: impl AsRef<Path>, seq: &FrameSequence) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in seq.frames.iter().enumerate() {
        write_pgm(dir.join(format!("frame_{i:05}.pgm")), frame)?;
    }
    let meta = format!(
        "subject_id={}\neye={}\nfps={}\nlabel={}\nsequence={}\n",
        seq.subject_id, seq.eye, seq.fps, seq.label, seq.sequence
    );
    let path = dir.join(META_FILE);
    fs::write(&path, meta).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sequence(frames: Vec<GrayImage>) -> FrameSequence {
        FrameSequence {
            frames,
            fps: 60.0,
            subject_id: "pd01".into(),
            eye: Eye::Left,
            label: ClassLabel::Pd,
            sequence: 2,
        }
    }

    #[test]
    fn loads_full_size_clip() {
        let dir = tempfile::tempdir().unwrap();
        // 5 s at 60 fps of a 210×140 crop
        let frames = (0..300).map(|t| GrayImage::filled(210, 140, (t % 256) as u8)).collect();
        write_frames(dir.path(), &sequence(frames)).unwrap();
        let seq = load_frames(dir.path()).unwrap();
        assert_eq!(seq.frames.len(), 300);
        assert_eq!((seq.width(), seq.height()), (210, 140));
        assert_eq!(seq.frames[299].get(0, 0) as usize, 299 % 256);
        assert_eq!(seq.sequence, 2);
    }

    #[test]
    fn single_frame_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_frames(dir.path(), &sequence(vec![GrayImage::filled(4, 4, 0)])).unwrap();
        assert!(load_frames(dir.path()).is_err());
    }

    #[test]
    fn mixed_sizes_name_first_offender() {
        let frames = vec![
            GrayImage::filled(4, 4, 0),
            GrayImage::filled(4, 4, 0),
            GrayImage::filled(5, 4, 0),
            GrayImage::filled(3, 4, 0),
        ];
        let err = sequence(frames).validate().unwrap_err().to_string();
        assert!(err.contains("frame 2"), "{err}");
    }

    #[test]
    fn missing_metadata_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let frames = vec![GrayImage::filled(4, 4, 0), GrayImage::filled(4, 4, 1)];
        write_frames(dir.path(), &sequence(frames)).unwrap();
        fs::write(dir.path().join(META_FILE), "subject_id=pd01\neye=left\n").unwrap();
        assert!(load_frames(dir.path()).is_err());
        fs::remove_file(dir.path().join(META_FILE)).unwrap();
        assert!(matches!(load_frames(dir.path()), Err(Error::Io { .. })));
    }
}
