//! Binary (P5) 8-bit PGM images.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major 8-bit grayscale image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidData(format!("degenerate image {width}×{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidData(format!(
                "{width}×{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        GrayImage { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Median intensity (lower median for even pixel counts).
    pub fn median(&self) -> u8 {
        let mut hist = [0usize; 256];
        for &p in &self.pixels {
            hist[p as usize] += 1;
        }
        let target = (self.pixels.len() - 1) / 2;
        let mut seen = 0;
        for (v, &count) in hist.iter().enumerate() {
            seen += count;
            if seen > target {
                return v as u8;
            }
        }
        255
    }
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(Error::format(path, format!("expected P5 magic, found {:?}", fields[0])));
    }
    let parse = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::format(path, format!("bad {what} {s:?}")))
    };
    let width = parse(&fields[1], "width")?;
    let height = parse(&fields[2], "height")?;
    let maxval = parse(&fields[3], "maxval")?;
    if maxval != 255 {
        return Err(Error::format(path, format!("only 8-bit maxval 255 is supported, got {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width * height;
    if bytes.len() < pos + n {
        return Err(Error::format(
            path,
            format!("raster holds {} bytes, {width}×{height} needs {n}", bytes.len().saturating_sub(pos)),
        ));
    }
    GrayImage::new(width, height, bytes[pos..pos + n].to_vec()).map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, path)
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let img = GrayImage::from_fn(7, 3, |x, y| (x * 37 + y * 11) as u8);
        let bytes = encode_pgm(&img);
        assert!(bytes.starts_with(b"P5\n7 3\n255\n"));
        assert_eq!(decode_pgm(&bytes, Path::new("mem")).unwrap(), img);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4]);
        let img = decode_pgm(&bytes, Path::new("mem")).unwrap();
        assert_eq!(img.pixels(), &[1, 2, 3, 4]);
    }

    #[test]
    fn rejects_truncated_and_wrong_magic() {
        assert!(decode_pgm(b"P5\n2 2\n255\n\x01\x02", Path::new("mem")).is_err());
        assert!(decode_pgm(b"P2\n1 1\n255\n1", Path::new("mem")).is_err());
        assert!(decode_pgm(b"P5\n1 1\n65535\n\x00\x00", Path::new("mem")).is_err());
    }

    #[test]
    fn median_is_lower_median() {
        let img = GrayImage::new(4, 1, vec![9, 1, 5, 3]).unwrap();
        assert_eq!(img.median(), 3);
    }
}
