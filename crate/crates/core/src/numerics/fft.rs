//! Radix-2 decimation-in-time FFT and the 2-D magnitude spectrum.

use std::f64::consts::PI;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// In-place forward FFT of a complex sequence held as separate real and
/// imaginary parts. The length must be a power of two.
pub fn fft_in_place(re: &mut [f64], im: &mut [f64]) -> Result<()> {
    let n = re.len();
    if n != im.len() {
        return Err(Error::InvalidTensor("real and imaginary lengths differ".into()));
    }
    if !n.is_power_of_two() {
        return Err(Error::InvalidTensor(format!("FFT length {n} is not a power of two")));
    }
    if n == 1 {
        return Ok(());
    }

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let theta = -2.0 * PI / len as f64;
        for k in 0..half {
            let (s, c) = (theta * k as f64).sin_cos();
            for start in (0..n).step_by(len) {
                let (a, b) = (start + k, start + k + half);
                let tr = re[b] * c - im[b] * s;
                let ti = re[b] * s + im[b] * c;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
        len *= 2;
    }
    Ok(())
}

fn image_dims(image: &Tensor) -> Result<(usize, usize)> {
    let (h, w) = match image.shape() {
        [h, w] => (*h, *w),
        [1, h, w] => (*h, *w),
        other => {
            return Err(Error::InvalidTensor(format!(
                "expected an H×W image, got shape {other:?}"
            )))
        }
    };
    if !h.is_power_of_two() || !w.is_power_of_two() {
        return Err(Error::InvalidTensor(format!(
            "2-D DFT needs power-of-two sides, got {h}×{w}"
        )));
    }
    Ok((h, w))
}

/// Unnormalized 2-D DFT of a real image (`[H, W]` or `[1, H, W]`), returned
/// as row-major real and imaginary planes with DC at (0, 0).
pub fn dft2d(image: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
    let (h, w) = image_dims(image)?;
    let mut re = image.data().to_vec();
    let mut im = vec![0.0; h * w];
    for r in 0..h {
        fft_in_place(&mut re[r * w..(r + 1) * w], &mut im[r * w..(r + 1) * w])?;
    }
    let mut col_re = vec![0.0; h];
    let mut col_im = vec![0.0; h];
    for c in 0..w {
        for r in 0..h {
            col_re[r] = re[r * w + c];
            col_im[r] = im[r * w + c];
        }
        fft_in_place(&mut col_re, &mut col_im)?;
        for r in 0..h {
            re[r * w + c] = col_re[r];
            im[r * w + c] = col_im[r];
        }
    }
    Ok((re, im))
}

/// |DFT| of a real image, shaped `[H, W]`.
pub fn dft2d_magnitude(image: &Tensor) -> Result<Tensor> {
    let (h, w) = image_dims(image)?;
    let (re, im) = dft2d(image)?;
    let mag = re.iter().zip(&im).map(|(a, b)| a.hypot(*b)).collect();
    Tensor::new(vec![h, w], mag)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_is_dc_only() {
        let c = 0.75;
        let mag = dft2d_magnitude(&Tensor::filled(&[8, 4], c)).unwrap();
        assert!((mag.data()[0] - 32.0 * c).abs() < 1e-12);
        assert!(mag.data()[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_image_zero_spectrum() {
        let mag = dft2d_magnitude(&Tensor::zeros(&[4, 4])).unwrap();
        assert!(mag.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(dft2d_magnitude(&Tensor::zeros(&[6, 8])).is_err());
        assert!(dft2d_magnitude(&Tensor::zeros(&[2, 3, 4])).is_err());
    }
}
