//! DCGAN-style layer stacks shared by the GANomaly and AnoGAN models.
//!
//! Encoders halve the spatial size with 4×4 stride-2 convolutions, doubling
//! channels from `ngf` until the map is 4×4, then a 4×4 valid convolution
//! maps to the `[nz, 1, 1]` code. Decoders mirror this with transposed
//! convolutions and end in tanh.

use crate::error::{Error, Result};
use crate::numerics::layers::{ConvSpec, NORM_EPS};
use crate::numerics::LayerSpec;

pub const LEAKY_SLOPE: f64 = 0.2;

/// Checks that `size` is a power of two of at least 16.
pub fn check_image_size(size: usize) -> Result<()> {
    if size < 16 || !size.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "image size must be a power of two >= 16, got {size}"
        )));
    }
    Ok(())
}

/// Channel counts of the stride-2 stages, from `size` down to 4×4.
fn stage_channels(size: usize, ngf: usize) -> Vec<usize> {
    let stages = (size / 4).trailing_zeros() as usize;
    (0..stages).map(|i| ngf << i).collect()
}

/// Convolutional trunk from `[1, size, size]` to `[c_max, 4, 4]`, ending in a
/// leaky ReLU whose output is the trunk's feature map.
fn trunk(size: usize, ngf: usize) -> Vec<LayerSpec> {
    let channels = stage_channels(size, ngf);
    let mut layers = vec![
        LayerSpec::Conv2d(ConvSpec::new(1, channels[0], 4, 2, 1)),
        LayerSpec::LeakyRelu { slope: LEAKY_SLOPE },
    ];
    for w in channels.windows(2) {
        layers.push(LayerSpec::Conv2d(ConvSpec::new(w[0], w[1], 4, 2, 1)));
        layers.push(LayerSpec::SpatialNorm {
            channels: w[1],
            eps: NORM_EPS,
        });
        layers.push(LayerSpec::LeakyRelu { slope: LEAKY_SLOPE });
    }
    layers
}

/// Image `[1, size, size]` to code `[nz, 1, 1]`.
pub fn encoder(size: usize, ngf: usize, nz: usize) -> Vec<LayerSpec> {
    let c_max = *stage_channels(size, ngf).last().expect("size >= 16");
    let mut layers = trunk(size, ngf);
    layers.push(LayerSpec::Conv2d(ConvSpec::new(c_max, nz, 4, 1, 0)));
    layers
}

/// Code `[nz, 1, 1]` to image `[1, size, size]` in (−1, 1).
pub fn decoder(size: usize, ngf: usize, nz: usize) -> Vec<LayerSpec> {
    let channels: Vec<usize> = stage_channels(size, ngf).into_iter().rev().collect();
    let mut layers = vec![
        LayerSpec::Conv2dTranspose(ConvSpec::new(nz, channels[0], 4, 1, 0)),
        LayerSpec::SpatialNorm {
            channels: channels[0],
            eps: NORM_EPS,
        },
        LayerSpec::Relu,
    ];
    for w in channels.windows(2) {
        layers.push(LayerSpec::Conv2dTranspose(ConvSpec::new(w[0], w[1], 4, 2, 1)));
        layers.push(LayerSpec::SpatialNorm {
            channels: w[1],
            eps: NORM_EPS,
        });
        layers.push(LayerSpec::Relu);
    }
    let last = *channels.last().expect("size >= 16");
    layers.push(LayerSpec::Conv2dTranspose(ConvSpec::new(last, 1, 4, 2, 1)));
    layers.push(LayerSpec::Tanh);
    layers
}

/// Image to a `[1, 1, 1]` probability. Returns the layers and the index of
/// the layer whose output is the feature map `f`.
pub fn discriminator(size: usize, ndf: usize) -> (Vec<LayerSpec>, usize) {
    let c_max = *stage_channels(size, ndf).last().expect("size >= 16");
    let mut layers = trunk(size, ndf);
    let feature_layer = layers.len() - 1;
    layers.push(LayerSpec::Conv2d(ConvSpec::new(c_max, 1, 4, 1, 0)));
    layers.push(LayerSpec::Sigmoid);
    (layers, feature_layer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Network;

    #[test]
    fn stacks_have_expected_shapes() {
        for &(size, stages) in &[(16usize, 2usize), (32, 3), (64, 4)] {
            assert_eq!(stage_channels(size, 8).len(), stages);
            let enc = Network::new(&[1, size, size], encoder(size, 4, 10), 0).unwrap();
            assert_eq!(enc.output_shape(), &[10, 1, 1]);
            let dec = Network::new(&[10, 1, 1], decoder(size, 4, 10), 0).unwrap();
            assert_eq!(dec.output_shape(), &[1, size, size]);
            let (layers, f) = discriminator(size, 4);
            let d = Network::new(&[1, size, size], layers, 0).unwrap();
            assert_eq!(d.output_shape(), &[1, 1, 1]);
            assert_eq!(d.layer_shape(f), &[4 << (stages - 1), 4, 4]);
        }
    }

    #[test]
    fn sixty_four_uses_four_stages() {
        assert_eq!(stage_channels(64, 64), vec![64, 128, 256, 512]);
        assert!(check_image_size(48).is_err());
        assert!(check_image_size(8).is_err());
    }
}
