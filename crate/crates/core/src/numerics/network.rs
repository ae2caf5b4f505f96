use std::ops::Range;

use rand_distr::{Distribution, Normal};

use super::layers::{LayerSpec, ParamInit};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::seed;

/// Standard deviation of the Gaussian weight initialization.
pub const INIT_STD: f64 = 0.02;

/// A feed-forward stack of layers with its parameter store.
///
/// Parameters are laid out layer by layer in `param_shapes` order; the
/// initialization is a pure function of the seed and the layer list.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    /// Output shape of every layer.
    shapes: Vec<Vec<usize>>,
    params: Vec<Tensor>,
    slots: Vec<Range<usize>>,
    roles: Vec<&'static str>,
    seed: u64,
}

/// Per-layer activations of one forward pass: `activations[0]` is the input
/// and `activations[i + 1]` the output of layer `i`.
#[derive(Clone, Debug)]
pub struct Trace {
    activations: Vec<Tensor>,
}

impl Trace {
    pub fn input(&self) -> &Tensor {
        &self.activations[0]
    }

    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("trace holds the input")
    }

    /// Output of layer `layer`.
    pub fn layer_output(&self, layer: usize) -> &Tensor {
        &self.activations[layer + 1]
    }

    pub fn activations(&self) -> &[Tensor] {
        &self.activations
    }

    pub fn into_output(mut self) -> Tensor {
        self.activations.pop().expect("trace holds the input")
    }
}

#[derive(Clone, Debug)]
pub struct Gradients {
    pub params: Vec<Tensor>,
    pub input: Tensor,
}

impl Network {
    pub fn new(input_shape: &[usize], layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        Self::with_init_std(input_shape, layers, seed, INIT_STD)
    }

    pub fn with_init_std(input_shape: &[usize], layers: Vec<LayerSpec>, seed: u64, std: f64) -> Result<Self> {
        if input_shape.is_empty() || input_shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidLayer {
                layer: 0,
                reason: format!("invalid input shape {input_shape:?}"),
            });
        }
        let mut shapes = Vec::with_capacity(layers.len());
        let mut current = input_shape.to_vec();
        for (i, layer) in layers.iter().enumerate() {
            current = layer
                .output_shape(&current)
                .map_err(|reason| Error::InvalidLayer { layer: i, reason })?;
            shapes.push(current.clone());
        }

        let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidConfig(format!("init std {std}: {e}")))?;
        let mut rng = seed::rng(seed);
        let mut params = Vec::new();
        let mut slots = Vec::with_capacity(layers.len());
        let mut roles = Vec::new();
        for layer in &layers {
            let start = params.len();
            for p in layer.param_shapes() {
                let t = match p.init {
                    ParamInit::Gaussian => Tensor::from_fn(&p.shape, |_| normal.sample(&mut rng)),
                    ParamInit::Constant(v) => Tensor::filled(&p.shape, v),
                };
                params.push(t);
                roles.push(p.role);
            }
            slots.push(start..params.len());
        }
        Ok(Network {
            input_shape: input_shape.to_vec(),
            layers,
            shapes,
            params,
            slots,
            roles,
            seed,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().map(Vec::as_slice).unwrap_or(&self.input_shape)
    }

    /// Output shape of layer `layer`.
    pub fn layer_shape(&self, layer: usize) -> &[usize] {
        &self.shapes[layer]
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Stable parameter names: `<prefix>.<layer index>.<role>`.
    pub fn param_names(&self, prefix: &str) -> Vec<String> {
        self.slots
            .iter()
            .enumerate()
            .flat_map(|(layer, slot)| slot.clone().map(move |p| (layer, p)))
            .map(|(layer, p)| format!("{prefix}.{layer}.{}", self.roles[p]))
            .collect()
    }

    /// Replaces one parameter tensor, keeping its shape.
    pub fn set_param(&mut self, index: usize, value: Tensor) -> Result<()> {
        let slot = self
            .params
            .get_mut(index)
            .ok_or_else(|| Error::InvalidTensor(format!("no parameter {index}")))?;
        slot.ensure_same_shape(&value)?;
        *slot = value;
        Ok(())
    }

    pub fn forward(&self, input: &Tensor) -> Result<Trace> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(Error::Shape {
                layer: 0,
                expected: self.input_shape.clone(),
                got: input.shape().to_vec(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let y = layer.forward(&self.params[self.slots[i].clone()], &activations[i], &self.shapes[i]);
            activations.push(y);
        }
        Ok(Trace { activations })
    }

    /// Convenience forward returning only the final activation.
    pub fn apply(&self, input: &Tensor) -> Result<Tensor> {
        Ok(self.forward(input)?.into_output())
    }

    pub fn backward(&self, trace: &Trace, output_grad: &Tensor) -> Result<Gradients> {
        self.backward_with_taps(trace, Some(output_grad), &[])
    }

    /// Reverse pass with cotangents injected at the final output (optional)
    /// and at the outputs of intermediate layers (`taps`, as
    /// `(layer index, gradient)`). Gradients of all injection points are
    /// summed, which is the gradient of the sum of the implied scalars.
    pub fn backward_with_taps(
        &self,
        trace: &Trace,
        output_grad: Option<&Tensor>,
        taps: &[(usize, &Tensor)],
    ) -> Result<Gradients> {
        self.check_trace(trace)?;
        let last = self.layers.len();
        let mut grad = match output_grad {
            Some(g) => {
                if g.shape() != trace.output().shape() {
                    return Err(Error::Shape {
                        layer: last.saturating_sub(1),
                        expected: trace.output().shape().to_vec(),
                        got: g.shape().to_vec(),
                    });
                }
                g.clone()
            }
            None => Tensor::zeros(trace.output().shape()),
        };
        for &(layer, g) in taps {
            if layer >= last || g.shape() != self.shapes[layer].as_slice() {
                return Err(Error::Shape {
                    layer,
                    expected: self.shapes.get(layer).cloned().unwrap_or_default(),
                    got: g.shape().to_vec(),
                });
            }
        }

        let mut param_grads: Vec<Option<Tensor>> = vec![None; self.params.len()];
        for i in (0..last).rev() {
            for &(layer, g) in taps {
                if layer == i {
                    grad.add_assign(g)?;
                }
            }
            let slot = self.slots[i].clone();
            let (pg, gi) = self.layers[i].backward(
                &self.params[slot.clone()],
                &trace.activations[i],
                &trace.activations[i + 1],
                &grad,
            );
            for (k, g) in slot.zip(pg) {
                param_grads[k] = Some(g);
            }
            grad = gi;
        }
        let params = param_grads
            .into_iter()
            .zip(&self.params)
            .map(|(g, p)| g.unwrap_or_else(|| Tensor::zeros(p.shape())))
            .collect();
        Ok(Gradients { params, input: grad })
    }

    fn check_trace(&self, trace: &Trace) -> Result<()> {
        let acts = &trace.activations;
        if acts.len() != self.layers.len() + 1 {
            return Err(Error::InvalidData(format!(
                "trace has {} activations, network expects {}",
                acts.len(),
                self.layers.len() + 1
            )));
        }
        if acts[0].shape() != self.input_shape.as_slice() {
            return Err(Error::Shape {
                layer: 0,
                expected: self.input_shape.clone(),
                got: acts[0].shape().to_vec(),
            });
        }
        for (i, shape) in self.shapes.iter().enumerate() {
            if acts[i + 1].shape() != shape.as_slice() {
                return Err(Error::Shape {
                    layer: i,
                    expected: shape.clone(),
                    got: acts[i + 1].shape().to_vec(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::layers::ConvSpec;

    fn identity_conv() -> Network {
        let mut net = Network::new(&[1, 5, 6], vec![LayerSpec::Conv2d(ConvSpec::new(1, 1, 1, 1, 0))], 1).unwrap();
        net.set_param(0, Tensor::filled(&[1, 1, 1, 1], 1.0)).unwrap();
        net
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let net = identity_conv();
        let x = Tensor::from_fn(&[1, 5, 6], |i| (i as f64).sin());
        assert_eq!(net.apply(&x).unwrap(), x);
    }

    #[test]
    fn tanh_of_zero_is_zero() {
        let net = Network::new(&[2, 3, 3], vec![LayerSpec::Tanh], 0).unwrap();
        let y = net.apply(&Tensor::zeros(&[2, 3, 3])).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ones_kernel_on_constant_image_sums_nine() {
        let mut net = Network::new(&[1, 6, 6], vec![LayerSpec::Conv2d(ConvSpec::new(1, 1, 3, 1, 1))], 0).unwrap();
        net.set_param(0, Tensor::filled(&[1, 1, 3, 3], 1.0)).unwrap();
        let c = 1.75;
        let y = net.apply(&Tensor::filled(&[1, 6, 6], c)).unwrap();
        for r in 1..5 {
            for col in 1..5 {
                assert_eq!(y.data()[r * 6 + col], 9.0 * c);
            }
        }
        // corners only see four taps
        assert_eq!(y.data()[0], 4.0 * c);
    }

    #[test]
    fn shape_mismatch_names_the_layer() {
        let net = identity_conv();
        match net.forward(&Tensor::zeros(&[1, 5, 5])) {
            Err(Error::Shape { layer, .. }) => assert_eq!(layer, 0),
            other => panic!("expected shape error, got {other:?}"),
        }
        let bad = Network::new(
            &[1, 8, 8],
            vec![
                LayerSpec::Conv2d(ConvSpec::new(1, 2, 4, 2, 1)),
                LayerSpec::Conv2d(ConvSpec::new(3, 2, 4, 2, 1)),
            ],
            0,
        );
        assert!(matches!(bad, Err(Error::InvalidLayer { layer: 1, .. })));
    }

    #[test]
    fn linear_gradient_is_outer_product() {
        // loss = ½‖Wx‖², dL/dW = y xᵀ
        let net = Network::with_init_std(
            &[3],
            vec![LayerSpec::Linear {
                inputs: 3,
                outputs: 2,
                bias: false,
            }],
            5,
            0.5,
        )
        .unwrap();
        let x = Tensor::vector(vec![0.5, -1.0, 2.0]);
        let trace = net.forward(&x).unwrap();
        let y = trace.output().clone();
        let grads = net.backward(&trace, &y).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let want = y.data()[i] * x.data()[j];
                assert!((grads.params[0].data()[i * 3 + j] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let net = Network::with_init_std(
            &[1, 8, 8],
            vec![
                LayerSpec::Conv2d(ConvSpec::new(1, 3, 4, 2, 1).with_bias()),
                LayerSpec::SpatialNorm { channels: 3, eps: 1e-6 },
                LayerSpec::LeakyRelu { slope: 0.2 },
                LayerSpec::Flatten,
                LayerSpec::Linear {
                    inputs: 48,
                    outputs: 2,
                    bias: true,
                },
            ],
            3,
            0.3,
        )
        .unwrap();
        let x = Tensor::from_fn(&[1, 8, 8], |i| (i as f64 * 0.3).cos());
        let trace = net.forward(&x).unwrap();
        let g = net.backward(&trace, &Tensor::zeros(&[2])).unwrap();
        assert!(g.params.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
        assert!(g.input.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_seed_same_parameters() {
        let layers = vec![
            LayerSpec::Conv2d(ConvSpec::new(1, 4, 4, 2, 1)),
            LayerSpec::SpatialNorm { channels: 4, eps: 1e-6 },
        ];
        let a = Network::new(&[1, 16, 16], layers.clone(), 42).unwrap();
        let b = Network::new(&[1, 16, 16], layers.clone(), 42).unwrap();
        let c = Network::new(&[1, 16, 16], layers, 43).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
        assert_eq!(
            a.param_names("g"),
            vec!["g.0.weight", "g.1.scale", "g.1.shift"]
        );
    }

    #[test]
    fn mismatched_trace_is_rejected() {
        let a = identity_conv();
        let b = Network::new(&[1, 5, 6], vec![LayerSpec::Tanh, LayerSpec::Relu], 0).unwrap();
        let trace = a.forward(&Tensor::zeros(&[1, 5, 6])).unwrap();
        assert!(b.backward(&trace, &Tensor::zeros(&[1, 5, 6])).is_err());
        assert!(a.backward(&trace, &Tensor::zeros(&[1, 5, 5])).is_err());
    }
}
