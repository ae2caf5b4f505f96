//! AnoGAN baseline: a plain DCGAN trained on PD slices. A test image is
//! scored by searching the latent space for the code whose generated image
//! best matches it, in pixels and in discriminator features.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::arch;
use crate::dataio::ClassLabel;
use crate::error::{Error, Result};
use crate::ganomaly::{bce_pair, discriminator_gradients, P_CLAMP};
use crate::numerics::{adam_step, check_gradients, AdamConfig, AdamState, GradCheckConfig, GradCheckReport, Network, Tensor};
use crate::numerics::network::INIT_STD;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InversionConfig {
    pub steps: usize,
    /// Weight of the feature term; the pixel term gets `1 − lambda`.
    pub lambda: f64,
    pub step_size: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            steps: 500,
            lambda: 0.1,
            step_size: 0.01,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("inversion needs at least one step".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidConfig(format!("step size must be positive, got {}", self.step_size)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnoganConfig {
    pub nz: usize,
    pub ngf: usize,
    pub image_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub inversion: InversionConfig,
    pub seed: u64,
}

impl Default for AnoganConfig {
    fn default() -> Self {
        AnoganConfig {
            nz: 100,
            ngf: 64,
            image_size: 64,
            epochs: 60,
            batch_size: 1,
            adam: AdamConfig::default(),
            inversion: InversionConfig::default(),
            seed: 0,
        }
    }
}

impl AnoganConfig {
    pub fn validate(&self) -> Result<()> {
        arch::check_image_size(self.image_size)?;
        if self.nz == 0 || self.ngf == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("nz, ngf and batch_size must be positive".into()));
        }
        self.inversion.validate()?;
        self.adam.validate()
    }

    pub fn image_shape(&self) -> [usize; 3] {
        [1, self.image_size, self.image_size]
    }
}

/// Epoch means of the two GAN losses.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct GanLosses {
    /// Non-saturating generator loss −ln D(G(z)).
    pub gen: f64,
    pub disc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Inversion {
    pub z: Tensor,
    /// Loss at the returned `z`, the lowest seen.
    pub loss: f64,
    /// Loss at the initial code and after every update.
    pub trace: Vec<f64>,
}

impl Inversion {
    /// Running minimum of `trace`.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.trace
            .iter()
            .scan(f64::INFINITY, |best, &v| {
                *best = best.min(v);
                Some(*best)
            })
            .collect()
    }
}

pub const NET_PREFIXES: [&str; 2] = ["g", "d"];

#[derive(Clone, Debug, PartialEq)]
pub struct AnoganModel {
    config: AnoganConfig,
    g: Network,
    d: Network,
    feature_layer: usize,
    steps: u64,
    epochs_trained: usize,
}

impl AnoganModel {
    pub fn build(config: AnoganConfig) -> Result<Self> {
        Self::build_with_init_std(config, INIT_STD)
    }

    pub fn build_with_init_std(config: AnoganConfig, std: f64) -> Result<Self> {
        config.validate()?;
        let AnoganConfig { nz, ngf, image_size: s, seed: master, .. } = config;
        let g = Network::with_init_std(
            &[nz, 1, 1],
            arch::decoder(s, ngf, nz),
            seed::derive(master, "anogan/g"),
            std,
        )?;
        let (d_layers, feature_layer) = arch::discriminator(s, ngf);
        let d = Network::with_init_std(&config.image_shape(), d_layers, seed::derive(master, "anogan/d"), std)?;
        Ok(AnoganModel {
            config,
            g,
            d,
            feature_layer,
            steps: 0,
            epochs_trained: 0,
        })
    }

    pub fn config(&self) -> &AnoganConfig {
        &self.config
    }

    pub fn set_inversion(&mut self, inversion: InversionConfig) -> Result<()> {
        inversion.validate()?;
        self.config.inversion = inversion;
        Ok(())
    }

    pub fn generator(&self) -> &Network {
        &self.g
    }

    pub fn discriminator(&self) -> &Network {
        &self.d
    }

    pub fn feature_layer(&self) -> usize {
        self.feature_layer
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn epochs_trained(&self) -> usize {
        self.epochs_trained
    }

    pub fn restore_counters(&mut self, steps: u64, epochs_trained: usize) {
        self.steps = steps;
        self.epochs_trained = epochs_trained;
    }

    pub fn latent_shape(&self) -> [usize; 3] {
        [self.config.nz, 1, 1]
    }

    /// A standard normal code.
    pub fn sample_latent(&self, rng: &mut impl rand::Rng) -> Tensor {
        Tensor::from_fn(&self.latent_shape(), |_| StandardNormal.sample(rng))
    }

    pub fn generate(&self, z: &Tensor) -> Result<Tensor> {
        self.g.apply(z)
    }

    /// Discriminator probability that `x` is real.
    pub fn discriminate(&self, x: &Tensor) -> Result<f64> {
        Ok(self.d.apply(x)?.data()[0])
    }

    /// Parameters as `(name, tensor)`: G then D.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        NET_PREFIXES
            .iter()
            .zip([&self.g, &self.d])
            .flat_map(|(prefix, net)| net.param_names(prefix).into_iter().zip(net.params()))
            .collect()
    }

    pub fn load_params(&mut self, tensors: Vec<(String, Tensor)>) -> Result<()> {
        let names: Vec<String> = self.named_params().into_iter().map(|(n, _)| n).collect();
        if names.len() != tensors.len() {
            return Err(Error::InvalidData(format!(
                "expected {} parameter tensors, got {}",
                names.len(),
                tensors.len()
            )));
        }
        if let Some((want, (got, _))) = names.iter().zip(&tensors).find(|(w, (g, _))| w != &g) {
            return Err(Error::InvalidData(format!("expected parameter {want}, got {got}")));
        }
        let mut staged = self.clone();
        let mut iter = tensors.into_iter().map(|(_, t)| t);
        for net in [&mut staged.g, &mut staged.d] {
            for i in 0..net.params().len() {
                net.set_param(i, iter.next().expect("count checked"))?;
            }
        }
        *self = staged;
        Ok(())
    }

    /// Non-saturating generator loss for code `z` and its gradient with
    /// respect to G's parameters.
    pub fn generator_gradients(&self, z: &Tensor) -> Result<(f64, Vec<Tensor>)> {
        let t_g = self.g.forward(z)?;
        let t_d = self.d.forward(t_g.output())?;
        let p = t_d.output().data()[0].clamp(P_CLAMP, 1.0 - P_CLAMP);
        let g_d = self.d.backward(&t_d, &Tensor::filled(t_d.output().shape(), -1.0 / p))?;
        let g_g = self.g.backward(&t_g, &g_d.input)?;
        Ok((-p.ln(), g_g.params))
    }

    /// Trains on `data`, which must be PD only: per batch a D step on real
    /// images and fresh fakes, then a G step on the same codes.
    pub fn train(&mut self, data: &[(ClassLabel, Tensor)]) -> Result<Vec<GanLosses>> {
        self.train_with_progress(data, |_, _, _| {})
    }

    pub fn train_with_progress(
        &mut self,
        data: &[(ClassLabel, Tensor)],
        mut progress: impl FnMut(&Self, usize, &GanLosses),
    ) -> Result<Vec<GanLosses>> {
        if let Some(i) = data.iter().position(|(l, _)| *l != ClassLabel::Pd) {
            return Err(Error::OneClass(format!("training sample {i} is labeled {}", data[i].0)));
        }
        let shape = self.config.image_shape();
        if let Some(i) = data.iter().position(|(_, x)| x.shape() != shape) {
            return Err(Error::Shape {
                layer: 0,
                expected: shape.to_vec(),
                got: data[i].1.shape().to_vec(),
            });
        }
        if self.config.epochs > 0 && data.is_empty() {
            return Err(Error::InvalidData("empty training set".into()));
        }

        let adam = self.config.adam;
        let mut opt_g = AdamState::new(adam, self.g.params());
        let mut opt_d = AdamState::new(adam, self.d.params());
        let mut history = Vec::with_capacity(self.config.epochs);
        let mut order: Vec<usize> = (0..data.len()).collect();

        for _ in 0..self.config.epochs {
            let epoch = self.epochs_trained;
            let mut shuffle = seed::rng(seed::derive(self.config.seed, &format!("anogan/shuffle/{epoch}")));
            let mut latent = seed::rng(seed::derive(self.config.seed, &format!("anogan/latent/{epoch}")));
            order.sort_unstable();
            order.shuffle(&mut shuffle);
            let mut sums = GanLosses::default();

            for batch in order.chunks(self.config.batch_size) {
                let inv = 1.0 / batch.len() as f64;
                let codes: Vec<Tensor> = batch.iter().map(|_| self.sample_latent(&mut latent)).collect();
                let context = |what: &str, steps: u64| Error::NonFinite(format!("{what} at epoch {epoch}, step {steps}"));

                let mut d_acc: Option<Vec<Tensor>> = None;
                for (&i, z) in batch.iter().zip(&codes) {
                    let fake = self.g.apply(z)?;
                    let (disc, grads) = discriminator_gradients(&self.d, &data[i].1, &fake)?;
                    if !disc.is_finite() {
                        return Err(context("discriminator loss", self.steps));
                    }
                    sums.disc += disc;
                    accumulate(&mut d_acc, grads, inv)?;
                }
                adam_step(self.d.params_mut(), &d_acc.expect("non-empty batch"), &mut opt_d)
                    .map_err(|e| Error::NonFinite(format!("epoch {epoch}, step {}: {e}", self.steps)))?;

                let mut g_acc: Option<Vec<Tensor>> = None;
                for z in &codes {
                    let (gen, grads) = self.generator_gradients(z)?;
                    if !gen.is_finite() {
                        return Err(context("generator loss", self.steps));
                    }
                    sums.gen += gen;
                    accumulate(&mut g_acc, grads, inv)?;
                }
                adam_step(self.g.params_mut(), &g_acc.expect("non-empty batch"), &mut opt_g)
                    .map_err(|e| Error::NonFinite(format!("epoch {epoch}, step {}: {e}", self.steps)))?;
                self.steps += 1;
            }

            let n = data.len() as f64;
            let mean = GanLosses {
                gen: sums.gen / n,
                disc: sums.disc / n,
            };
            self.epochs_trained += 1;
            progress(self, epoch, &mean);
            history.push(mean);
        }
        Ok(history)
    }

    /// Inversion loss `(1 − λ)·‖X − G(z)‖₁ + λ·‖f(X) − f(G(z))‖₂²` for a
    /// precomputed feature map `f_x` of the target.
    fn inversion_loss_with(&self, x: &Tensor, f_x: &Tensor, z: &Tensor, lambda: f64) -> Result<f64> {
        let g = self.g.apply(z)?;
        let trace = self.d.forward(&g)?;
        let f_g = trace.layer_output(self.feature_layer);
        Ok((1.0 - lambda) * l1(x, &g) + lambda * sq(f_x, f_g))
    }

    pub fn inversion_loss(&self, x: &Tensor, z: &Tensor, lambda: f64) -> Result<f64> {
        let f_x = self.feature_map(x)?;
        self.inversion_loss_with(x, &f_x, z, lambda)
    }

    fn feature_map(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.d.forward(x)?.layer_output(self.feature_layer).clone())
    }

    fn inversion_gradient_with(&self, x: &Tensor, f_x: &Tensor, z: &Tensor, lambda: f64) -> Result<(f64, Tensor)> {
        let t_g = self.g.forward(z)?;
        let g = t_g.output();
        let t_d = self.d.forward(g)?;
        let f_g = t_d.layer_output(self.feature_layer);
        let loss = (1.0 - lambda) * l1(x, g) + lambda * sq(f_x, f_g);

        let tap = Tensor::from_fn(f_g.shape(), |i| 2.0 * lambda * (f_g.data()[i] - f_x.data()[i]));
        let mut gx = self.d.backward_with_taps(&t_d, None, &[(self.feature_layer, &tap)])?.input;
        let pixel = Tensor::from_fn(g.shape(), |i| (1.0 - lambda) * sign(g.data()[i] - x.data()[i]));
        gx.add_assign(&pixel)?;
        Ok((loss, self.g.backward(&t_g, &gx)?.input))
    }

    /// Inversion loss and its gradient with respect to `z`.
    pub fn inversion_gradient(&self, x: &Tensor, z: &Tensor, lambda: f64) -> Result<(f64, Tensor)> {
        let f_x = self.feature_map(x)?;
        self.inversion_gradient_with(x, &f_x, z, lambda)
    }

    /// Plain gradient descent on the inversion loss from `init`, or from a
    /// standard normal code drawn from `seed`. Keeps the best code seen.
    pub fn invert_latent(&self, x: &Tensor, cfg: &InversionConfig, seed: u64, init: Option<&Tensor>) -> Result<Inversion> {
        cfg.validate()?;
        let shape = self.config.image_shape();
        if x.shape() != shape {
            return Err(Error::Shape {
                layer: 0,
                expected: shape.to_vec(),
                got: x.shape().to_vec(),
            });
        }
        let mut z = match init {
            Some(z0) => {
                if z0.shape() != self.latent_shape() {
                    return Err(Error::InvalidTensor(format!(
                        "initial code has shape {:?}, expected {:?}",
                        z0.shape(),
                        self.latent_shape()
                    )));
                }
                z0.clone()
            }
            None => self.sample_latent(&mut seed::rng(seed)),
        };
        let f_x = self.feature_map(x)?;
        let mut trace = Vec::with_capacity(cfg.steps + 1);
        let mut best = (f64::INFINITY, z.clone());
        for step in 0..=cfg.steps {
            let (loss, grad) = self.inversion_gradient_with(x, &f_x, &z, cfg.lambda)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("inversion loss at step {step}")));
            }
            trace.push(loss);
            if loss < best.0 {
                best = (loss, z.clone());
            }
            if step < cfg.steps {
                z.data_mut()
                    .iter_mut()
                    .zip(grad.data())
                    .for_each(|(v, g)| *v -= cfg.step_size * g);
            }
        }
        Ok(Inversion {
            z: best.1,
            loss: best.0,
            trace,
        })
    }

    /// Anomaly score: the lowest inversion loss found.
    pub fn score(&self, x: &Tensor, cfg: &InversionConfig, seed: u64) -> Result<f64> {
        Ok(self.invert_latent(x, cfg, seed, None)?.loss)
    }
}

/// Score of `x` under `model` with the model's own inversion settings.
pub fn anogan_score(model: &AnoganModel, x: &Tensor, seed: u64) -> Result<f64> {
    model.score(x, &model.config.inversion, seed)
}

/// Finite-difference check of the inversion gradient with respect to `z`.
pub fn grad_check_inversion(
    model: &AnoganModel,
    x: &Tensor,
    z: &Tensor,
    lambda: f64,
    cfg: GradCheckConfig,
) -> Result<GradCheckReport> {
    let (_, grad) = model.inversion_gradient(x, z, lambda)?;
    let f_x = model.feature_map(x)?;
    let mut params = vec![z.clone()];
    let loss = |p: &[Tensor]| model.inversion_loss_with(x, &f_x, &p[0], lambda).expect("valid code");
    Ok(check_gradients(&mut params, &["z".to_string()], &[grad], loss, cfg))
}

/// D's BCE on one real image and one fake, exposed for monitoring.
pub fn gan_disc_loss(model: &AnoganModel, real: &Tensor, fake: &Tensor) -> Result<f64> {
    Ok(bce_pair(model.discriminate(real)?, model.discriminate(fake)?))
}

fn l1(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum()
}

fn sq(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn accumulate(acc: &mut Option<Vec<Tensor>>, grads: Vec<Tensor>, weight: f64) -> Result<()> {
    match acc {
        None => {
            let mut g = grads;
            g.iter_mut().for_each(|t| t.scale(weight));
            *acc = Some(g);
        }
        Some(sum) => {
            for (s, mut g) in sum.iter_mut().zip(grads) {
                g.scale(weight);
                s.add_assign(&g)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mini(seed: u64) -> AnoganConfig {
        AnoganConfig {
            nz: 6,
            ngf: 2,
            image_size: 16,
            epochs: 1,
            seed,
            ..AnoganConfig::default()
        }
    }

    fn pd_images(n: usize, seed: u64) -> Vec<(ClassLabel, Tensor)> {
        let mut rng = seed::rng(seed);
        (0..n)
            .map(|_| {
                let t = Tensor::from_fn(&[1, 16, 16], |_| rand::Rng::random_range(&mut rng, -1.0..1.0));
                (ClassLabel::Pd, t)
            })
            .collect()
    }

    #[test]
    fn rejects_bad_inversion_settings() {
        let bad = [
            InversionConfig { steps: 0, ..Default::default() },
            InversionConfig { lambda: 1.5, ..Default::default() },
            InversionConfig { step_size: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn generated_image_is_a_fixed_point() {
        let model = AnoganModel::build(mini(3)).unwrap();
        let z0 = model.sample_latent(&mut seed::rng(9));
        let x = model.generate(&z0).unwrap();
        let inv = model.invert_latent(&x, &InversionConfig { steps: 5, ..Default::default() }, 0, Some(&z0)).unwrap();
        assert_eq!(inv.trace[0], 0.0);
        assert_eq!(inv.loss, 0.0);
        assert_eq!(inv.z, z0);
    }

    #[test]
    fn best_loss_is_the_trace_minimum() {
        let model = AnoganModel::build(mini(4)).unwrap();
        let x = pd_images(1, 5).remove(0).1;
        let cfg = InversionConfig { steps: 20, step_size: 0.5, ..Default::default() };
        let inv = model.invert_latent(&x, &cfg, 7, None).unwrap();
        assert_eq!(inv.trace.len(), 21);
        let min = inv.trace.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(inv.loss, min);
        assert_eq!(*inv.best_so_far().last().unwrap(), min);
        assert_eq!(model.inversion_loss(&x, &inv.z, cfg.lambda).unwrap(), min);
    }

    #[test]
    fn one_class_and_zero_epochs() {
        let mut model = AnoganModel::build(AnoganConfig { epochs: 0, ..mini(1) }).unwrap();
        let before = model.clone();
        assert!(model.train(&pd_images(2, 1)).unwrap().is_empty());
        assert_eq!(model, before);
        let mut data = pd_images(2, 1);
        data[1].0 = ClassLabel::Control;
        assert!(matches!(model.train(&data), Err(Error::OneClass(_))));
    }

    #[test]
    fn training_is_deterministic() {
        let data = pd_images(4, 2);
        let run = || {
            let mut m = AnoganModel::build(AnoganConfig { batch_size: 2, epochs: 2, ..mini(5) }).unwrap();
            let h = m.train(&data).unwrap();
            (m, h)
        };
        let (a, ha) = run();
        let (b, hb) = run();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        assert_eq!(a.steps(), 4);
        assert_ne!(a, AnoganModel::build(AnoganConfig { batch_size: 2, epochs: 2, ..mini(5) }).unwrap());
    }

    #[test]
    fn params_round_trip() {
        let a = AnoganModel::build(mini(1)).unwrap();
        let mut b = AnoganModel::build(mini(2)).unwrap();
        let tensors = a.named_params().into_iter().map(|(n, t)| (n, t.clone())).collect();
        b.load_params(tensors).unwrap();
        assert_eq!(a.named_params(), b.named_params());
        assert!(b.load_params(vec![]).is_err());
    }
}
