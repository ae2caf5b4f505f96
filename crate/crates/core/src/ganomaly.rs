//! GANomaly: encoder G_E, decoder G_D, second encoder E and discriminator D,
//! trained one-class with a weighted adversarial/contextual/encoder loss.
//!
//! For an input X: z = G_E(X), X' = G_D(z), z' = E(X'). The anomaly score
//! is the latent discrepancy ‖z − z'‖².

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::arch;
use crate::dataio::{ClassLabel, Provenance};
use crate::error::{Error, Result};
use crate::numerics::{
    adam_step, check_gradients, AdamConfig, AdamState, GradCheckConfig, GradCheckReport, Network, Tensor,
};
use crate::numerics::network::INIT_STD;
use crate::seed;

/// Probabilities are clamped to `[P_CLAMP, 1 − P_CLAMP]` inside the BCE.
pub const P_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossWeights {
    pub adv: f64,
    pub ctx: f64,
    pub enc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            adv: 1.0,
            ctx: 50.0,
            enc: 1.0,
        }
    }
}

impl LossWeights {
    pub const ENC_ONLY: LossWeights = LossWeights {
        adv: 0.0,
        ctx: 0.0,
        enc: 1.0,
    };
    pub const CTX_ONLY: LossWeights = LossWeights {
        adv: 0.0,
        ctx: 1.0,
        enc: 0.0,
    };
    pub const ADV_ONLY: LossWeights = LossWeights {
        adv: 1.0,
        ctx: 0.0,
        enc: 0.0,
    };

    pub fn combine(&self, enc: f64, ctx: f64, adv: f64) -> f64 {
        self.adv * adv + self.ctx * ctx + self.enc * enc
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GanomalyConfig {
    pub nz: usize,
    /// Base feature maps of every stack (ngf = ndf).
    pub ngf: usize,
    pub image_size: usize,
    pub weights: LossWeights,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for GanomalyConfig {
    fn default() -> Self {
        GanomalyConfig {
            nz: 100,
            ngf: 64,
            image_size: 64,
            weights: LossWeights::default(),
            epochs: 60,
            batch_size: 1,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl GanomalyConfig {
    pub fn validate(&self) -> Result<()> {
        arch::check_image_size(self.image_size)?;
        if self.nz == 0 || self.ngf == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("nz, ngf and batch_size must be positive".into()));
        }
        let w = self.weights;
        if [w.adv, w.ctx, w.enc].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidConfig(format!("loss weights must be finite and >= 0, got {w:?}")));
        }
        self.adam.validate()
    }

    pub fn image_shape(&self) -> [usize; 3] {
        [1, self.image_size, self.image_size]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorPass {
    pub z: Tensor,
    pub x_rec: Tensor,
    pub z_rec: Tensor,
}

/// Per-sample loss terms. `gen` is the weighted generator objective and
/// `disc` the discriminator BCE averaged over the real and fake term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Losses {
    pub enc: f64,
    pub ctx: f64,
    pub adv: f64,
    pub gen: f64,
    pub disc: f64,
}

impl Losses {
    fn is_finite(&self) -> bool {
        [self.enc, self.ctx, self.adv, self.gen, self.disc].iter().all(|v| v.is_finite())
    }

    fn accumulate(&mut self, other: &Losses, weight: f64) {
        self.enc += weight * other.enc;
        self.ctx += weight * other.ctx;
        self.adv += weight * other.adv;
        self.gen += weight * other.gen;
        self.disc += weight * other.disc;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScoreComponents {
    pub enc: f64,
    pub ctx: f64,
    pub adv: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSample {
    pub provenance: Provenance,
    pub raw: f64,
    /// Filled in by cohort normalization.
    pub normalized: Option<f64>,
    pub components: ScoreComponents,
    pub label: ClassLabel,
}

fn mse(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

fn mae(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// `scale · ∂/∂a mean((a − b)²)`
fn mse_grad(a: &Tensor, b: &Tensor, scale: f64) -> Tensor {
    let k = 2.0 * scale / a.len() as f64;
    Tensor::from_fn(a.shape(), |i| k * (a.data()[i] - b.data()[i]))
}

/// `scale · ∂/∂a mean|a − b|`, taking sign(0) = 0.
fn mae_grad(a: &Tensor, b: &Tensor, scale: f64) -> Tensor {
    let k = scale / a.len() as f64;
    Tensor::from_fn(a.shape(), |i| k * sign(a.data()[i] - b.data()[i]))
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

fn prob(t: &Tensor) -> f64 {
    t.data()[0].clamp(P_CLAMP, 1.0 - P_CLAMP)
}

/// Sum of squared differences, the anomaly score of a latent pair.
pub fn latent_score(z: &Tensor, z_rec: &Tensor) -> f64 {
    z.data().iter().zip(z_rec.data()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Min–max normalization onto [0, 1].
pub fn normalize_scores(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.len() < 2 {
        return Err(Error::Degenerate(format!("need at least 2 scores to normalize, got {}", scores.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("score".into()));
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(Error::Degenerate(format!("all {} scores equal {lo}", scores.len())));
    }
    Ok(scores.iter().map(|s| (s - lo) / (hi - lo)).collect())
}

/// Epoch means of the five loss terms.
pub type EpochLosses = Losses;

#[derive(Clone, Debug, PartialEq)]
pub struct GanomalyModel {
    config: GanomalyConfig,
    g_e: Network,
    g_d: Network,
    e: Network,
    d: Network,
    feature_layer: usize,
    steps: u64,
    epochs_trained: usize,
}

pub const NET_PREFIXES: [&str; 4] = ["g_e", "g_d", "e", "d"];

impl GanomalyModel {
    pub fn build(config: GanomalyConfig) -> Result<Self> {
        Self::build_with_init_std(config, INIT_STD)
    }

    /// As `build`, with a non-default weight init spread.
    pub fn build_with_init_std(config: GanomalyConfig, std: f64) -> Result<Self> {
        config.validate()?;
        let GanomalyConfig { nz, ngf, image_size: s, seed: master, .. } = config;
        let image = config.image_shape();
        let net = |input: &[usize], layers, label: &str| {
            Network::with_init_std(input, layers, seed::derive(master, &format!("ganomaly/{label}")), std)
        };
        let g_e = net(&image, arch::encoder(s, ngf, nz), "g_e")?;
        let g_d = net(&[nz, 1, 1], arch::decoder(s, ngf, nz), "g_d")?;
        let e = net(&image, arch::encoder(s, ngf, nz), "e")?;
        let (d_layers, feature_layer) = arch::discriminator(s, ngf);
        let d = net(&image, d_layers, "d")?;
        Self::from_networks(config, g_e, g_d, e, d, feature_layer)
    }

    /// Assembles a model from arbitrary sub-networks, e.g. hand-built stubs.
    /// Only the interface shapes are checked against each other.
    pub fn from_networks(
        config: GanomalyConfig,
        g_e: Network,
        g_d: Network,
        e: Network,
        d: Network,
        feature_layer: usize,
    ) -> Result<Self> {
        let mismatch = |what: &str, expected: &[usize], got: &[usize]| {
            Err(Error::InvalidConfig(format!("{what}: expected shape {expected:?}, got {got:?}")))
        };
        if g_d.input_shape() != g_e.output_shape() {
            return mismatch("decoder input", g_e.output_shape(), g_d.input_shape());
        }
        if g_d.output_shape() != g_e.input_shape() {
            return mismatch("decoder output", g_e.input_shape(), g_d.output_shape());
        }
        if e.input_shape() != g_e.input_shape() || e.output_shape() != g_e.output_shape() {
            return mismatch("second encoder", g_e.output_shape(), e.output_shape());
        }
        if d.input_shape() != g_e.input_shape() {
            return mismatch("discriminator input", g_e.input_shape(), d.input_shape());
        }
        if d.output_shape().iter().product::<usize>() != 1 {
            return mismatch("discriminator output", &[1, 1, 1], d.output_shape());
        }
        if feature_layer + 1 >= d.layers().len() {
            return Err(Error::InvalidConfig(format!(
                "feature layer {feature_layer} must precede the discriminator head"
            )));
        }
        Ok(GanomalyModel {
            config,
            g_e,
            g_d,
            e,
            d,
            feature_layer,
            steps: 0,
            epochs_trained: 0,
        })
    }

    pub fn config(&self) -> &GanomalyConfig {
        &self.config
    }

    pub fn set_weights(&mut self, weights: LossWeights) {
        self.config.weights = weights;
    }

    pub fn networks(&self) -> [&Network; 4] {
        [&self.g_e, &self.g_d, &self.e, &self.d]
    }

    fn networks_mut(&mut self) -> [&mut Network; 4] {
        [&mut self.g_e, &mut self.g_d, &mut self.e, &mut self.d]
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

    /// All parameters as `(name, tensor)` in a stable order: G_E, G_D, E, D.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        NET_PREFIXES
            .iter()
            .zip(self.networks())
            .flat_map(|(prefix, net)| net.param_names(prefix).into_iter().zip(net.params()))
            .collect()
    }

    /// Replaces every parameter; names and shapes must match `named_params`.
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
        for net in staged.networks_mut() {
            for i in 0..net.params().len() {
                net.set_param(i, iter.next().expect("count checked"))?;
            }
        }
        *self = staged;
        Ok(())
    }

    /// Parameters of G_E, G_D and E, concatenated in that order.
    pub fn generator_params(&self) -> Vec<Tensor> {
        [&self.g_e, &self.g_d, &self.e]
            .iter()
            .flat_map(|n| n.params().iter().cloned())
            .collect()
    }

    pub fn set_generator_params(&mut self, params: &[Tensor]) -> Result<()> {
        let mut offset = 0;
        for net in [&mut self.g_e, &mut self.g_d, &mut self.e] {
            for i in 0..net.params().len() {
                let p = params
                    .get(offset)
                    .ok_or_else(|| Error::InvalidTensor("too few generator parameters".into()))?;
                net.set_param(i, p.clone())?;
                offset += 1;
            }
        }
        Ok(())
    }

    pub fn discriminator(&self) -> &Network {
        &self.d
    }

    pub fn discriminator_mut(&mut self) -> &mut Network {
        &mut self.d
    }

    pub fn generator_pass(&self, x: &Tensor) -> Result<GeneratorPass> {
        let z = self.g_e.apply(x)?;
        let x_rec = self.g_d.apply(&z)?;
        let z_rec = self.e.apply(&x_rec)?;
        Ok(GeneratorPass { z, x_rec, z_rec })
    }

    /// Discriminator feature map `f` and output probability.
    pub fn features(&self, x: &Tensor) -> Result<(Tensor, f64)> {
        let trace = self.d.forward(x)?;
        Ok((trace.layer_output(self.feature_layer).clone(), trace.output().data()[0]))
    }

    pub fn losses(&self, x: &Tensor) -> Result<Losses> {
        let pass = self.generator_pass(x)?;
        let (f_real, p_real) = self.features(x)?;
        let (f_fake, p_fake) = self.features(&pass.x_rec)?;
        let enc = mse(&pass.z, &pass.z_rec);
        let ctx = mae(x, &pass.x_rec);
        let adv = mse(&f_real, &f_fake);
        Ok(Losses {
            enc,
            ctx,
            adv,
            gen: self.config.weights.combine(enc, ctx, adv),
            disc: bce_pair(p_real, p_fake),
        })
    }

    pub fn score_components(&self, x: &Tensor) -> Result<ScoreComponents> {
        let l = self.losses(x)?;
        Ok(ScoreComponents {
            enc: l.enc,
            ctx: l.ctx,
            adv: l.adv,
        })
    }

    pub fn anomaly_score(&self, x: &Tensor) -> Result<f64> {
        let pass = self.generator_pass(x)?;
        Ok(latent_score(&pass.z, &pass.z_rec))
    }

    /// Raw score plus components in one generator pass.
    pub fn score(&self, x: &Tensor) -> Result<(f64, ScoreComponents)> {
        let pass = self.generator_pass(x)?;
        let (f_real, _) = self.features(x)?;
        let (f_fake, _) = self.features(&pass.x_rec)?;
        let raw = latent_score(&pass.z, &pass.z_rec);
        if !raw.is_finite() {
            return Err(Error::NonFinite("anomaly score".into()));
        }
        Ok((
            raw,
            ScoreComponents {
                enc: mse(&pass.z, &pass.z_rec),
                ctx: mae(x, &pass.x_rec),
                adv: mse(&f_real, &f_fake),
            },
        ))
    }

    /// Loss terms and the gradient of `weights`-combined generator loss
    /// with respect to `generator_params()`. D's parameters are held fixed.
    pub fn generator_gradients(&self, x: &Tensor, weights: LossWeights) -> Result<(Losses, Vec<Tensor>, Tensor)> {
        let t_ge = self.g_e.forward(x)?;
        let z = t_ge.output();
        let t_gd = self.g_d.forward(z)?;
        let x_rec = t_gd.output();
        let t_e = self.e.forward(x_rec)?;
        let z_rec = t_e.output();
        let t_real = self.d.forward(x)?;
        let t_fake = self.d.forward(x_rec)?;
        let f_real = t_real.layer_output(self.feature_layer);
        let f_fake = t_fake.layer_output(self.feature_layer);

        let enc = mse(z, z_rec);
        let ctx = mae(x, x_rec);
        let adv = mse(f_real, f_fake);
        let losses = Losses {
            enc,
            ctx,
            adv,
            gen: weights.combine(enc, ctx, adv),
            disc: bce_pair(prob(t_real.output()), prob(t_fake.output())),
        };

        // E sees L_enc through z'
        let g_e_rev = self.e.backward(&t_e, &mse_grad(z_rec, z, weights.enc))?;
        // X' collects the contextual term, the encoder path and the feature tap
        let mut gx = mae_grad(x_rec, x, weights.ctx);
        gx.add_assign(&g_e_rev.input)?;
        let tap = mse_grad(f_fake, f_real, weights.adv);
        let g_adv = self.d.backward_with_taps(&t_fake, None, &[(self.feature_layer, &tap)])?;
        gx.add_assign(&g_adv.input)?;
        let g_dec = self.g_d.backward(&t_gd, &gx)?;
        let mut gz = mse_grad(z, z_rec, weights.enc);
        gz.add_assign(&g_dec.input)?;
        let g_enc = self.g_e.backward(&t_ge, &gz)?;

        let mut grads = g_enc.params;
        grads.extend(g_dec.params);
        grads.extend(g_e_rev.params);
        Ok((losses, grads, x_rec.clone()))
    }

    /// L_D and its gradient with respect to D's parameters for a real
    /// sample and a (detached) fake.
    pub fn discriminator_gradients(&self, x_real: &Tensor, x_fake: &Tensor) -> Result<(f64, Vec<Tensor>)> {
        discriminator_gradients(&self.d, x_real, x_fake)
    }

    /// Trains on `data`, which must be PD only. Returns the epoch means.
    pub fn train(&mut self, data: &[(ClassLabel, Tensor)]) -> Result<Vec<EpochLosses>> {
        self.train_with_progress(data, |_, _, _| {})
    }

    pub fn train_with_progress(
        &mut self,
        data: &[(ClassLabel, Tensor)],
        mut progress: impl FnMut(&Self, usize, &EpochLosses),
    ) -> Result<Vec<EpochLosses>> {
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
        let mut opt: Vec<AdamState> = self.networks().iter().map(|n| AdamState::new(adam, n.params())).collect();
        let gen_counts = [self.g_e.params().len(), self.g_d.params().len(), self.e.params().len()];
        let mut history = Vec::with_capacity(self.config.epochs);
        let mut order: Vec<usize> = (0..data.len()).collect();

        for _ in 0..self.config.epochs {
            let epoch = self.epochs_trained;
            let mut rng = seed::rng(seed::derive(self.config.seed, &format!("ganomaly/shuffle/{epoch}")));
            order.sort_unstable();
            order.shuffle(&mut rng);
            let mut sums = Losses::default();

            for batch in order.chunks(self.config.batch_size) {
                let inv = 1.0 / batch.len() as f64;
                let mut g_acc: Option<Vec<Tensor>> = None;
                let mut fakes = Vec::with_capacity(batch.len());
                for &i in batch {
                    let x = &data[i].1;
                    let (l, grads, fake) = self.generator_gradients(x, self.config.weights)?;
                    if !l.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "generator loss at epoch {epoch}, step {}",
                            self.steps
                        )));
                    }
                    accumulate(&mut g_acc, grads, inv)?;
                    fakes.push((i, fake, l));
                }
                let g = g_acc.expect("non-empty batch");
                let mut offset = 0;
                for (k, count) in gen_counts.iter().enumerate() {
                    let net = self.networks_mut()[k].params_mut();
                    adam_step(net, &g[offset..offset + count], &mut opt[k])
                        .map_err(|e| Error::NonFinite(format!("epoch {epoch}, step {}: {e}", self.steps)))?;
                    offset += count;
                }

                let mut d_acc: Option<Vec<Tensor>> = None;
                for (i, fake, mut l) in fakes {
                    let (disc, grads) = discriminator_gradients(&self.d, &data[i].1, &fake)?;
                    if !disc.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "discriminator loss at epoch {epoch}, step {}",
                            self.steps
                        )));
                    }
                    l.disc = disc;
                    sums.accumulate(&l, 1.0);
                    accumulate(&mut d_acc, grads, inv)?;
                }
                adam_step(self.d.params_mut(), &d_acc.expect("non-empty batch"), &mut opt[3])
                    .map_err(|e| Error::NonFinite(format!("epoch {epoch}, step {}: {e}", self.steps)))?;
                self.steps += 1;
            }

            let mut mean = Losses::default();
            mean.accumulate(&sums, 1.0 / data.len() as f64);
            self.epochs_trained += 1;
            progress(self, epoch, &mean);
            history.push(mean);
        }
        Ok(history)
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

/// Mean of BCE(p_real, 1) and BCE(p_fake, 0).
pub fn bce_pair(p_real: f64, p_fake: f64) -> f64 {
    let pr = p_real.clamp(P_CLAMP, 1.0 - P_CLAMP);
    let pf = p_fake.clamp(P_CLAMP, 1.0 - P_CLAMP);
    -0.5 * (pr.ln() + (1.0 - pf).ln())
}

/// L_D gradient for a network ending in a sigmoid probability.
pub fn discriminator_gradients(d: &Network, x_real: &Tensor, x_fake: &Tensor) -> Result<(f64, Vec<Tensor>)> {
    let t_real = d.forward(x_real)?;
    let t_fake = d.forward(x_fake)?;
    let pr = prob(t_real.output());
    let pf = prob(t_fake.output());
    let loss = bce_pair(pr, pf);
    let mut grads = d.backward(&t_real, &Tensor::filled(t_real.output().shape(), -0.5 / pr))?.params;
    let fake = d.backward(&t_fake, &Tensor::filled(t_fake.output().shape(), 0.5 / (1.0 - pf)))?.params;
    for (g, f) in grads.iter_mut().zip(&fake) {
        g.add_assign(f)?;
    }
    Ok((loss, grads))
}

/// One of the four training losses, for gradient verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossTerm {
    Enc,
    Ctx,
    Adv,
    Disc,
}

impl LossTerm {
    pub const ALL: [LossTerm; 4] = [LossTerm::Enc, LossTerm::Ctx, LossTerm::Adv, LossTerm::Disc];

    pub fn name(&self) -> &'static str {
        match self {
            LossTerm::Enc => "enc",
            LossTerm::Ctx => "ctx",
            LossTerm::Adv => "adv",
            LossTerm::Disc => "disc",
        }
    }
}

/// Finite-difference check of one loss term's gradient. Generator terms
/// are checked against G_E, G_D and E; the discriminator loss against D,
/// with the fake taken from the current generator.
pub fn grad_check_loss(model: &GanomalyModel, x: &Tensor, term: LossTerm, cfg: GradCheckConfig) -> Result<GradCheckReport> {
    let gen_names: Vec<String> = model
        .named_params()
        .into_iter()
        .map(|(n, _)| n)
        .filter(|n| !n.starts_with("d."))
        .collect();
    let weights = match term {
        LossTerm::Enc => LossWeights::ENC_ONLY,
        LossTerm::Ctx => LossWeights::CTX_ONLY,
        LossTerm::Adv => LossWeights::ADV_ONLY,
        LossTerm::Disc => {
            let fake = model.generator_pass(x)?.x_rec;
            let (_, analytic) = model.discriminator_gradients(x, &fake)?;
            let d = model.discriminator();
            let mut params = d.params().to_vec();
            let names = d.param_names("d");
            let loss = |p: &[Tensor]| {
                let mut d = d.clone();
                for (i, t) in p.iter().enumerate() {
                    d.set_param(i, t.clone()).expect("same layout");
                }
                let pr = d.apply(x).expect("valid input").data()[0];
                let pf = d.apply(&fake).expect("valid input").data()[0];
                bce_pair(pr, pf)
            };
            return Ok(check_gradients(&mut params, &names, &analytic, loss, cfg));
        }
    };
    let (_, analytic, _) = model.generator_gradients(x, weights)?;
    let mut params = model.generator_params();
    let mut probe = model.clone();
    let loss = |p: &[Tensor]| {
        probe.set_generator_params(p).expect("same layout");
        let l = probe.losses(x).expect("valid input");
        weights.combine(l.enc, l.ctx, l.adv)
    };
    Ok(check_gradients(&mut params, &gen_names, &analytic, loss, cfg))
}
