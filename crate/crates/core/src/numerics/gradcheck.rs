//! Central finite-difference verification of reverse-mode gradients.

use rand_distr::{Distribution, StandardNormal};

use super::network::Network;
use super::tensor::Tensor;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Below this magnitude the absolute error is used instead of the
    /// relative one.
    pub abs_floor: f64,
    pub tolerance: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            abs_floor: 1e-10,
            tolerance: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_error: f64,
    /// Flat index of the worst entry.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<ParamCheck>,
    pub max_error: f64,
    /// Name of the parameter holding the worst entry when the check fails.
    pub offending: Option<String>,
    pub passed: bool,
}

/// Error between one analytic and one numeric derivative.
pub fn entry_error(analytic: f64, numeric: f64, abs_floor: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    let diff = (analytic - numeric).abs();
    if scale < abs_floor {
        diff
    } else {
        diff / scale
    }
}

/// Compares `analytic` gradients against central differences of `loss`,
/// perturbing every entry of every tensor in `params` in turn. `params` is
/// restored exactly before returning.
pub fn check_gradients(
    params: &mut [Tensor],
    names: &[String],
    analytic: &[Tensor],
    mut loss: impl FnMut(&[Tensor]) -> f64,
    cfg: GradCheckConfig,
) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len(), "one analytic gradient per parameter");
    assert_eq!(params.len(), names.len(), "one name per parameter");
    let mut entries = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut worst = ParamCheck {
            name: names[p].clone(),
            max_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for i in 0..params[p].len() {
            let orig = params[p].data()[i];
            params[p].data_mut()[i] = orig + cfg.step;
            let up = loss(params);
            params[p].data_mut()[i] = orig - cfg.step;
            let down = loss(params);
            params[p].data_mut()[i] = orig;

            let numeric = (up - down) / (2.0 * cfg.step);
            let a = analytic[p].data()[i];
            let err = entry_error(a, numeric, cfg.abs_floor);
            if err > worst.max_error || !err.is_finite() {
                worst.max_error = err;
                worst.worst_index = i;
                worst.analytic = a;
                worst.numeric = numeric;
            }
        }
        entries.push(worst);
    }
    summarize(entries, cfg.tolerance)
}

fn summarize(entries: Vec<ParamCheck>, tolerance: f64) -> GradCheckReport {
    let worst = entries
        .iter()
        .max_by(|a, b| a.max_error.total_cmp(&b.max_error));
    let max_error = worst.map_or(0.0, |w| w.max_error);
    let passed = max_error.is_finite() && max_error < tolerance;
    let offending = if passed { None } else { worst.map(|w| w.name.clone()) };
    GradCheckReport {
        entries,
        max_error,
        offending,
        passed,
    }
}

/// Scalar losses used to turn a network output into a number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalarLoss {
    /// ½‖y‖²
    HalfSquaredNorm,
    /// Σ y
    Sum,
    /// ⟨y, r⟩ for a seeded Gaussian direction r.
    Projection { seed: u64 },
}

impl ScalarLoss {
    /// Loss value and its gradient with respect to `y`.
    pub fn evaluate(&self, y: &Tensor) -> (f64, Tensor) {
        match self {
            ScalarLoss::HalfSquaredNorm => (0.5 * y.dot(y), y.clone()),
            ScalarLoss::Sum => (y.sum(), Tensor::filled(y.shape(), 1.0)),
            ScalarLoss::Projection { seed } => {
                let mut rng = seed::rng(*seed);
                let r = Tensor::from_fn(y.shape(), |_| StandardNormal.sample(&mut rng));
                (y.dot(&r), r)
            }
        }
    }
}

/// Checks every parameter of `net` and the input gradient (reported as
/// `"input"`) for the scalar `loss(net(input))`.
pub fn grad_check(net: &Network, input: &Tensor, loss: ScalarLoss, tolerance: f64) -> GradCheckReport {
    let cfg = GradCheckConfig {
        tolerance,
        ..GradCheckConfig::default()
    };
    let trace = net.forward(input).expect("grad_check input must match the network");
    let (_, dy) = loss.evaluate(trace.output());
    let grads = net.backward(&trace, &dy).expect("trace from this network");

    let mut probe = net.clone();
    let mut params: Vec<Tensor> = net.params().to_vec();
    params.push(input.clone());
    let mut analytic = grads.params;
    analytic.push(grads.input);
    let mut names = net.param_names("net");
    names.push("input".to_string());

    let n = net.params().len();
    check_gradients(
        &mut params,
        &names,
        &analytic,
        |ps| {
            for (dst, src) in probe.params_mut().iter_mut().zip(&ps[..n]) {
                dst.data_mut().copy_from_slice(src.data());
            }
            let y = probe.apply(&ps[n]).expect("shape preserved");
            loss.evaluate(&y).0
        },
        cfg,
    )
}
