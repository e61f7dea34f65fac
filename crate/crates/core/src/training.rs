//! Loss, gradients, optimizer, and the epoch loop for the QCNN.
//!
//! Gradients are exact: a forward sweep stores nothing, then a reverse sweep
//! un-computes the state with `U†` while carrying the adjoint of the readout
//! projector, accumulating `2·Re⟨λ|∂U|ψ⟩` for every parameter a gate uses.

use rand::Rng;
use rayon::prelude::*;

use crate::augment::{augment_sample, AugmentConfig};
use crate::datasets::ImageSample;
use crate::embedding::amplitude_embed;
use crate::error::{Error, Result};
use crate::qcnn::{predict, Circuit, QcnnArchitecture, QcnnParams};
use crate::seeding::{augment_rng, rng_for, Stream};
use crate::simulator::{apply_unchecked, readout_prob_one, Complex, GateMatrix, StateVector};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr0: f64,
    /// Fractional learning-rate decay per epoch.
    pub lr_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr0: 0.1,
            lr_decay: 0.05,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lr0 must be finite and >= 0, got {}",
                self.lr0
            )));
        }
        if !(0.0..1.0).contains(&self.lr_decay) {
            return Err(Error::InvalidConfig(format!(
                "lr_decay must lie in [0, 1), got {}",
                self.lr_decay
            )));
        }
        if !(0.0..1.0).contains(&self.adam_beta1)
            || !(0.0..1.0).contains(&self.adam_beta2)
            || self.adam_eps <= 0.0
        {
            return Err(Error::InvalidConfig(
                "Adam betas must lie in [0, 1) and eps > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
}

pub const METRICS_HEADER: &str = "epoch,train_loss,train_acc,test_loss,test_acc";

/// Decimal with 6 significant digits.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return format!("{v:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // rounding can carry into a new leading digit, e.g. 9.999996 -> 10.00000
    let rounded: f64 = s.parse().unwrap_or(v);
    if rounded != 0.0 && rounded.abs().log10().floor() as i32 != exp {
        let decimals = (4 - exp).max(0) as usize;
        return format!("{v:.decimals$}");
    }
    s
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch,
            format_sig6(r.train_loss),
            format_sig6(r.train_acc),
            format_sig6(r.test_loss),
            format_sig6(r.test_acc)
        ));
    }
    out
}

/// Mean of `(p1 − label)²`.
pub fn mse_loss(p1s: &[f64], labels: &[u8]) -> Result<f64> {
    if p1s.len() != labels.len() {
        return Err(Error::LengthMismatch(p1s.len(), labels.len()));
    }
    if p1s.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let sum: f64 = p1s
        .iter()
        .zip(labels)
        .map(|(p, &y)| (p - y as f64).powi(2))
        .sum();
    Ok(sum / p1s.len() as f64)
}

/// `lr0 · (1 − lr_decay)^epoch`.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.lr0 * (1.0 - cfg.lr_decay).powi(epoch as i32)
}

/// Central finite differences of `loss` at `params`.
pub fn grad_fd(loss: impl Fn(&[f64]) -> f64, params: &[f64], step: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|k| {
            p[k] = params[k] + step;
            let up = loss(&p);
            p[k] = params[k] - step;
            let down = loss(&p);
            p[k] = params[k];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// First and second Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamMoments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamMoments {
    pub fn zeros(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One bias-corrected Adam update at step `t ≥ 1`.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    moments: &mut AdamMoments,
    t: u32,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || moments.m.len() != n || moments.v.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "params {n}, grads {}, moments {}/{}",
            grads.len(),
            moments.m.len(),
            moments.v.len()
        )));
    }
    if t == 0 {
        return Err(Error::InvalidConfig("Adam step counter starts at 1".into()));
    }
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    for i in 0..n {
        let g = grads[i];
        moments.m[i] = b1 * moments.m[i] + (1.0 - b1) * g;
        moments.v[i] = b2 * moments.v[i] + (1.0 - b2) * g * g;
        let m_hat = moments.m[i] / c1;
        let v_hat = moments.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
    }
    Ok(())
}

/// Gate matrices, their adjoints, and their parameter derivatives at one point.
struct BoundCircuit<'a> {
    circuit: &'a Circuit,
    targets: Vec<Vec<usize>>,
    gates: Vec<GateMatrix>,
    adjoints: Vec<GateMatrix>,
    derivatives: Vec<Vec<GateMatrix>>,
}

impl<'a> BoundCircuit<'a> {
    fn new(circuit: &'a Circuit, params: &[f64], with_derivatives: bool) -> Result<Self> {
        let gates = circuit.bind(params)?;
        let adjoints = if with_derivatives {
            gates.iter().map(GateMatrix::adjoint).collect()
        } else {
            Vec::new()
        };
        let derivatives = if with_derivatives {
            circuit
                .ops
                .iter()
                .map(|op| op.derivatives(params))
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            circuit,
            targets: circuit.ops.iter().map(|op| op.targets()).collect(),
            gates,
            adjoints,
            derivatives,
        })
    }

    fn forward(&self, pixels: &[f64]) -> Result<StateVector> {
        let mut state = amplitude_embed(pixels, self.circuit.n_qubits)?;
        let n = state.n_qubits();
        for (g, t) in self.gates.iter().zip(&self.targets) {
            apply_unchecked(state.amplitudes_mut(), n, g, t);
        }
        Ok(state)
    }

    fn p1(&self, pixels: &[f64]) -> Result<f64> {
        readout_prob_one(&self.forward(pixels)?, self.circuit.readout)
    }

    /// `p1` and `∂p1/∂θ` for one image, accumulated into `grad` scaled by `weight`.
    fn p1_and_grad(
        &self,
        pixels: &[f64],
        weight_of: impl Fn(f64) -> f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        let mut psi = self.forward(pixels)?;
        let n = psi.n_qubits();
        let readout = self.circuit.readout;
        let p1 = readout_prob_one(&psi, readout)?;
        let weight = weight_of(p1);
        if weight == 0.0 {
            return Ok(p1);
        }
        let mut lambda = psi.clone();
        for (i, a) in lambda.amplitudes_mut().iter_mut().enumerate() {
            if i >> readout & 1 == 0 {
                *a = Complex::new(0.0, 0.0);
            }
        }
        let mut scratch = psi.clone();
        for k in (0..self.gates.len()).rev() {
            let t = &self.targets[k];
            apply_unchecked(psi.amplitudes_mut(), n, &self.adjoints[k], t);
            for (d, &p) in self.derivatives[k]
                .iter()
                .zip(self.circuit.ops[k].param_indices())
            {
                scratch.amplitudes_mut().copy_from_slice(psi.amplitudes());
                apply_unchecked(scratch.amplitudes_mut(), n, d, t);
                grad[p] += weight * 2.0 * lambda.inner(&scratch).re;
            }
            apply_unchecked(lambda.amplitudes_mut(), n, &self.adjoints[k], t);
        }
        Ok(p1)
    }
}

fn check_batch(batch: &[ImageSample]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if let Some(s) = batch.iter().find(|s| s.label > 1) {
        return Err(Error::NonBinaryLabels(s.label));
    }
    Ok(())
}

/// MSE loss and its exact gradient over `batch`.
///
/// Per-sample work runs in parallel; the reduction is sequential in batch
/// order, so the result does not depend on the thread count.
pub fn loss_and_grad(
    circuit: &Circuit,
    params: &[f64],
    batch: &[ImageSample],
) -> Result<(f64, Vec<f64>)> {
    check_batch(batch)?;
    let bound = BoundCircuit::new(circuit, params, true)?;
    let n = batch.len() as f64;
    let per_sample: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|s| {
            let mut g = vec![0.0; params.len()];
            let y = s.label as f64;
            let p1 = bound.p1_and_grad(&s.pixels, |p1| 2.0 * (p1 - y) / n, &mut g)?;
            Ok(((p1 - y).powi(2), g))
        })
        .collect::<Result<_>>()?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (l, g) in per_sample {
        loss += l;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    Ok((loss / n, grad))
}

/// Exact gradient of the batch MSE, flat in [`QcnnParams::to_flat`] order.
pub fn grad_exact(
    arch: &QcnnArchitecture,
    params: &QcnnParams,
    batch: &[ImageSample],
) -> Result<Vec<f64>> {
    Ok(loss_and_grad(&arch.circuit(), &params.to_flat(), batch)?.1)
}

/// Readout probabilities for every sample.
pub fn predict_probs(
    circuit: &Circuit,
    params: &[f64],
    samples: &[ImageSample],
) -> Result<Vec<f64>> {
    let bound = BoundCircuit::new(circuit, params, false)?;
    samples.par_iter().map(|s| bound.p1(&s.pixels)).collect()
}

/// `(mse, accuracy)` on `samples`.
pub fn evaluate_qcnn(
    circuit: &Circuit,
    params: &[f64],
    samples: &[ImageSample],
) -> Result<(f64, f64)> {
    check_batch(samples)?;
    let p1s = predict_probs(circuit, params, samples)?;
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    let loss = mse_loss(&p1s, &labels)?;
    let correct = p1s
        .iter()
        .zip(&labels)
        .filter(|(p, &y)| predict(**p) == y)
        .count();
    Ok((loss, correct as f64 / samples.len() as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub metrics: Vec<MetricsRow>,
    pub params: Vec<f64>,
}

/// The shared full-batch epoch loop.
///
/// Each epoch optionally augments every training sample afresh, takes one
/// Adam step at `lr_at(epoch)`, then evaluates on the clean train and test sets.
pub(crate) fn fit(
    params: &mut [f64],
    train: &[ImageSample],
    test: &[ImageSample],
    cfg: &TrainConfig,
    augment: Option<&AugmentConfig>,
    grad_fn: impl Fn(&[f64], &[ImageSample]) -> Result<Vec<f64>>,
    eval_fn: impl Fn(&[f64], &[ImageSample]) -> Result<(f64, f64)>,
) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    check_batch(train)?;
    check_batch(test)?;
    let augment = augment.filter(|a| a.is_enabled());
    if let Some(a) = augment {
        a.validate()?;
    }
    let mut moments = AdamMoments::zeros(params.len());
    let mut rows = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let grad = match augment {
            Some(a) => {
                let batch: Vec<ImageSample> = train
                    .iter()
                    .enumerate()
                    .map(|(i, s)| augment_sample(s, a, &mut augment_rng(cfg.seed, epoch, i)))
                    .collect();
                grad_fn(params, &batch)?
            }
            None => grad_fn(params, train)?,
        };
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient at epoch {epoch}")));
        }
        adam_step(
            params,
            &grad,
            &mut moments,
            epoch as u32 + 1,
            lr_at(epoch, cfg),
            cfg,
        )?;
        let (train_loss, train_acc) = eval_fn(params, train)?;
        let (test_loss, test_acc) = eval_fn(params, test)?;
        if !(train_loss.is_finite() && test_loss.is_finite()) {
            return Err(Error::NonFinite(format!("loss at epoch {epoch}")));
        }
        rows.push(MetricsRow {
            epoch,
            train_loss,
            train_acc,
            test_loss,
            test_acc,
        });
    }
    Ok(rows)
}

/// Initial QCNN angles, uniform in `(−π, π)`.
pub fn init_qcnn_params(arch: &QcnnArchitecture, seed: u64) -> Vec<f64> {
    use std::f64::consts::PI;
    let mut rng = rng_for(seed, Stream::Init, 0);
    (0..arch.param_count)
        .map(|_| rng.gen_range(-PI..PI))
        .collect()
}

pub fn train_qcnn(
    arch: &QcnnArchitecture,
    train: &[ImageSample],
    test: &[ImageSample],
    cfg: &TrainConfig,
    augment: Option<&AugmentConfig>,
) -> Result<TrainOutcome> {
    let circuit = arch.circuit();
    let mut params = init_qcnn_params(arch, cfg.seed);
    let metrics = fit(
        &mut params,
        train,
        test,
        cfg,
        augment,
        |p, batch| Ok(loss_and_grad(&circuit, p, batch)?.1),
        |p, samples| evaluate_qcnn(&circuit, p, samples),
    )?;
    Ok(TrainOutcome { metrics, params })
}
