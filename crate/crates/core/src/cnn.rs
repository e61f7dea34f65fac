//! Classical CNN baseline: conv + ReLU + 2×2 max-pool blocks, then a dense
//! layer with softmax and sparse categorical cross-entropy.
//!
//! All weights live in one flat vector so the optimizer and finite-difference
//! checks treat the model as a plain parameter vector.

use rand::Rng;
use rayon::prelude::*;

use crate::augment::AugmentConfig;
use crate::datasets::ImageSample;
use crate::error::{Error, Result};
use crate::seeding::{rng_for, Stream};
use crate::training::{fit, MetricsRow, TrainConfig};

pub const N_CLASSES: usize = 2;

/// Height × width × channels, channel-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Self {
            h,
            w,
            c,
            data: vec![0.0; h * w * c],
        }
    }

    pub fn from_image(img: &ImageSample) -> Self {
        Self {
            h: img.height,
            w: img.width,
            c: 1,
            data: img.pixels.clone(),
        }
    }

    #[inline]
    fn idx(&self, y: usize, x: usize, ch: usize) -> usize {
        (y * self.w + x) * self.c + ch
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, ch: usize) -> f64 {
        self.data[self.idx(y, x, ch)]
    }
}

/// Square kernel bank; weight `(ky, kx, ci, co)` sits at `((ky·k + kx)·cin + ci)·cout + co`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub k: usize,
    pub cin: usize,
    pub cout: usize,
}

impl ConvShape {
    pub fn weight_len(&self) -> usize {
        self.k * self.k * self.cin * self.cout
    }

    #[inline]
    fn widx(&self, ky: usize, kx: usize, ci: usize, co: usize) -> usize {
        ((ky * self.k + kx) * self.cin + ci) * self.cout + co
    }
}

fn check_conv(x: &Tensor, shape: ConvShape, weights: &[f64], biases: &[f64]) -> Result<()> {
    if x.c != shape.cin
        || weights.len() != shape.weight_len()
        || biases.len() != shape.cout
        || shape.k.is_multiple_of(2)
    {
        return Err(Error::ShapeMismatch(format!(
            "conv {shape:?} with {} weights, {} biases on {}x{}x{} input",
            weights.len(),
            biases.len(),
            x.h,
            x.w,
            x.c
        )));
    }
    Ok(())
}

/// Stride-1 cross-correlation with zero "same" padding, plus bias.
pub fn conv2d(x: &Tensor, shape: ConvShape, weights: &[f64], biases: &[f64]) -> Result<Tensor> {
    check_conv(x, shape, weights, biases)?;
    let pad = (shape.k / 2) as isize;
    let mut out = Tensor::zeros(x.h, x.w, shape.cout);
    for y in 0..x.h {
        for xx in 0..x.w {
            let o = out.idx(y, xx, 0);
            out.data[o..o + shape.cout].copy_from_slice(biases);
            for ky in 0..shape.k {
                let sy = y as isize + ky as isize - pad;
                if sy < 0 || sy >= x.h as isize {
                    continue;
                }
                for kx in 0..shape.k {
                    let sx = xx as isize + kx as isize - pad;
                    if sx < 0 || sx >= x.w as isize {
                        continue;
                    }
                    for ci in 0..shape.cin {
                        let v = x.get(sy as usize, sx as usize, ci);
                        let wrow = &weights[shape.widx(ky, kx, ci, 0)..][..shape.cout];
                        for (acc, w) in out.data[o..o + shape.cout].iter_mut().zip(wrow) {
                            *acc += v * w;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d`] given the upstream gradient `dy`; accumulates into
/// `dw` and `db` and returns `dx`.
pub fn conv2d_backward(
    x: &Tensor,
    shape: ConvShape,
    weights: &[f64],
    dy: &Tensor,
    dw: &mut [f64],
    db: &mut [f64],
) -> Tensor {
    let pad = (shape.k / 2) as isize;
    let mut dx = Tensor::zeros(x.h, x.w, x.c);
    for y in 0..x.h {
        for xx in 0..x.w {
            let o = dy.idx(y, xx, 0);
            let g = &dy.data[o..o + shape.cout];
            db.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            for ky in 0..shape.k {
                let sy = y as isize + ky as isize - pad;
                if sy < 0 || sy >= x.h as isize {
                    continue;
                }
                for kx in 0..shape.k {
                    let sx = xx as isize + kx as isize - pad;
                    if sx < 0 || sx >= x.w as isize {
                        continue;
                    }
                    for ci in 0..shape.cin {
                        let xi = x.idx(sy as usize, sx as usize, ci);
                        let wi = shape.widx(ky, kx, ci, 0);
                        let v = x.data[xi];
                        let mut acc = 0.0;
                        for co in 0..shape.cout {
                            dw[wi + co] += v * g[co];
                            acc += weights[wi + co] * g[co];
                        }
                        dx.data[xi] += acc;
                    }
                }
            }
        }
    }
    dx
}

pub fn relu(x: &Tensor) -> Tensor {
    Tensor {
        data: x.data.iter().map(|v| v.max(0.0)).collect(),
        ..x.clone()
    }
}

/// 2×2 max-pool with stride 2; a trailing odd row or column is dropped.
/// Returns the pooled tensor and, per output cell, the flat input index of
/// the winner (first maximum in row-major window order).
pub fn maxpool2x2(x: &Tensor) -> (Tensor, Vec<usize>) {
    let (oh, ow) = (x.h / 2, x.w / 2);
    let mut out = Tensor::zeros(oh, ow, x.c);
    let mut argmax = vec![0; oh * ow * x.c];
    for y in 0..oh {
        for xx in 0..ow {
            for ch in 0..x.c {
                let mut best = x.idx(2 * y, 2 * xx, ch);
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = x.idx(2 * y + dy, 2 * xx + dx, ch);
                    if x.data[i] > x.data[best] {
                        best = i;
                    }
                }
                let o = out.idx(y, xx, ch);
                out.data[o] = x.data[best];
                argmax[o] = best;
            }
        }
    }
    (out, argmax)
}

pub fn maxpool2x2_backward(input: &Tensor, argmax: &[usize], dy: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(input.h, input.w, input.c);
    for (g, &i) in dy.data.iter().zip(argmax) {
        dx.data[i] += g;
    }
    dx
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Dense layer (`weights` is `flat.len() × classes`, row-major), softmax, and
/// `−log probs[label]`.
pub fn dense_softmax_xent(
    flat: &[f64],
    weights: &[f64],
    biases: &[f64],
    label: usize,
) -> Result<(f64, Vec<f64>)> {
    let classes = biases.len();
    if weights.len() != flat.len() * classes || label >= classes {
        return Err(Error::ShapeMismatch(format!(
            "dense {}x{} with {} weights, label {label}",
            flat.len(),
            classes,
            weights.len()
        )));
    }
    let mut logits = biases.to_vec();
    for (x, row) in flat.iter().zip(weights.chunks_exact(classes)) {
        logits.iter_mut().zip(row).for_each(|(l, w)| *l += x * w);
    }
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    let loss = log_sum - logits[label];
    Ok((loss, softmax(&logits)))
}

/// Returns `d loss / d flat`; accumulates the weight and bias gradients.
pub fn dense_softmax_xent_backward(
    flat: &[f64],
    weights: &[f64],
    probs: &[f64],
    label: usize,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let classes = probs.len();
    let mut dlogits = probs.to_vec();
    dlogits[label] -= 1.0;
    db.iter_mut().zip(&dlogits).for_each(|(a, b)| *a += b);
    flat.iter()
        .zip(weights.chunks_exact(classes))
        .zip(dw.chunks_exact_mut(classes))
        .map(|((x, row), drow)| {
            let mut acc = 0.0;
            for c in 0..classes {
                drow[c] += x * dlogits[c];
                acc += row[c] * dlogits[c];
            }
            acc
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnnArchitecture {
    pub input_h: usize,
    pub input_w: usize,
    /// `(kernel size, filters)` per conv + ReLU + pool block.
    pub blocks: Vec<(usize, usize)>,
}

impl CnnArchitecture {
    /// Fixed baselines: one 8-filter block for 8×8 inputs, 8- and 16-filter
    /// blocks for anything larger.
    pub fn for_input(h: usize, w: usize) -> Self {
        let blocks = if h <= 8 && w <= 8 {
            vec![(3, 8)]
        } else {
            vec![(3, 8), (3, 16)]
        };
        Self {
            input_h: h,
            input_w: w,
            blocks,
        }
    }

    fn conv_shapes(&self) -> Vec<ConvShape> {
        let mut cin = 1;
        self.blocks
            .iter()
            .map(|&(k, cout)| {
                let s = ConvShape { k, cin, cout };
                cin = cout;
                s
            })
            .collect()
    }

    /// Length of the flattened feature vector feeding the dense layer.
    pub fn flat_len(&self) -> usize {
        let (mut h, mut w) = (self.input_h, self.input_w);
        for _ in &self.blocks {
            h /= 2;
            w /= 2;
        }
        h * w * self.blocks.last().map_or(1, |b| b.1)
    }

    pub fn param_count(&self) -> usize {
        self.layout().iter().map(|l| l.len).sum()
    }

    fn layout(&self) -> Vec<Segment> {
        let mut segs = Vec::new();
        let mut at = 0;
        let mut push = |len: usize, fan_in: usize| {
            segs.push(Segment {
                start: at,
                len,
                fan_in,
            });
            at += len;
        };
        for s in self.conv_shapes() {
            push(s.weight_len(), s.k * s.k * s.cin);
            push(s.cout, 0);
        }
        push(self.flat_len() * N_CLASSES, self.flat_len());
        push(N_CLASSES, 0);
        segs
    }
}

/// A contiguous block of the flat parameter vector; `fan_in == 0` marks biases.
#[derive(Clone, Copy, Debug)]
struct Segment {
    start: usize,
    len: usize,
    fan_in: usize,
}

impl Segment {
    fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CnnModel {
    pub arch: CnnArchitecture,
    pub params: Vec<f64>,
}

struct BlockCache {
    input: Tensor,
    pre_relu: Tensor,
    post_relu: Tensor,
    argmax: Vec<usize>,
}

impl CnnModel {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init(arch: CnnArchitecture, seed: u64) -> Self {
        let mut rng = rng_for(seed, Stream::Init, 0);
        let mut params = vec![0.0; arch.param_count()];
        for seg in arch.layout() {
            if seg.fan_in > 0 {
                let bound = 1.0 / (seg.fan_in as f64).sqrt();
                for p in &mut params[seg.range()] {
                    *p = rng.gen_range(-bound..bound);
                }
            }
        }
        Self { arch, params }
    }

    fn check_input(&self, img: &ImageSample) -> Result<()> {
        if img.height != self.arch.input_h || img.width != self.arch.input_w {
            return Err(Error::ShapeMismatch(format!(
                "model expects {}x{} images, got {}x{}",
                self.arch.input_h, self.arch.input_w, img.height, img.width
            )));
        }
        Ok(())
    }

    fn run(
        params: &[f64],
        arch: &CnnArchitecture,
        img: &ImageSample,
    ) -> Result<(Vec<BlockCache>, Tensor)> {
        let layout = arch.layout();
        let mut x = Tensor::from_image(img);
        let mut caches = Vec::with_capacity(arch.blocks.len());
        for (b, shape) in arch.conv_shapes().into_iter().enumerate() {
            let (w, bias) = (
                &params[layout[2 * b].range()],
                &params[layout[2 * b + 1].range()],
            );
            let pre = conv2d(&x, shape, w, bias)?;
            let post = relu(&pre);
            let (pooled, argmax) = maxpool2x2(&post);
            caches.push(BlockCache {
                input: x,
                pre_relu: pre,
                post_relu: post,
                argmax,
            });
            x = pooled;
        }
        Ok((caches, x))
    }

    fn loss_probs_grad(
        params: &[f64],
        arch: &CnnArchitecture,
        img: &ImageSample,
        grad: Option<&mut [f64]>,
    ) -> Result<(f64, Vec<f64>)> {
        let layout = arch.layout();
        let (caches, features) = Self::run(params, arch, img)?;
        let nb = arch.blocks.len();
        let (dense_w, dense_b) = (layout[2 * nb], layout[2 * nb + 1]);
        let label = img.label as usize;
        let (loss, probs) = dense_softmax_xent(
            &features.data,
            &params[dense_w.range()],
            &params[dense_b.range()],
            label,
        )?;
        let Some(grad) = grad else {
            return Ok((loss, probs));
        };
        let (head, tail) = grad.split_at_mut(dense_b.start);
        let dflat = dense_softmax_xent_backward(
            &features.data,
            &params[dense_w.range()],
            &probs,
            label,
            &mut head[dense_w.range()],
            &mut tail[..dense_b.len],
        );
        let mut dy = Tensor {
            data: dflat,
            ..features
        };
        for (b, (shape, cache)) in arch
            .conv_shapes()
            .into_iter()
            .zip(&caches)
            .enumerate()
            .rev()
        {
            let mut d = maxpool2x2_backward(&cache.post_relu, &cache.argmax, &dy);
            for (g, z) in d.data.iter_mut().zip(&cache.pre_relu.data) {
                if *z <= 0.0 {
                    *g = 0.0;
                }
            }
            let (ws, bs) = (layout[2 * b], layout[2 * b + 1]);
            let (gw, gb) = grad[ws.start..bs.start + bs.len].split_at_mut(ws.len);
            dy = conv2d_backward(&cache.input, shape, &params[ws.range()], &d, gw, gb);
        }
        Ok((loss, probs))
    }

    /// Cross-entropy loss and class probabilities for one image.
    pub fn forward(&self, img: &ImageSample) -> Result<(f64, Vec<f64>)> {
        self.check_input(img)?;
        Self::loss_probs_grad(&self.params, &self.arch, img, None)
    }

    /// Mean cross-entropy over `batch` and its gradient, reduced in batch order.
    pub fn loss_and_grad(&self, batch: &[ImageSample]) -> Result<(f64, Vec<f64>)> {
        loss_and_grad_at(&self.arch, &self.params, batch)
    }
}

pub fn loss_and_grad_at(
    arch: &CnnArchitecture,
    params: &[f64],
    batch: &[ImageSample],
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = batch.len() as f64;
    let per_sample: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|img| {
            let mut g = vec![0.0; params.len()];
            let (loss, _) = CnnModel::loss_probs_grad(params, arch, img, Some(&mut g))?;
            Ok((loss, g))
        })
        .collect::<Result<_>>()?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (l, g) in per_sample {
        loss += l;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

/// `(mean cross-entropy, accuracy)`; ties in probability go to class 0.
pub fn evaluate_cnn(
    arch: &CnnArchitecture,
    params: &[f64],
    samples: &[ImageSample],
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let results: Vec<(f64, bool)> = samples
        .par_iter()
        .map(|img| {
            let (loss, probs) = CnnModel::loss_probs_grad(params, arch, img, None)?;
            let pred = usize::from(probs[1] > probs[0]);
            Ok((loss, pred == img.label as usize))
        })
        .collect::<Result<_>>()?;
    let loss = results.iter().map(|r| r.0).sum::<f64>() / samples.len() as f64;
    let acc = results.iter().filter(|r| r.1).count() as f64 / samples.len() as f64;
    Ok((loss, acc))
}

/// Defaults for the CNN: constant learning rate 0.01, 200 epochs.
pub fn default_cnn_config() -> TrainConfig {
    TrainConfig {
        epochs: 200,
        lr0: 0.01,
        lr_decay: 0.0,
        ..TrainConfig::default()
    }
}

pub fn train_cnn(
    model: CnnModel,
    train: &[ImageSample],
    test: &[ImageSample],
    cfg: &TrainConfig,
    augment: Option<&AugmentConfig>,
) -> Result<(Vec<MetricsRow>, CnnModel)> {
    for s in train.iter().chain(test) {
        model.check_input(s)?;
        if s.label > 1 {
            return Err(Error::NonBinaryLabels(s.label));
        }
    }
    let CnnModel { arch, mut params } = model;
    let metrics = fit(
        &mut params,
        train,
        test,
        cfg,
        augment,
        |p, batch| Ok(loss_and_grad_at(&arch, p, batch)?.1),
        |p, samples| evaluate_cnn(&arch, p, samples),
    )?;
    Ok((metrics, CnnModel { arch, params }))
}
