//! Projection encoder `g(x) = W2 Dropout(LeakyReLU(LayerNorm(W1 x + b1))) + b2`
//! trained to align its output with row embeddings by cosine distance.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::nn::adam::Adam;
use crate::nn::linalg::{affine, affine_backward, dot, leaky_relu, leaky_relu_grad};
use crate::nn::train::{gather, split_rows, EarlyStopper};
use crate::nn::{AutoencoderModel, Dense, Matrix, TrainConfig, TrainReport};

pub const LAYER_NORM_EPS: f64 = 1e-5;
pub const DROPOUT: f64 = 0.1;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let denom = dot(a, a).sqrt() * dot(b, b).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        dot(a, b) / denom
    }
}

fn check_shapes(p: &Matrix, e: &Matrix) -> Result<()> {
    if p.rows() != e.rows() || p.cols() != e.cols() {
        return Err(Error::DimensionMismatch {
            expected: e.rows() * e.cols(),
            found: p.rows() * p.cols(),
            context: "projection output vs embeddings",
        });
    }
    if p.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// `1 - mean_i cos(P_i, E_i)`; a zero-norm row counts as `cos = 0`.
pub fn cosine_alignment_loss(p: &Matrix, e: &EmbeddingMatrix) -> Result<f64> {
    check_shapes(p, e.values())?;
    Ok(cosine_loss(p, e.values()))
}

pub(crate) fn cosine_loss(p: &Matrix, e: &Matrix) -> f64 {
    let total: f64 = (0..p.rows()).map(|r| cosine(p.row(r), e.row(r))).sum();
    1.0 - total / p.rows() as f64
}

/// Gradient of [`cosine_loss`] with respect to `p`. Zero-norm rows get zero.
pub(crate) fn cosine_loss_grad(p: &Matrix, e: &Matrix) -> Matrix {
    let n = p.rows() as f64;
    let mut grad = Matrix::zeros(p.rows(), p.cols());
    for r in 0..p.rows() {
        let (a, b) = (p.row(r), e.row(r));
        let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
        if na == 0.0 || nb == 0.0 {
            continue;
        }
        let c = dot(a, b) / (na * nb);
        for ((g, &ai), &bi) in grad.row_mut(r).iter_mut().zip(a).zip(b) {
            // d cos / d a = b / (|a||b|) - cos * a / |a|^2
            *g = -(bi / (na * nb) - c * ai / (na * na)) / n;
        }
    }
    grad
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionEncoder {
    /// `h x d'` input layer; this is what gets transferred.
    pub first: Dense,
    pub gain: Vec<f64>,
    pub offset: Vec<f64>,
    /// `d_e x h` output layer.
    pub output: Dense,
    pub dropout: f64,
}

pub(crate) struct ProjectionCache {
    x: Matrix,
    normed: Matrix,
    inv_std: Vec<f64>,
    ln: Matrix,
    /// Scaled keep mask; `None` in evaluation mode.
    mask: Option<Matrix>,
    hidden: Matrix,
    pub out: Matrix,
}

impl ProjectionEncoder {
    pub fn init_xavier(input_dim: usize, hidden: usize, embed_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ProjectionEncoder {
            first: Dense::xavier(input_dim, hidden, &mut rng),
            gain: vec![1.0; hidden],
            offset: vec![0.0; hidden],
            output: Dense::xavier(hidden, embed_dim, &mut rng),
            dropout: DROPOUT,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.first.in_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.first.out_dim()
    }

    pub fn embed_dim(&self) -> usize {
        self.output.out_dim()
    }

    /// Errors unless `(W1, b1)` fits the model's first encoder layer.
    pub fn check_transfer(&self, model: &AutoencoderModel) -> Result<()> {
        let target = &model.layers()[0];
        if target.in_dim() != self.input_dim() || target.out_dim() != self.hidden_dim() {
            return Err(Error::DimensionMismatch {
                expected: target.out_dim(),
                found: self.hidden_dim(),
                context: "projection hidden width vs first encoder layer",
            });
        }
        Ok(())
    }

    /// Evaluation-mode forward pass (no dropout).
    pub fn forward(&self, x: &Matrix) -> Matrix {
        self.forward_cached(x.clone(), None::<&mut ChaCha8Rng>).out
    }

    pub(crate) fn forward_cached<R: Rng>(&self, x: Matrix, rng: Option<&mut R>) -> ProjectionCache {
        let z = affine(&x, &self.first.weight, &self.first.bias);
        let h = self.hidden_dim();
        let mut normed = Matrix::zeros(z.rows(), h);
        let mut inv_std = Vec::with_capacity(z.rows());
        let mut ln = Matrix::zeros(z.rows(), h);
        for r in 0..z.rows() {
            let zr = z.row(r);
            let mean = zr.iter().sum::<f64>() / h as f64;
            let var = zr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / h as f64;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(inv);
            let nr = normed.row_mut(r);
            for (k, v) in nr.iter_mut().enumerate() {
                *v = (zr[k] - mean) * inv;
            }
            let nr = normed.row(r).to_vec();
            for (k, v) in ln.row_mut(r).iter_mut().enumerate() {
                *v = self.gain[k] * nr[k] + self.offset[k];
            }
        }
        let mut hidden = ln.clone();
        hidden.map_inplace(leaky_relu);
        let mask = rng.map(|rng| {
            let keep = 1.0 / (1.0 - self.dropout);
            let data = (0..hidden.rows() * h)
                .map(|_| if rng.random::<f64>() < self.dropout { 0.0 } else { keep })
                .collect();
            Matrix::from_vec(hidden.rows(), h, data)
        });
        if let Some(mask) = &mask {
            for (v, m) in hidden.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *v *= m;
            }
        }
        let out = affine(&hidden, &self.output.weight, &self.output.bias);
        ProjectionCache {
            x,
            normed,
            inv_std,
            ln,
            mask,
            hidden,
            out,
        }
    }

    /// Returns parameter gradients (shaped like `self`) and, if asked, the
    /// gradient with respect to the input.
    pub(crate) fn backward(
        &self,
        cache: &ProjectionCache,
        grad_out: &Matrix,
        want_input_grad: bool,
    ) -> (ProjectionEncoder, Option<Matrix>) {
        let h = self.hidden_dim();
        let mut grads = ProjectionEncoder {
            first: Dense::zeros(self.input_dim(), h),
            gain: vec![0.0; h],
            offset: vec![0.0; h],
            output: Dense::zeros(h, self.embed_dim()),
            dropout: self.dropout,
        };
        let mut g = affine_backward(
            &cache.hidden,
            &self.output.weight,
            grad_out,
            &mut grads.output.weight,
            &mut grads.output.bias,
            true,
        )
        .expect("input gradient requested");
        if let Some(mask) = &cache.mask {
            for (v, m) in g.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                *v *= m;
            }
        }
        for (v, &pre) in g.as_mut_slice().iter_mut().zip(cache.ln.as_slice()) {
            *v *= leaky_relu_grad(pre);
        }
        let mut grad_z = Matrix::zeros(g.rows(), h);
        for r in 0..g.rows() {
            let (gr, nr) = (g.row(r), cache.normed.row(r));
            let mut d_norm = vec![0.0; h];
            for k in 0..h {
                grads.gain[k] += gr[k] * nr[k];
                grads.offset[k] += gr[k];
                d_norm[k] = gr[k] * self.gain[k];
            }
            let mean_d = d_norm.iter().sum::<f64>() / h as f64;
            let mean_dn = d_norm.iter().zip(nr).map(|(d, n)| d * n).sum::<f64>() / h as f64;
            let inv = cache.inv_std[r];
            for (k, v) in grad_z.row_mut(r).iter_mut().enumerate() {
                *v = inv * (d_norm[k] - mean_d - nr[k] * mean_dn);
            }
        }
        let grad_x = affine_backward(
            &cache.x,
            &self.first.weight,
            &grad_z,
            &mut grads.first.weight,
            &mut grads.first.bias,
            want_input_grad,
        );
        (grads, grad_x)
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.first.weight.as_mut_slice(),
            self.first.bias.as_mut_slice(),
            self.gain.as_mut_slice(),
            self.offset.as_mut_slice(),
            self.output.weight.as_mut_slice(),
            self.output.bias.as_mut_slice(),
        ]
    }

    pub fn params(&self) -> Vec<&[f64]> {
        vec![
            self.first.weight.as_slice(),
            self.first.bias.as_slice(),
            &self.gain,
            &self.offset,
            self.output.weight.as_slice(),
            self.output.bias.as_slice(),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct ProjectionOutcome {
    pub encoder: ProjectionEncoder,
    pub report: TrainReport,
}

/// Fits a fresh encoder with hidden width `hidden` (seeded by `cfg.seed`)
/// so that `g(inputs)` points along `embeddings`. Losses in the report are
/// evaluation-mode.
pub fn train_projection_encoder(
    inputs: &Matrix,
    embeddings: &EmbeddingMatrix,
    hidden: usize,
    cfg: &TrainConfig,
) -> Result<ProjectionOutcome> {
    cfg.validate()?;
    let targets = embeddings.values();
    if inputs.rows() != targets.rows() {
        return Err(Error::DimensionMismatch {
            expected: targets.rows(),
            found: inputs.rows(),
            context: "projection inputs vs embedding rows",
        });
    }
    if inputs.rows() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            have: inputs.rows(),
        });
    }
    if hidden == 0 {
        return Err(Error::InvalidConfig("projection hidden width must be >= 1".into()));
    }
    let n = inputs.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut encoder = ProjectionEncoder::init_xavier(inputs.cols(), hidden, embeddings.dim(), cfg.seed);
    let split = split_rows(n, cfg, &mut rng)?;
    let loss_on = |enc: &ProjectionEncoder, rows: &[usize]| {
        cosine_loss(&enc.forward(&gather(inputs, rows)), &gather(targets, rows))
    };
    let all_rows: Vec<usize> = (0..n).collect();

    let mut adam = Adam::new(cfg.learning_rate);
    let mut stopper = EarlyStopper::new(cfg);
    let mut best: Option<ProjectionEncoder> = None;
    let mut report = TrainReport {
        initial_loss: loss_on(&encoder, &all_rows),
        ..TrainReport::default()
    };
    let mut order = split.train.clone();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for rows in order.chunks(cfg.batch_size) {
            let target = gather(targets, rows);
            let cache = encoder.forward_cached(gather(inputs, rows), Some(&mut rng));
            total += cosine_loss(&cache.out, &target);
            batches += 1;
            let grad = cosine_loss_grad(&cache.out, &target);
            let (grads, _) = encoder.backward(&cache, &grad, false);
            adam.step(encoder.params_mut(), grads.params());
        }
        report.epoch_losses.push(total / batches as f64);
        if !split.validation.is_empty() {
            let val = loss_on(&encoder, &split.validation);
            report.validation_losses.push(val);
            let (improved, stop) = stopper.observe(val);
            if improved {
                best = Some(encoder.clone());
                report.best_epoch = Some(epoch);
            }
            if stop {
                report.stopped_early = true;
                break;
            }
        }
    }
    let encoder = best.unwrap_or(encoder);
    report.final_loss = loss_on(&encoder, &all_rows);
    Ok(ProjectionOutcome { encoder, report })
}
