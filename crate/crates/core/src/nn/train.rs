use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::autoencoder::{recon_loss_batch, recon_loss_grad, AutoencoderModel};
use super::linalg::Matrix;
use crate::error::{Error, Result};
use crate::tabular::OneHotMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Standard deviation of the Gaussian input corruption.
    pub noise_std: f64,
    pub seed: u64,
    /// Share of rows held out for early stopping; 0 disables it.
    pub validation_fraction: f64,
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 2,
            learning_rate: 1e-3,
            noise_std: 0.5,
            seed: 0,
            validation_fraction: 0.0,
            patience: 20,
            min_delta: 1e-4,
        }
    }
}

impl TrainConfig {
    /// Settings for the projection encoder: 25 epochs, early stopping on a
    /// 20% validation split.
    pub fn projection() -> Self {
        TrainConfig {
            epochs: 25,
            noise_std: 0.0,
            validation_fraction: 0.2,
            ..TrainConfig::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return fail(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            ));
        }
        if self.noise_std.is_nan() || self.noise_std < 0.0 {
            return fail(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return fail(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        Ok(())
    }

    fn early_stopping(&self) -> bool {
        self.validation_fraction > 0.0
    }
}

/// Loss history of one training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Objective on clean inputs over all rows, before the first update.
    pub initial_loss: f64,
    /// Same objective for the returned weights.
    pub final_loss: f64,
    /// Mean mini-batch loss per epoch (on corrupted inputs).
    pub epoch_losses: Vec<f64>,
    pub validation_losses: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: AutoencoderModel,
    pub report: TrainReport,
}

/// `clip(x + eps, 0, 1)`.
#[inline]
pub fn perturb(x: f64, eps: f64) -> f64 {
    (x + eps).clamp(0.0, 1.0)
}

pub fn add_noise_with<R: Rng>(x: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let z: f64 = rng.sample(StandardNormal);
            perturb(v, sigma * z)
        })
        .collect()
}

/// Gaussian corruption clipped to `[0, 1]`, seeded.
pub fn add_noise(x: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
    add_noise_with(x, sigma, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

pub(crate) fn split_rows<R: Rng>(n: usize, cfg: &TrainConfig, rng: &mut R) -> Result<Split> {
    if !cfg.early_stopping() {
        if n < cfg.batch_size.max(1) {
            return Err(Error::TooFewRows {
                needed: cfg.batch_size.max(1),
                have: n,
            });
        }
        return Ok(Split {
            train: (0..n).collect(),
            validation: Vec::new(),
        });
    }
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, have: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).clamp(1, n - 1);
    let validation = order.split_off(n - n_val);
    Ok(Split {
        train: order,
        validation,
    })
}

pub(crate) struct EarlyStopper {
    best: f64,
    wait: usize,
    patience: usize,
    min_delta: f64,
}

impl EarlyStopper {
    pub fn new(cfg: &TrainConfig) -> Self {
        EarlyStopper {
            best: f64::INFINITY,
            wait: 0,
            patience: cfg.patience,
            min_delta: cfg.min_delta,
        }
    }

    /// Returns `(improved, stop)`.
    pub fn observe(&mut self, loss: f64) -> (bool, bool) {
        if loss < self.best - self.min_delta {
            self.best = loss;
            self.wait = 0;
            (true, false)
        } else {
            self.wait += 1;
            (false, self.wait >= self.patience)
        }
    }
}

pub(crate) fn gather(data: &Matrix, rows: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(rows.len(), data.cols());
    for (i, &r) in rows.iter().enumerate() {
        out.row_mut(i).copy_from_slice(data.row(r));
    }
    out
}

/// Extra loss term on the autoencoder's output distributions.
pub(crate) trait Auxiliary {
    /// Loss for dataset rows `rows` given their output probabilities; adds
    /// `dL/dprobs` into `grad` when given.
    fn term(&self, rows: &[usize], probs: &Matrix, grad: Option<&mut Matrix>) -> f64;
}

fn objective(
    model: &AutoencoderModel,
    data: &Matrix,
    rows: &[usize],
    aux: Option<&dyn Auxiliary>,
) -> f64 {
    let clean = gather(data, rows);
    let probs = model.forward_batch(&clean);
    let mut loss = recon_loss_batch(&probs, &clean);
    if let Some(aux) = aux {
        loss += aux.term(rows, &probs, None);
    }
    loss
}

/// Denoising training with mini-batch Adam on the per-feature BCE.
pub fn train(
    model: &AutoencoderModel,
    data: &OneHotMatrix,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(model, data, cfg, None)
}

pub(crate) fn train_with(
    model: &AutoencoderModel,
    data: &OneHotMatrix,
    cfg: &TrainConfig,
    aux: Option<&dyn Auxiliary>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.width() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: data.width(),
            context: "training data width",
        });
    }
    let n = data.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let split = split_rows(n, cfg, &mut rng)?;
    let matrix = Matrix::from_vec(n, data.width(), data.values().to_vec());
    let all_rows: Vec<usize> = (0..n).collect();

    let mut model = model.clone();
    let mut adam = Adam::new(cfg.learning_rate);
    let mut stopper = EarlyStopper::new(cfg);
    let mut best: Option<AutoencoderModel> = None;
    let mut report = TrainReport {
        initial_loss: objective(&model, &matrix, &all_rows, aux),
        ..TrainReport::default()
    };

    let mut order = split.train.clone();
    let mut grads = model.zero_gradients();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for rows in order.chunks(cfg.batch_size) {
            let clean = gather(&matrix, rows);
            let noisy = Matrix::from_vec(
                rows.len(),
                clean.cols(),
                add_noise_with(clean.as_slice(), cfg.noise_std, &mut rng),
            );
            let cache = model.forward_cached(noisy);
            let mut loss = recon_loss_batch(&cache.probs, &clean);
            let mut grad = recon_loss_grad(&cache.probs, &clean);
            if let Some(aux) = aux {
                loss += aux.term(rows, &cache.probs, Some(&mut grad));
            }
            model.backward_into(&cache, &grad, &mut grads);
            adam.step(model.params_mut(), grads.slices());
            total += loss;
            batches += 1;
        }
        report.epoch_losses.push(total / batches as f64);

        if !split.validation.is_empty() {
            let val = objective(&model, &matrix, &split.validation, aux);
            report.validation_losses.push(val);
            let (improved, stop) = stopper.observe(val);
            if improved {
                best = Some(model.clone());
                report.best_epoch = Some(epoch);
            }
            if stop {
                report.stopped_early = true;
                break;
            }
        }
    }

    let model = best.unwrap_or(model);
    report.final_loss = objective(&model, &matrix, &all_rows, aux);
    Ok(TrainOutcome { model, report })
}
