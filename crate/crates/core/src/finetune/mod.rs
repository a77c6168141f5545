//! Autoencoder fine-tuning from row embeddings: weight initialization (WI)
//! and the double-loss objective (DL).

pub mod embeddings;
pub mod projection;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::autoencoder::recon_loss_grad;
use crate::nn::train::{add_noise_with, gather, train_with, Auxiliary};
use crate::nn::{default_hidden, recon_loss_batch, train, AutoencoderModel, Matrix, TrainConfig, TrainReport};
use crate::tabular::OneHotMatrix;

pub use embeddings::{load_embeddings, synthetic_embeddings, EmbeddingMatrix, EmbeddingMeta};
pub use projection::{
    cosine_alignment_loss, train_projection_encoder, ProjectionEncoder, ProjectionOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Wi,
    Dl,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wi" => Ok(Strategy::Wi),
            "dl" => Ok(Strategy::Dl),
            other => Err(Error::InvalidConfig(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    /// Autoencoder phase. `epochs == 0` skips it.
    pub autoencoder: TrainConfig,
    pub projection: TrainConfig,
    /// Encoder hidden widths; `None` uses [`default_hidden`].
    pub hidden: Option<Vec<usize>>,
    /// Weight of the alignment term in the double loss.
    pub lambda_proj: f64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            autoencoder: TrainConfig::default(),
            projection: TrainConfig::projection(),
            hidden: None,
            lambda_proj: 1.0,
        }
    }
}

impl FinetuneConfig {
    /// Seeds both phases.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.autoencoder.seed = seed;
        self.projection.seed = seed;
        self
    }

    fn hidden_for(&self, width: usize) -> Vec<usize> {
        self.hidden.clone().unwrap_or_else(|| default_hidden(width))
    }
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub model: AutoencoderModel,
    pub projection: ProjectionEncoder,
    pub projection_report: TrainReport,
    /// `None` when the autoencoder phase was skipped.
    pub report: Option<TrainReport>,
}

fn check_pairing(data: &OneHotMatrix, embeddings: &EmbeddingMatrix) -> Result<()> {
    if embeddings.n() != data.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: data.n_rows(),
            found: embeddings.n(),
            context: "embedding rows vs dataset rows",
        });
    }
    Ok(())
}

fn as_matrix(data: &OneHotMatrix) -> Matrix {
    Matrix::from_vec(data.n_rows(), data.width(), data.values().to_vec())
}

/// Trains the projection encoder on the raw one-hot rows, copies its first
/// layer into a fresh autoencoder and trains that as usual.
pub fn finetune_wi(
    data: &OneHotMatrix,
    embeddings: &EmbeddingMatrix,
    cfg: &FinetuneConfig,
) -> Result<FinetuneOutcome> {
    check_pairing(data, embeddings)?;
    let hidden = cfg.hidden_for(data.width());
    let mut model = AutoencoderModel::for_schema(data.schema(), &hidden, cfg.autoencoder.seed)?;
    let proj = train_projection_encoder(&as_matrix(data), embeddings, hidden[0], &cfg.projection)?;
    proj.encoder.check_transfer(&model)?;
    model.set_first_layer(proj.encoder.first.clone())?;
    let (model, report) = if cfg.autoencoder.epochs == 0 {
        (model, None)
    } else {
        let out = train(&model, data, &cfg.autoencoder)?;
        (out.model, Some(out.report))
    };
    Ok(FinetuneOutcome {
        model,
        projection: proj.encoder,
        projection_report: proj.report,
        report,
    })
}

/// Frozen projection term `lambda * cosine_loss(g(probs), E[rows])`.
pub(crate) struct AlignmentTerm<'a> {
    pub encoder: &'a ProjectionEncoder,
    pub targets: &'a Matrix,
    pub lambda: f64,
}

impl Auxiliary for AlignmentTerm<'_> {
    fn term(&self, rows: &[usize], probs: &Matrix, grad: Option<&mut Matrix>) -> f64 {
        let target = gather(self.targets, rows);
        let cache = self
            .encoder
            .forward_cached(probs.clone(), None::<&mut ChaCha8Rng>);
        let loss = projection::cosine_loss(&cache.out, &target);
        if let Some(grad) = grad {
            let g_out = projection::cosine_loss_grad(&cache.out, &target);
            let (_, g_in) = self.encoder.backward(&cache, &g_out, true);
            let g_in = g_in.expect("input gradient requested");
            for (g, d) in grad.as_mut_slice().iter_mut().zip(g_in.as_slice()) {
                *g += self.lambda * d;
            }
        }
        self.lambda * loss
    }
}

/// Double-loss fine-tuning. Phase 1 fits the projection encoder on the
/// initial autoencoder's reconstructions of noised rows; phase 2 trains the
/// autoencoder on reconstruction loss plus `lambda_proj` times the frozen
/// encoder's alignment loss.
pub fn finetune_dl(
    data: &OneHotMatrix,
    embeddings: &EmbeddingMatrix,
    cfg: &FinetuneConfig,
) -> Result<FinetuneOutcome> {
    check_pairing(data, embeddings)?;
    if cfg.lambda_proj.is_nan() || cfg.lambda_proj < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "lambda_proj must be >= 0, got {}",
            cfg.lambda_proj
        )));
    }
    let hidden = cfg.hidden_for(data.width());
    let initial = AutoencoderModel::for_schema(data.schema(), &hidden, cfg.autoencoder.seed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.autoencoder.seed);
    rng.set_stream(1);
    let clean = as_matrix(data);
    let noisy = Matrix::from_vec(
        clean.rows(),
        clean.cols(),
        add_noise_with(clean.as_slice(), cfg.autoencoder.noise_std, &mut rng),
    );
    let recon = initial.forward_batch(&noisy);
    let proj = train_projection_encoder(&recon, embeddings, hidden[0], &cfg.projection)?;

    let (model, report) = if cfg.autoencoder.epochs == 0 {
        (initial, None)
    } else if cfg.lambda_proj == 0.0 {
        let out = train(&initial, data, &cfg.autoencoder)?;
        (out.model, Some(out.report))
    } else {
        let term = AlignmentTerm {
            encoder: &proj.encoder,
            targets: embeddings.values(),
            lambda: cfg.lambda_proj,
        };
        let out = train_with(&initial, data, &cfg.autoencoder, Some(&term))?;
        (out.model, Some(out.report))
    };
    Ok(FinetuneOutcome {
        model,
        projection: proj.encoder,
        projection_report: proj.report,
        report,
    })
}

/// Combined objective on `inputs` (reconstruction target `targets`) and its
/// gradient with respect to every autoencoder parameter, in
/// [`AutoencoderModel::params`] order.
pub fn double_loss_with_grad(
    model: &AutoencoderModel,
    encoder: &ProjectionEncoder,
    inputs: &Matrix,
    targets: &Matrix,
    embeddings: &Matrix,
    lambda: f64,
) -> (f64, Vec<Vec<f64>>) {
    let rows: Vec<usize> = (0..inputs.rows()).collect();
    let term = AlignmentTerm {
        encoder,
        targets: embeddings,
        lambda,
    };
    let cache = model.forward_cached(inputs.clone());
    let mut grad = recon_loss_grad(&cache.probs, targets);
    let loss = recon_loss_batch(&cache.probs, targets) + term.term(&rows, &cache.probs, Some(&mut grad));
    let grads = model.backward(&cache, &grad);
    (loss, grads.slices().into_iter().map(<[f64]>::to_vec).collect())
}

/// Value of [`double_loss_with_grad`] alone.
pub fn double_loss(
    model: &AutoencoderModel,
    encoder: &ProjectionEncoder,
    inputs: &Matrix,
    targets: &Matrix,
    embeddings: &Matrix,
    lambda: f64,
) -> f64 {
    let rows: Vec<usize> = (0..inputs.rows()).collect();
    let probs = model.forward_batch(inputs);
    let term = AlignmentTerm {
        encoder,
        targets: embeddings,
        lambda,
    };
    recon_loss_batch(&probs, targets) + term.term(&rows, &probs, None)
}
