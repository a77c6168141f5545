use std::ops::Range;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::linalg::{affine, affine_backward, leaky_relu, leaky_relu_grad, softmax_inplace, Matrix};
use crate::error::{Error, Result};
use crate::tabular::OneHotSchema;

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` before logs.
pub const PROB_FLOOR: f64 = 1e-7;

/// Fully connected layer; `weight` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Dense {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform in `+-sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn xavier<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = xavier_bound(in_dim, out_dim);
        let data = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Dense {
            weight: Matrix::from_vec(out_dim, in_dim, data),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Hidden widths `d' -> 50 -> 10`, each clamped below `d'`.
pub fn default_hidden(width: usize) -> Vec<usize> {
    let cap = width.saturating_sub(1);
    vec![50.min(cap), 10.min(cap)]
}

/// Under-complete autoencoder: encoder chain plus its mirror, LeakyReLU on
/// every hidden layer and a softmax over each column span at the output.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    layers: Vec<Dense>,
    n_encoder: usize,
    spans: Vec<Range<usize>>,
}

pub(crate) struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre: Vec<Matrix>,
    pub probs: Matrix,
}

/// Gradients shaped like the model's layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }
}

fn validate_spans(spans: &[Range<usize>], width: usize) -> Result<()> {
    let mut next = 0;
    for span in spans {
        if span.start != next || span.is_empty() {
            return Err(Error::InvalidConfig(
                "column spans must be contiguous, non-empty and start at 0".into(),
            ));
        }
        next = span.end;
    }
    if next != width {
        return Err(Error::DimensionMismatch {
            expected: width,
            found: next,
            context: "column spans vs input width",
        });
    }
    Ok(())
}

impl AutoencoderModel {
    /// `layer_dims` is the encoder chain `[d', h1, ..., bottleneck]`; the
    /// decoder mirrors it.
    pub fn init_xavier(layer_dims: &[usize], spans: Vec<Range<usize>>, seed: u64) -> Result<Self> {
        Self::check_dims(layer_dims)?;
        validate_spans(&spans, layer_dims[0])?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chain = mirrored(layer_dims);
        let layers = chain
            .windows(2)
            .map(|w| Dense::xavier(w[0], w[1], &mut rng))
            .collect();
        Ok(AutoencoderModel {
            layers,
            n_encoder: layer_dims.len() - 1,
            spans,
        })
    }

    /// Xavier model for a schema with the given hidden widths.
    pub fn for_schema(schema: &OneHotSchema, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut dims = vec![schema.total_features()];
        dims.extend_from_slice(hidden);
        Self::init_xavier(&dims, schema.spans().to_vec(), seed)
    }

    /// Builds a model from explicit layers (encoder followed by decoder).
    pub fn from_layers(layers: Vec<Dense>, spans: Vec<Range<usize>>) -> Result<Self> {
        if layers.len() < 2 || !layers.len().is_multiple_of(2) {
            return Err(Error::InvalidConfig(
                "an autoencoder needs an even number (>= 2) of layers".into(),
            ));
        }
        let n_encoder = layers.len() / 2;
        let mut dims = vec![layers[0].in_dim()];
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() != *dims.last().unwrap() || layer.bias.len() != layer.out_dim() {
                return Err(Error::DimensionMismatch {
                    expected: *dims.last().unwrap(),
                    found: layer.in_dim(),
                    context: if i == 0 { "layer input" } else { "layer chain" },
                });
            }
            dims.push(layer.out_dim());
        }
        let encoder = &dims[..=n_encoder];
        Self::check_dims(encoder)?;
        if mirrored(encoder) != dims {
            return Err(Error::InvalidConfig("decoder does not mirror the encoder".into()));
        }
        validate_spans(&spans, dims[0])?;
        Ok(AutoencoderModel {
            layers,
            n_encoder,
            spans,
        })
    }

    fn check_dims(dims: &[usize]) -> Result<()> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "layer dims need at least two positive entries, got {dims:?}"
            )));
        }
        let bottleneck = *dims.last().unwrap();
        if bottleneck >= dims[0] {
            return Err(Error::InvalidConfig(format!(
                "bottleneck {bottleneck} must be narrower than the input {}",
                dims[0]
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Encoder chain `[d', h1, ..., bottleneck]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers[..self.n_encoder].iter().map(Dense::out_dim));
        dims
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn encoder_layers(&self) -> &[Dense] {
        &self.layers[..self.n_encoder]
    }

    pub fn decoder_layers(&self) -> &[Dense] {
        &self.layers[self.n_encoder..]
    }

    /// Replaces the first encoder layer, keeping its shape.
    pub fn set_first_layer(&mut self, layer: Dense) -> Result<()> {
        let current = &self.layers[0];
        if layer.weight.rows() != current.weight.rows()
            || layer.weight.cols() != current.weight.cols()
            || layer.bias.len() != current.bias.len()
        {
            return Err(Error::DimensionMismatch {
                expected: current.weight.rows() * current.weight.cols(),
                found: layer.weight.rows() * layer.weight.cols(),
                context: "first encoder layer shape",
            });
        }
        self.layers[0] = layer;
        Ok(())
    }

    pub fn spans(&self) -> &[Range<usize>] {
        &self.spans
    }

    /// Per-column distributions for one input vector.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_batch(&Matrix::from_vec(1, x.len(), x.to_vec()))
            .into_vec()
    }

    pub fn forward_batch(&self, x: &Matrix) -> Matrix {
        let last = self.layers.len() - 1;
        let mut act = affine(x, &self.layers[0].weight, &self.layers[0].bias);
        for l in 0..=last {
            if l > 0 {
                act = affine(&act, &self.layers[l].weight, &self.layers[l].bias);
            }
            if l < last {
                act.map_inplace(leaky_relu);
            }
        }
        self.span_softmax(&mut act);
        act
    }

    fn span_softmax(&self, logits: &mut Matrix) {
        for r in 0..logits.rows() {
            let row = logits.row_mut(r);
            for span in &self.spans {
                softmax_inplace(&mut row[span.clone()]);
            }
        }
    }

    pub(crate) fn forward_cached(&self, x: Matrix) -> ForwardCache {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act = x;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = affine(&act, &layer.weight, &layer.bias);
            inputs.push(act);
            act = z.clone();
            if l < last {
                act.map_inplace(leaky_relu);
            }
            pre.push(z);
        }
        self.span_softmax(&mut act);
        ForwardCache {
            inputs,
            pre,
            probs: act,
        }
    }

    /// Back-propagates `grad_probs = dL/d(probabilities)`.
    pub(crate) fn backward(&self, cache: &ForwardCache, grad_probs: &Matrix) -> Gradients {
        let mut grads = self.zero_gradients();
        self.backward_into(cache, grad_probs, &mut grads);
        grads
    }

    pub(crate) fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.in_dim(), l.out_dim()))
                .collect(),
        }
    }

    /// Like `backward`, overwriting a reusable buffer.
    pub(crate) fn backward_into(&self, cache: &ForwardCache, grad_probs: &Matrix, out: &mut Gradients) {
        let probs = &cache.probs;
        let mut grad = Matrix::zeros(probs.rows(), probs.cols());
        for r in 0..probs.rows() {
            let (p, g) = (probs.row(r), grad_probs.row(r));
            let out = grad.row_mut(r);
            for span in &self.spans {
                let inner: f64 = span.clone().map(|i| p[i] * g[i]).sum();
                for i in span.clone() {
                    out[i] = p[i] * (g[i] - inner);
                }
            }
        }

        let grads = &mut out.layers;
        let last = self.layers.len() - 1;
        for l in (0..=last).rev() {
            if l < last {
                for (g, &z) in grad.as_mut_slice().iter_mut().zip(cache.pre[l].as_slice()) {
                    *g *= leaky_relu_grad(z);
                }
            }
            let Dense { weight, bias } = &mut grads[l];
            let next = affine_backward(
                &cache.inputs[l],
                &self.layers[l].weight,
                &grad,
                weight,
                bias,
                l > 0,
            );
            if let Some(next) = next {
                grad = next;
            }
        }
    }

    /// Parameter tensors in a fixed order: per layer, weight then bias.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }
}

pub(crate) fn mirrored(encoder: &[usize]) -> Vec<usize> {
    let mut chain = encoder.to_vec();
    chain.extend(encoder.iter().rev().skip(1));
    chain
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Mean binary cross-entropy over all features of one output vector.
pub fn recon_loss(output: &[f64], target: &[f64]) -> f64 {
    assert_eq!(output.len(), target.len(), "recon_loss length");
    let total: f64 = output
        .iter()
        .zip(target)
        .map(|(&p, &y)| {
            let p = clamp_prob(p);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    total / output.len() as f64
}

/// [`recon_loss`] averaged over the rows of a batch.
pub fn recon_loss_batch(probs: &Matrix, targets: &Matrix) -> f64 {
    let total: f64 = (0..probs.rows())
        .map(|r| recon_loss(probs.row(r), targets.row(r)))
        .sum();
    total / probs.rows() as f64
}

/// Gradient of [`recon_loss_batch`] with respect to the probabilities.
pub(crate) fn recon_loss_grad(probs: &Matrix, targets: &Matrix) -> Matrix {
    let scale = 1.0 / (probs.rows() * probs.cols()) as f64;
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    for ((g, &p), &y) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(probs.as_slice())
        .zip(targets.as_slice())
    {
        *g = if (PROB_FLOOR..=1.0 - PROB_FLOOR).contains(&p) {
            scale * (-y / p + (1.0 - y) / (1.0 - p))
        } else {
            0.0
        };
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans_2_3() -> Vec<Range<usize>> {
        vec![0..2, 2..5]
    }

    #[test]
    fn xavier_is_seeded_bounded_and_bias_free() {
        let a = AutoencoderModel::init_xavier(&[5, 3, 2], vec![0..5], 7).unwrap();
        let b = AutoencoderModel::init_xavier(&[5, 3, 2], vec![0..5], 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, AutoencoderModel::init_xavier(&[5, 3, 2], vec![0..5], 8).unwrap());
        assert_eq!(a.layers().len(), 4);
        for layer in a.layers() {
            assert!(layer.bias.iter().all(|&b| b == 0.0));
            let bound = xavier_bound(layer.in_dim(), layer.out_dim());
            assert!(layer.weight.as_slice().iter().all(|w| w.abs() <= bound));
        }
        let decoder_dims: Vec<_> = a.decoder_layers().iter().map(|l| (l.in_dim(), l.out_dim())).collect();
        assert_eq!(decoder_dims, vec![(2, 3), (3, 5)]);
    }

    #[test]
    fn construction_enforces_bottleneck() {
        assert!(AutoencoderModel::init_xavier(&[5, 5], vec![0..5], 0).is_err());
        assert!(AutoencoderModel::init_xavier(&[5], vec![0..5], 0).is_err());
        assert!(AutoencoderModel::init_xavier(&[5, 2], vec![0..4], 0).is_err());
        assert_eq!(default_hidden(300), [50, 10]);
        assert_eq!(default_hidden(30), [29, 10]);
        assert_eq!(default_hidden(6), [5, 5]);
    }

    #[test]
    fn zero_model_outputs_uniform_spans() {
        let mut model = AutoencoderModel::init_xavier(&[5, 3, 2], spans_2_3(), 1).unwrap();
        for p in model.params_mut() {
            p.fill(0.0);
        }
        let out = model.forward(&[0.3, 0.7, 1.0, 0.0, 0.0]);
        let third = 1.0 / 3.0;
        let expected = [0.5, 0.5, third, third, third];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-15);
        }
    }

    #[test]
    fn shifting_span_logits_leaves_output_unchanged() {
        let model = AutoencoderModel::init_xavier(&[5, 3, 2], spans_2_3(), 3).unwrap();
        let x = [1.0, 0.0, 0.0, 1.0, 0.0];
        let before = model.forward(&x);
        let mut shifted = model.clone();
        let last = shifted.layers.len() - 1;
        for b in &mut shifted.layers[last].bias[2..5] {
            *b += 4.25;
        }
        let after = shifted.forward(&x);
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bce_of_uniform_binary_span() {
        let loss = recon_loss(&[0.5, 0.5], &[1.0, 0.0]);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((loss - 0.693147).abs() < 1e-6);
    }

    #[test]
    fn bce_of_perfect_output_is_tiny() {
        let target = [1.0, 0.0, 0.0, 1.0, 0.0];
        assert!(recon_loss(&target, &target) <= 2e-7);
        assert!(recon_loss(&[0.2, 0.8, 0.1, 0.1, 0.8], &target) >= 0.0);
    }

    #[test]
    fn from_layers_rejects_asymmetric_decoder() {
        let layers = vec![Dense::zeros(5, 3), Dense::zeros(3, 2), Dense::zeros(2, 4), Dense::zeros(4, 5)];
        assert!(AutoencoderModel::from_layers(layers, vec![0..5]).is_err());
    }
}
