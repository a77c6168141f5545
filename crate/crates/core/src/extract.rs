//! Rule extraction from a trained reconstructor.
//!
//! Each candidate antecedent is turned into a probe vector: its items are
//! marked one-hot and every other column carries a uniform distribution.
//! The candidate passes if every antecedent item is reconstructed with
//! probability at least `tau_a`; then every other column whose most likely
//! category reaches `tau_c` yields a rule `antecedent -> that category`.
//! Single items that fail the antecedent test are dropped from all larger
//! candidates.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::linalg::{accumulate_product, affine, axpy, dot, leaky_relu, product_axpy, softmax_inplace};
use crate::nn::{AutoencoderModel, Dense, Matrix};
use crate::rule::Rule;
use crate::tabular::{ItemId, OneHotSchema};

/// Anything that maps a probe vector to per-column distributions.
pub trait Reconstructor {
    fn input_dim(&self) -> usize;

    fn reconstruct(&self, x: &[f64]) -> Vec<f64>;

    /// Must agree bit-for-bit with calling [`Reconstructor::reconstruct`]
    /// on each row.
    fn reconstruct_batch(&self, probes: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(probes.rows(), probes.cols());
        for r in 0..probes.rows() {
            out.row_mut(r).copy_from_slice(&self.reconstruct(probes.row(r)));
        }
        out
    }

    /// Specialised evaluator for extraction probes over `schema`. `None`
    /// (the default) builds each probe vector and calls
    /// [`Reconstructor::reconstruct_batch`].
    fn prober<'a>(&'a self, _schema: &'a OneHotSchema) -> Option<Box<dyn Prober + 'a>> {
        None
    }
}

/// Evaluates extraction probes without materialising probe vectors.
pub trait Prober {
    /// Walks `candidates` in order. Each candidate's own columns are passed
    /// to `keep` as probabilities (other entries unspecified); kept
    /// candidates then reach `complete` with the output logits of every
    /// column, in the same order.
    fn probe(
        &mut self,
        candidates: &[Vec<ItemId>],
        keep: &mut dyn FnMut(&[ItemId], &[f64]) -> bool,
        complete: &mut dyn FnMut(&[ItemId], &[f64]),
    );
}

/// Kept probes whose output layer is evaluated together.
const COMPLETE_BLOCK: usize = 32;

/// Autoencoder prober. A probe's first pre-activation is the uniform base
/// activation plus one precomputed offset per marked item, so its cost does
/// not grow with the input width. Output logits are accumulated from the
/// transposed output weights, first for the antecedent's own columns and
/// only for kept probes across all columns.
struct ModelProber<'a> {
    schema: &'a OneHotSchema,
    inner: &'a [Dense],
    out_bias: &'a [f64],
    /// `h x d'`.
    out_t: Matrix,
    base: Vec<f64>,
    /// Row `i`: change of the first pre-activation when item `i` is marked.
    offsets: Matrix,
}

impl<'a> ModelProber<'a> {
    fn new(model: &'a AutoencoderModel, schema: &'a OneHotSchema) -> Self {
        let layers = model.layers();
        let first = &layers[0];
        let out = &layers[layers.len() - 1];
        let h = first.out_dim();
        let uniform = uniform_vector(schema);
        let base: Vec<f64> = (0..h)
            .map(|o| first.bias[o] + dot(first.weight.row(o), &uniform))
            .collect();
        let mut offsets = Matrix::zeros(schema.total_features(), h);
        for span in schema.spans() {
            let share = 1.0 / span.len() as f64;
            for o in 0..h {
                let w = first.weight.row(o);
                let mean = span.clone().map(|k| w[k]).sum::<f64>() * share;
                for i in span.clone() {
                    offsets.row_mut(i)[o] = w[i] - mean;
                }
            }
        }
        let mut out_t = Matrix::zeros(out.in_dim(), out.out_dim());
        for i in 0..out.out_dim() {
            for (j, &w) in out.weight.row(i).iter().enumerate() {
                out_t.row_mut(j)[i] = w;
            }
        }
        ModelProber {
            schema,
            inner: &layers[1..layers.len() - 1],
            out_bias: &out.bias,
            out_t,
            base,
            offsets,
        }
    }

    fn hidden(&self, antecedent: &[ItemId]) -> Vec<f64> {
        let mut act = self.base.clone();
        for &i in antecedent {
            axpy(1.0, self.offsets.row(i), &mut act);
        }
        act.iter_mut().for_each(|v| *v = leaky_relu(*v));
        for layer in self.inner {
            let width = act.len();
            let mut next = affine(&Matrix::from_vec(1, width, act), &layer.weight, &layer.bias);
            next.map_inplace(leaky_relu);
            act = next.into_vec();
        }
        act
    }

    /// Per entry the sum runs in the same order as in `flush`, so both
    /// paths give identical bits.
    fn span_probs(&self, hidden: &[f64], span: Range<usize>, probs: &mut [f64]) {
        let out = &mut probs[span.clone()];
        out.copy_from_slice(&self.out_bias[span.clone()]);
        for (j, &a) in hidden.iter().enumerate() {
            product_axpy(a, &self.out_t.row(j)[span.clone()], out);
        }
        softmax_inplace(out);
    }

    /// `block` and `coeffs` are scratch with one row per pending probe.
    fn flush(
        &self,
        candidates: &[Vec<ItemId>],
        pending: &mut Vec<(usize, Vec<f64>)>,
        block: &mut Matrix,
        coeffs: &mut Matrix,
        complete: &mut dyn FnMut(&[ItemId], &[f64]),
    ) {
        for (b, (_, hidden)) in pending.iter().enumerate() {
            block.row_mut(b).copy_from_slice(self.out_bias);
            coeffs.row_mut(b).copy_from_slice(hidden);
        }
        accumulate_product(block, coeffs, &self.out_t);
        for (b, (k, _)) in pending.iter().enumerate() {
            complete(&candidates[*k], block.row(b));
        }
        pending.clear();
    }
}

impl Prober for ModelProber<'_> {
    fn probe(
        &mut self,
        candidates: &[Vec<ItemId>],
        keep: &mut dyn FnMut(&[ItemId], &[f64]) -> bool,
        complete: &mut dyn FnMut(&[ItemId], &[f64]),
    ) {
        let (width, h) = (self.out_bias.len(), self.out_t.rows());
        let mut probs = vec![0.0; width];
        let mut pending = Vec::with_capacity(COMPLETE_BLOCK);
        let mut block = Matrix::zeros(COMPLETE_BLOCK, width);
        let mut coeffs = Matrix::zeros(COMPLETE_BLOCK, h);
        for (k, cand) in candidates.iter().enumerate() {
            let hidden = self.hidden(cand);
            for &i in cand {
                self.span_probs(&hidden, self.schema.span(self.schema.column_of(i)), &mut probs);
            }
            if keep(cand, &probs) {
                pending.push((k, hidden));
                if pending.len() == COMPLETE_BLOCK {
                    self.flush(candidates, &mut pending, &mut block, &mut coeffs, complete);
                }
            }
        }
        if !pending.is_empty() {
            let rows = pending.len();
            let (mut block, mut coeffs) = (Matrix::zeros(rows, width), Matrix::zeros(rows, h));
            self.flush(candidates, &mut pending, &mut block, &mut coeffs, complete);
        }
    }
}

impl Reconstructor for AutoencoderModel {
    fn input_dim(&self) -> usize {
        AutoencoderModel::input_dim(self)
    }

    fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x)
    }

    fn reconstruct_batch(&self, probes: &Matrix) -> Matrix {
        self.forward_batch(probes)
    }

    fn prober<'a>(&'a self, schema: &'a OneHotSchema) -> Option<Box<dyn Prober + 'a>> {
        Some(Box::new(ModelProber::new(self, schema)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub max_antecedents: usize,
    pub tau_a: f64,
    pub tau_c: f64,
    /// Restricts antecedent items; consequents stay unrestricted.
    pub item_constraints: Option<BTreeSet<ItemId>>,
    /// Also require each antecedent category to be the most likely one in
    /// its column.
    pub require_argmax: bool,
    /// Probes evaluated per reconstructor call.
    pub probe_batch: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            max_antecedents: 2,
            tau_a: 0.5,
            tau_c: 0.8,
            item_constraints: None,
            require_argmax: false,
            probe_batch: 256,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_antecedents == 0 {
            return Err(Error::InvalidConfig("max_antecedents must be >= 1".into()));
        }
        for (name, tau) in [("tau_a", self.tau_a), ("tau_c", self.tau_c)] {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1], got {tau}")));
            }
        }
        if self.probe_batch == 0 {
            return Err(Error::InvalidConfig("probe_batch must be >= 1".into()));
        }
        if self.tau_c < self.tau_a {
            log::warn!(
                "tau_c ({}) below tau_a ({}): consequents are held to a weaker standard than antecedents",
                self.tau_c,
                self.tau_a
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractionStats {
    pub probes: usize,
    /// Candidates that passed the antecedent test, in probe order.
    pub passing: Vec<Vec<ItemId>>,
}

/// Probe vector: antecedent columns one-hot, every other column uniform.
pub fn build_test_vector(schema: &OneHotSchema, antecedent: &[ItemId]) -> Result<Vec<f64>> {
    let mut x = uniform_vector(schema);
    mark(schema, &mut x, antecedent)?;
    Ok(x)
}

fn uniform_vector(schema: &OneHotSchema) -> Vec<f64> {
    let mut x = vec![0.0; schema.total_features()];
    for span in schema.spans() {
        let share = 1.0 / span.len() as f64;
        x[span.clone()].fill(share);
    }
    x
}

fn mark(schema: &OneHotSchema, x: &mut [f64], antecedent: &[ItemId]) -> Result<()> {
    let mut owner: Vec<Option<ItemId>> = vec![None; schema.n_columns()];
    for &item in antecedent {
        if item >= schema.total_features() {
            return Err(Error::DimensionMismatch {
                expected: schema.total_features(),
                found: item,
                context: "antecedent item outside the schema",
            });
        }
        let c = schema.column_of(item);
        if let Some(first) = owner[c] {
            return Err(Error::ColumnConflict {
                column: schema.columns()[c].clone(),
                first,
                second: item,
            });
        }
        owner[c] = Some(item);
        let span = schema.span(c);
        x[span].fill(0.0);
        x[item] = 1.0;
    }
    Ok(())
}

/// Index of the largest entry; the lowest index wins ties.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

struct Extractor<'a> {
    schema: &'a OneHotSchema,
    prober: Option<Box<dyn Prober + 'a>>,
    cfg: &'a ExtractionConfig,
    base: Vec<f64>,
    stats: ExtractionStats,
    rules: Vec<Rule>,
}

fn passes(schema: &OneHotSchema, cfg: &ExtractionConfig, antecedent: &[ItemId], probs: &[f64]) -> bool {
    antecedent.iter().all(|&item| {
        if probs[item] < cfg.tau_a {
            return false;
        }
        if cfg.require_argmax {
            let span = schema.span(schema.column_of(item));
            return span.start + argmax(&probs[span.clone()]) == item;
        }
        true
    })
}

fn emit(
    schema: &OneHotSchema,
    cfg: &ExtractionConfig,
    antecedent: &[ItemId],
    probs: &[f64],
    rules: &mut Vec<Rule>,
) {
    for (c, span) in schema.spans().iter().enumerate() {
        if antecedent.iter().any(|&i| schema.column_of(i) == c) {
            continue;
        }
        let best = span.start + argmax(&probs[span.clone()]);
        if probs[best] >= cfg.tau_c {
            rules.push(Rule::new(antecedent.to_vec(), best));
        }
    }
}

/// Relative margin of the approximate rejection test, far above the
/// approximation error of [`exp_nonpositive`].
const FILTER_MARGIN: f64 = 1e-6;

/// `exp(d)` for `d <= 0` to about 1e-10 relative error, without branches or
/// library calls. Inputs below -60 are clamped.
#[inline(always)]
fn exp_nonpositive(d: f64) -> f64 {
    const ROUND: f64 = 6755399441055744.0; // 1.5 * 2^52
    const LN2_HI: f64 = 0.693_147_180_369_123_8;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let d = if d > -60.0 { d } else { -60.0 };
    let t = d * std::f64::consts::LOG2_E + ROUND;
    let k = t - ROUND;
    let r = (d - k * LN2_HI) - k * LN2_LO;
    // Taylor series to r^8 on |r| <= ln(2)/2
    let mut p = 1.0 / 40320.0;
    for c in [1.0 / 5040.0, 1.0 / 720.0, 1.0 / 120.0, 1.0 / 24.0, 1.0 / 6.0, 0.5, 1.0, 1.0] {
        p = p * r + c;
    }
    // the low mantissa bits of t hold k
    let scale = t.to_bits().wrapping_sub(ROUND.to_bits()).wrapping_add(1023) << 52;
    p * f64::from_bits(scale)
}

#[inline(always)]
fn screen_portable(x: &[f64], shift: &[f64], out: &mut [f64]) {
    for ((o, &a), &m) in out.iter_mut().zip(x).zip(shift) {
        *o = exp_nonpositive(a - m);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn screen_avx2(x: &[f64], shift: &[f64], out: &mut [f64]) {
    screen_portable(x, shift, out)
}

/// `out[i] ~= exp(x[i] - shift[i])` for `x[i] <= shift[i]`.
fn screen(x: &[f64], shift: &[f64], out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the feature was detected at runtime.
        return unsafe { screen_avx2(x, shift, out) };
    }
    screen_portable(x, shift, out)
}

/// Exact test for one span: the consequent offset whose softmax probability
/// reaches `tau_c`, with the same value and tie-breaking as
/// `softmax_inplace` followed by `argmax`.
fn confident_logit(v: &[f64], max: f64, tau_c: f64) -> Option<usize> {
    let mut sum = 0.0;
    let mut best = None;
    for (i, &x) in v.iter().enumerate() {
        let e = if x == max { 1.0 } else { (x - max).exp() };
        if e == 1.0 && best.is_none() {
            best = Some(i);
        }
        sum += e;
    }
    let best = best?;
    (1.0 / sum >= tau_c).then_some(best)
}

/// Per-row buffers for [`emit_logits`].
#[derive(Default)]
struct Screen {
    shift: Vec<f64>,
    approx: Vec<f64>,
}

/// `emit` on raw logits. Spans are screened with an approximate softmax
/// first; only those that could reach `tau_c` are evaluated exactly.
fn emit_logits(
    schema: &OneHotSchema,
    cfg: &ExtractionConfig,
    antecedent: &[ItemId],
    logits: &[f64],
    buf: &mut Screen,
    rules: &mut Vec<Rule>,
) {
    let width = logits.len();
    buf.shift.resize(width, 0.0);
    buf.approx.resize(width, 0.0);
    for span in schema.spans() {
        let max = logits[span.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        buf.shift[span.clone()].fill(max);
    }
    screen(logits, &buf.shift, &mut buf.approx);
    let floor = cfg.tau_c * (1.0 - FILTER_MARGIN);
    let own: Vec<usize> = antecedent.iter().map(|&i| schema.column_of(i)).collect();
    for (c, span) in schema.spans().iter().enumerate() {
        let sum: f64 = buf.approx[span.clone()].iter().sum();
        // NaN sums fall through to the exact test
        if 1.0 / sum < floor || own.contains(&c) {
            continue;
        }
        let v = &logits[span.clone()];
        if let Some(k) = confident_logit(v, buf.shift[span.start], cfg.tau_c) {
            rules.push(Rule::new(antecedent.to_vec(), span.start + k));
        }
    }
}

impl Extractor<'_> {
    /// Probes candidates; returns the ones passing the antecedent test.
    fn probe_all<R: Reconstructor + ?Sized>(
        &mut self,
        recon: &R,
        candidates: &[Vec<ItemId>],
    ) -> Result<Vec<Vec<ItemId>>> {
        let (schema, cfg) = (self.schema, self.cfg);
        let mut passing = Vec::new();
        if let Some(prober) = self.prober.as_mut() {
            let rules = &mut self.rules;
            let mut buf = Screen::default();
            prober.probe(
                candidates,
                &mut |cand, probs| passes(schema, cfg, cand, probs),
                &mut |cand, logits| {
                    emit_logits(schema, cfg, cand, logits, &mut buf, rules);
                    passing.push(cand.to_vec());
                },
            );
            self.stats.probes += candidates.len();
            self.stats.passing.extend(passing.iter().cloned());
            return Ok(passing);
        }
        let width = schema.total_features();
        for chunk in candidates.chunks(cfg.probe_batch) {
            let mut probes = Matrix::zeros(chunk.len(), width);
            for (r, cand) in chunk.iter().enumerate() {
                let row = probes.row_mut(r);
                row.copy_from_slice(&self.base);
                mark(schema, row, cand)?;
            }
            let out = recon.reconstruct_batch(&probes);
            self.stats.probes += chunk.len();
            for (r, cand) in chunk.iter().enumerate() {
                let probs = out.row(r);
                if passes(schema, cfg, cand, probs) {
                    emit(schema, cfg, cand, probs, &mut self.rules);
                    self.stats.passing.push(cand.clone());
                    passing.push(cand.clone());
                }
            }
        }
        Ok(passing)
    }
}

/// Column-respecting `k`-combinations of `items` (sorted), lexicographic.
fn combinations(schema: &OneHotSchema, items: &[ItemId], k: usize) -> Vec<Vec<ItemId>> {
    fn rec(
        schema: &OneHotSchema,
        items: &[ItemId],
        k: usize,
        start: usize,
        cur: &mut Vec<ItemId>,
        out: &mut Vec<Vec<ItemId>>,
    ) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            let c = schema.column_of(items[i]);
            if cur.iter().any(|&j| schema.column_of(j) == c) {
                continue;
            }
            cur.push(items[i]);
            rec(schema, items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(schema, items, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Extracts rules; support and confidence are left at zero for the
/// caller to measure against data.
pub fn extract_rules<R: Reconstructor + ?Sized>(
    recon: &R,
    schema: &OneHotSchema,
    cfg: &ExtractionConfig,
) -> Result<Vec<Rule>> {
    extract_rules_with_stats(recon, schema, cfg).map(|(rules, _)| rules)
}

pub fn extract_rules_with_stats<R: Reconstructor + ?Sized>(
    recon: &R,
    schema: &OneHotSchema,
    cfg: &ExtractionConfig,
) -> Result<(Vec<Rule>, ExtractionStats)> {
    cfg.validate()?;
    if recon.input_dim() != schema.total_features() {
        return Err(Error::DimensionMismatch {
            expected: schema.total_features(),
            found: recon.input_dim(),
            context: "reconstructor width vs schema",
        });
    }
    let singles: Vec<Vec<ItemId>> = (0..schema.total_features())
        .filter(|i| cfg.item_constraints.as_ref().is_none_or(|set| set.contains(i)))
        .map(|i| vec![i])
        .collect();

    let mut ex = Extractor {
        schema,
        prober: recon.prober(schema),
        cfg,
        base: uniform_vector(schema),
        stats: ExtractionStats::default(),
        rules: Vec::new(),
    };
    let survivors: Vec<ItemId> = ex
        .probe_all(recon, &singles)?
        .into_iter()
        .map(|c| c[0])
        .collect();
    for k in 2..=cfg.max_antecedents {
        let candidates = combinations(schema, &survivors, k);
        if candidates.is_empty() {
            break;
        }
        ex.probe_all(recon, &candidates)?;
    }
    let mut rules = ex.rules;
    rules.sort_unstable();
    rules.dedup();
    Ok((rules, ex.stats))
}

/// Upper bound on the probes for `max_antecedents`: all column-respecting
/// combinations of size `1..=a`.
pub fn probe_bound(schema: &OneHotSchema, max_antecedents: usize) -> u128 {
    // Elementary symmetric polynomials of the column sizes.
    let mut e = vec![0u128; max_antecedents + 1];
    e[0] = 1;
    for span in schema.spans() {
        let k = span.len() as u128;
        for j in (1..=max_antecedents).rev() {
            e[j] += e[j - 1] * k;
        }
    }
    e[1..].iter().sum()
}

#[cfg(test)]
mod tests {
    use std::cell::RefCell;

    use super::*;

    fn schema_ab() -> OneHotSchema {
        OneHotSchema::new(
            vec!["A".into(), "B".into()],
            vec![vec!["a1".into(), "a2".into()], vec!["b1".into(), "b2".into()]],
        )
        .unwrap()
    }

    /// Answers probes from a table keyed by the marked items; anything
    /// else reconstructs as uniform. Records every probe.
    struct Stub {
        schema: OneHotSchema,
        answers: Vec<(Vec<ItemId>, Vec<f64>)>,
        seen: RefCell<Vec<Vec<ItemId>>>,
    }

    impl Stub {
        fn new(schema: OneHotSchema, answers: Vec<(Vec<ItemId>, Vec<f64>)>) -> Self {
            Stub {
                schema,
                answers,
                seen: RefCell::new(Vec::new()),
            }
        }

        fn marked(&self, x: &[f64]) -> Vec<ItemId> {
            self.schema
                .spans()
                .iter()
                .filter(|s| s.len() > 1)
                .flat_map(|s| s.clone().filter(|&i| x[i] == 1.0))
                .collect()
        }
    }

    impl Reconstructor for Stub {
        fn input_dim(&self) -> usize {
            self.schema.total_features()
        }

        fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
            let key = self.marked(x);
            self.seen.borrow_mut().push(key.clone());
            self.answers
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| v.clone())
                .unwrap_or_else(|| uniform_vector(&self.schema))
        }
    }

    #[test]
    fn test_vectors() {
        let schema = OneHotSchema::new(
            vec!["A".into(), "B".into()],
            vec![
                vec!["a1".into(), "a2".into()],
                vec!["b1".into(), "b2".into(), "b3".into()],
            ],
        )
        .unwrap();
        let third = 1.0 / 3.0;
        assert_eq!(build_test_vector(&schema, &[0]).unwrap(), [1.0, 0.0, third, third, third]);
        assert_eq!(build_test_vector(&schema, &[]).unwrap(), [0.5, 0.5, third, third, third]);
        assert_eq!(build_test_vector(&schema, &[0, 3]).unwrap(), [1.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(
            build_test_vector(&schema, &[0, 1]),
            Err(Error::ColumnConflict { .. })
        ));
    }

    #[test]
    fn stub_rule_is_emitted() {
        let stub = Stub::new(schema_ab(), vec![(vec![0], vec![0.9, 0.1, 0.95, 0.05])]);
        let rules = extract_rules(&stub, &schema_ab(), &ExtractionConfig::default()).unwrap();
        assert_eq!(rules, vec![Rule::new(vec![0], 2)]);
    }

    #[test]
    fn uniform_stub_yields_nothing() {
        let stub = Stub::new(schema_ab(), vec![]);
        assert!(extract_rules(&stub, &schema_ab(), &ExtractionConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn failing_single_prunes_its_supersets() {
        let stub = Stub::new(
            schema_ab(),
            vec![
                (vec![0], vec![0.4, 0.6, 0.95, 0.05]),
                (vec![2], vec![0.5, 0.5, 0.9, 0.1]),
            ],
        );
        let (rules, stats) =
            extract_rules_with_stats(&stub, &schema_ab(), &ExtractionConfig::default()).unwrap();
        assert!(rules.iter().all(|r| !r.antecedent.contains(&0)));
        let seen = stub.seen.borrow();
        assert!(seen.iter().all(|p| p.len() < 2 || !p.contains(&0)), "{seen:?}");
        // a2 and b2 reconstruct uniformly (0.5 >= tau_a), b1 passes: three
        // survivors, and only the two column-respecting pairs without a1.
        assert_eq!(stats.probes, 4 + 2);
        assert!(seen.contains(&vec![1, 2]));
    }

    #[test]
    fn constraints_restrict_antecedents() {
        let stub = Stub::new(
            schema_ab(),
            vec![
                (vec![0], vec![0.9, 0.1, 0.95, 0.05]),
                (vec![2], vec![0.85, 0.15, 0.9, 0.1]),
            ],
        );
        let cfg = ExtractionConfig {
            item_constraints: Some([2].into_iter().collect()),
            ..ExtractionConfig::default()
        };
        let rules = extract_rules(&stub, &schema_ab(), &cfg).unwrap();
        assert_eq!(rules, vec![Rule::new(vec![2], 0)]);
    }

    #[test]
    fn batched_and_single_probing_agree() {
        let schema = OneHotSchema::new(
            (0..6).map(|c| format!("c{c}")).collect(),
            vec![vec!["x".into(), "y".into(), "z".into()]; 6],
        )
        .unwrap();
        let model = AutoencoderModel::for_schema(&schema, &[8, 3], 4).unwrap();
        let mut cfg = ExtractionConfig {
            tau_c: 0.34,
            tau_a: 0.3,
            ..ExtractionConfig::default()
        };
        let batched = extract_rules(&model, &schema, &cfg).unwrap();
        cfg.probe_batch = 1;
        let single = extract_rules(&model, &schema, &cfg).unwrap();
        assert_eq!(batched, single);
        let x = build_test_vector(&schema, &[0, 4]).unwrap();
        let probes = Matrix::from_rows(&[&uniform_vector(&schema), &x]);
        assert_eq!(model.reconstruct_batch(&probes).row(1), model.reconstruct(&x).as_slice());
    }

    /// Hides the model's prober so extraction takes the generic path.
    struct Plain<'a>(&'a AutoencoderModel);

    impl Reconstructor for Plain<'_> {
        fn input_dim(&self) -> usize {
            self.0.input_dim()
        }

        fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
            self.0.forward(x)
        }
    }

    #[test]
    fn model_prober_matches_forward() {
        let schema = OneHotSchema::new(
            (0..7).map(|c| format!("c{c}")).collect(),
            (0..7).map(|c| (0..2 + c % 3).map(|k| format!("v{k}")).collect()).collect(),
        )
        .unwrap();
        let model = AutoencoderModel::for_schema(&schema, &[9, 4], 12).unwrap();
        let mut prober = model.prober(&schema).unwrap();
        let candidates: Vec<Vec<ItemId>> = (0..schema.total_features())
            .map(|i| vec![i])
            .chain([vec![3, 9], vec![1, 5, 14], vec![0, 2]])
            .collect();
        let mut seen = 0;
        prober.probe(&candidates, &mut |_, _| true, &mut |cand, logits| {
            seen += 1;
            let mut probs = logits.to_vec();
            for span in schema.spans() {
                softmax_inplace(&mut probs[span.clone()]);
            }
            let expected = model.forward(&build_test_vector(&schema, cand).unwrap());
            for (a, b) in probs.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12, "{cand:?}: {a} vs {b}");
            }
        });
        assert_eq!(seen, candidates.len());
        let cfg = ExtractionConfig {
            tau_a: 0.3,
            tau_c: 0.4,
            max_antecedents: 3,
            ..ExtractionConfig::default()
        };
        let (fast, fast_stats) = extract_rules_with_stats(&model, &schema, &cfg).unwrap();
        let (slow, slow_stats) = extract_rules_with_stats(&Plain(&model), &schema, &cfg).unwrap();
        assert_eq!(fast, slow);
        assert_eq!(fast_stats, slow_stats);

        // sharpened outputs so that high thresholds emit rules
        let mut layers = model.layers().to_vec();
        layers.last_mut().unwrap().weight.map_inplace(|w| 12.0 * w);
        let sharp = AutoencoderModel::from_layers(layers, model.spans().to_vec()).unwrap();
        let mut emitted = 0;
        for tau_c in [0.6, 0.8, 0.95, 1.0] {
            let cfg = ExtractionConfig { tau_a: 0.2, tau_c, max_antecedents: 2, ..ExtractionConfig::default() };
            let (fast, fast_stats) = extract_rules_with_stats(&sharp, &schema, &cfg).unwrap();
            let (slow, slow_stats) = extract_rules_with_stats(&Plain(&sharp), &schema, &cfg).unwrap();
            assert_eq!(fast, slow, "tau_c {tau_c}");
            assert_eq!(fast_stats, slow_stats);
            if tau_c >= 0.8 {
                emitted += fast.len();
            }
        }
        assert!(emitted > 0);
    }

    #[test]
    fn approximate_exp_is_close() {
        for i in 0..=6000 {
            let d = -(i as f64) * 0.01;
            let (a, e) = (exp_nonpositive(d), d.exp());
            assert!((a - e).abs() <= 1e-9 * e, "{d}: {a} vs {e}");
        }
        assert_eq!(exp_nonpositive(0.0), 1.0);
        assert!(exp_nonpositive(-1e4) < 1e-25);
    }

    #[test]
    fn dimension_mismatch() {
        let model = AutoencoderModel::init_xavier(&[3, 2], vec![0..3], 0).unwrap();
        assert!(matches!(
            extract_rules(&model, &schema_ab(), &ExtractionConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn probe_bound_counts_combinations() {
        // columns of sizes 2 and 2: 4 singles + 4 pairs
        assert_eq!(probe_bound(&schema_ab(), 2), 8);
        assert_eq!(probe_bound(&schema_ab(), 1), 4);
    }
}
