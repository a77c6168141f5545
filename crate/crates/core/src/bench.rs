//! Synthetic data and the timed comparison protocol between Aerial+ and the
//! algorithmic miners.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{extract_rules, ExtractionConfig};
use crate::finetune::{finetune_dl, finetune_wi, EmbeddingMatrix, FinetuneConfig};
use crate::metrics::{annotate, evaluate_rules, RuleMetricsReport};
use crate::miners::{mine_rules, Miner};
use crate::nn::{default_hidden, train, AutoencoderModel, TrainConfig, TrainReport};
use crate::rule::Rule;
use crate::tabular::{dataset_transactions, one_hot_encode, Dataset, OneHotSchema, TransactionDb};

/// Columns per planted block in [`generate_synthetic`].
pub const SYNTHETIC_GROUP: usize = 5;

/// Seeded categorical table with planted associations.
///
/// Columns are split into consecutive blocks of [`SYNTHETIC_GROUP`]. Every
/// column has a pattern category. For each row and block, with probability
/// `density` the whole block takes its pattern categories; otherwise each
/// cell is drawn uniformly.
pub fn generate_synthetic(
    columns: usize,
    rows: usize,
    categories_per_column: usize,
    density: f64,
    seed: u64,
) -> Result<Dataset> {
    if columns == 0 || rows == 0 || categories_per_column == 0 {
        return Err(Error::InvalidConfig(
            "columns, rows and categories must all be >= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidConfig(format!("density must lie in [0, 1], got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pattern: Vec<usize> = (0..columns)
        .map(|_| rng.random_range(0..categories_per_column))
        .collect();
    let mut coded = vec![vec![0usize; columns]; rows];
    for row in coded.iter_mut() {
        for start in (0..columns).step_by(SYNTHETIC_GROUP) {
            let block = start..(start + SYNTHETIC_GROUP).min(columns);
            if rng.random::<f64>() < density {
                for c in block {
                    row[c] = pattern[c];
                }
            } else {
                for c in block {
                    row[c] = rng.random_range(0..categories_per_column);
                }
            }
        }
    }
    let names = (1..=columns).map(|c| format!("col{c}")).collect();
    let categories = vec![(0..categories_per_column).map(|k| format!("v{k}")).collect(); columns];
    Dataset::from_codes(names, categories, coded)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Aerial,
    AerialWi,
    AerialDl,
    #[serde(rename = "fpgrowth")]
    FpGrowth,
    Eclat,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Aerial => "aerial",
            Algorithm::AerialWi => "aerial_wi",
            Algorithm::AerialDl => "aerial_dl",
            Algorithm::FpGrowth => "fpgrowth",
            Algorithm::Eclat => "eclat",
        }
    }

    pub fn miner(self) -> Option<Miner> {
        match self {
            Algorithm::FpGrowth => Some(Miner::FpGrowth),
            Algorithm::Eclat => Some(Miner::Eclat),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aerial" => Ok(Algorithm::Aerial),
            "aerial_wi" => Ok(Algorithm::AerialWi),
            "aerial_dl" => Ok(Algorithm::AerialDl),
            "fpgrowth" => Ok(Algorithm::FpGrowth),
            "eclat" => Ok(Algorithm::Eclat),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Settings of one Aerial+ run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AerialConfig {
    pub train: TrainConfig,
    /// `None` uses [`default_hidden`].
    pub hidden: Option<Vec<usize>>,
    pub extraction: ExtractionConfig,
    /// Projection encoder settings for the fine-tuned variants.
    pub projection: TrainConfig,
    pub lambda_proj: f64,
}

impl Default for AerialConfig {
    fn default() -> Self {
        AerialConfig {
            train: TrainConfig::default(),
            hidden: None,
            extraction: ExtractionConfig::default(),
            projection: TrainConfig::projection(),
            lambda_proj: 1.0,
        }
    }
}

impl AerialConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = seed;
        self.projection.seed = seed;
        self
    }

    fn finetune(&self) -> FinetuneConfig {
        FinetuneConfig {
            autoencoder: self.train.clone(),
            projection: self.projection.clone(),
            hidden: self.hidden.clone(),
            lambda_proj: self.lambda_proj,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Variant<'a> {
    Plain,
    Wi(&'a EmbeddingMatrix),
    Dl(&'a EmbeddingMatrix),
}

impl Variant<'_> {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Variant::Plain => Algorithm::Aerial,
            Variant::Wi(_) => Algorithm::AerialWi,
            Variant::Dl(_) => Algorithm::AerialDl,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AerialRun {
    pub schema: OneHotSchema,
    pub model: AutoencoderModel,
    /// Rules with support, confidence and Zhang's metric filled in.
    pub rules: Vec<Rule>,
    pub train_report: Option<TrainReport>,
    /// Encoding, (fine-)tuning, training and extraction.
    pub exec_seconds: f64,
}

/// Encodes, trains (or fine-tunes) and extracts. Rule measurement against
/// the data happens after the clock stops.
pub fn run_aerial(ds: &Dataset, cfg: &AerialConfig, variant: Variant<'_>) -> Result<AerialRun> {
    let start = Instant::now();
    let (schema, data) = one_hot_encode(ds)?;
    let (model, train_report) = match variant {
        Variant::Plain => {
            let hidden = cfg.hidden.clone().unwrap_or_else(|| default_hidden(data.width()));
            let initial = AutoencoderModel::for_schema(&schema, &hidden, cfg.train.seed)?;
            let out = train(&initial, &data, &cfg.train)?;
            (out.model, Some(out.report))
        }
        Variant::Wi(e) => {
            let out = finetune_wi(&data, e, &cfg.finetune())?;
            (out.model, out.report)
        }
        Variant::Dl(e) => {
            let out = finetune_dl(&data, e, &cfg.finetune())?;
            (out.model, out.report)
        }
    };
    let mut rules = extract_rules(&model, &schema, &cfg.extraction)?;
    let exec_seconds = start.elapsed().as_secs_f64();
    let db = dataset_transactions(ds)?;
    annotate(&mut rules, &db);
    Ok(AerialRun {
        schema,
        model,
        rules,
        train_report,
        exec_seconds,
    })
}

/// Timed miner run: transaction conversion, mining and rule generation.
pub fn run_miner(
    ds: &Dataset,
    miner: Miner,
    min_support: f64,
    min_conf: f64,
    max_antecedents: usize,
) -> Result<(Vec<Rule>, TransactionDb, f64)> {
    let start = Instant::now();
    let db = dataset_transactions(ds)?;
    let rules = mine_rules(miner, &db, min_support, min_conf, max_antecedents)?;
    let secs = start.elapsed().as_secs_f64();
    Ok((rules, db, secs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub columns: usize,
    pub rows: usize,
    pub exec_seconds: f64,
    pub report: RuleMetricsReport,
    /// Thresholds at this grid point fell back to the support floor.
    pub flagged: bool,
    pub seed: Option<u64>,
}

/// One line of the benchmark CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub columns: usize,
    pub rows: usize,
    pub exec_seconds: f64,
    pub rule_count: usize,
    pub avg_coverage: f64,
    pub avg_support: f64,
    pub avg_confidence: f64,
    pub total_data_coverage: f64,
    pub avg_zhang: f64,
}

impl From<&BenchmarkRecord> for BenchmarkRow {
    fn from(r: &BenchmarkRecord) -> Self {
        BenchmarkRow {
            dataset: r.dataset.clone(),
            algorithm: r.algorithm,
            columns: r.columns,
            rows: r.rows,
            exec_seconds: r.exec_seconds,
            rule_count: r.report.rule_count,
            avg_coverage: r.report.avg_coverage,
            avg_support: r.report.avg_support,
            avg_confidence: r.report.avg_confidence,
            total_data_coverage: r.report.total_data_coverage,
            avg_zhang: r.report.avg_zhang,
        }
    }
}

pub fn write_records<W: std::io::Write>(out: W, records: &[BenchmarkRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer.serialize(BenchmarkRow::from(r))?;
    }
    writer.flush().map_err(|e| Error::io("<benchmark csv>", e))
}

pub fn read_rows<R: std::io::Read>(input: R) -> Result<Vec<BenchmarkRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalabilityConfig {
    pub dataset: String,
    pub aerial: AerialConfig,
    pub min_conf: f64,
    pub max_antecedents: usize,
    /// Support threshold used when Aerial+ finds no rules.
    pub support_floor: f64,
    /// Shuffles the column order (seeded) before taking prefixes.
    pub shuffle_columns: Option<u64>,
    /// Identical runs per algorithm and grid point; the fastest is kept.
    pub repeats: usize,
}

impl Default for ScalabilityConfig {
    fn default() -> Self {
        ScalabilityConfig {
            dataset: "dataset".into(),
            aerial: AerialConfig::default(),
            min_conf: 0.8,
            max_antecedents: 2,
            support_floor: 0.1,
            shuffle_columns: None,
            repeats: 1,
        }
    }
}

/// Half the mean support of Aerial+'s rules, or `floor` (flagged) when it
/// found none.
pub fn derived_min_support(rules: &[Rule], floor: f64) -> (f64, bool) {
    if rules.is_empty() {
        return (floor, true);
    }
    let mean = rules.iter().map(|r| r.support).sum::<f64>() / rules.len() as f64;
    if mean > 0.0 {
        (0.5 * mean, false)
    } else {
        (floor, true)
    }
}

/// For each column count, runs Aerial+ on the column prefix, derives the
/// miners' support threshold from its rules and runs every miner on the
/// same slice. Runs are sequential.
pub fn bench_scalability(
    ds: &Dataset,
    column_grid: &[usize],
    miners: &[Miner],
    seed: u64,
    cfg: &ScalabilityConfig,
) -> Result<Vec<BenchmarkRecord>> {
    if column_grid.is_empty() {
        return Err(Error::InvalidConfig("empty column grid".into()));
    }
    if column_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("column grid must be strictly ascending".into()));
    }
    if let Some(&c) = column_grid.iter().find(|&&c| c == 0 || c > ds.n_columns()) {
        return Err(Error::InvalidConfig(format!(
            "grid point {c} outside 1..={}",
            ds.n_columns()
        )));
    }
    if cfg.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..ds.n_columns()).collect();
    if let Some(s) = cfg.shuffle_columns {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(s));
    }
    let aerial_cfg = cfg.aerial.clone().with_seed(seed);
    let mut records = Vec::new();
    for &c in column_grid {
        let slice = ds.select_columns(&order[..c]);
        let mut run = run_aerial(&slice, &aerial_cfg, Variant::Plain)?;
        for _ in 1..cfg.repeats {
            let again = run_aerial(&slice, &aerial_cfg, Variant::Plain)?;
            run.exec_seconds = run.exec_seconds.min(again.exec_seconds);
        }
        let db = dataset_transactions(&slice)?;
        let (min_support, flagged) = derived_min_support(&run.rules, cfg.support_floor);
        if flagged {
            log::warn!("no Aerial+ rules at {c} columns; min_support falls back to {min_support}");
        }
        log::info!(
            "{c} columns: aerial {} rules in {:.3}s, min_support {min_support:.4}",
            run.rules.len(),
            run.exec_seconds
        );
        let record = |algorithm, secs, report| BenchmarkRecord {
            dataset: cfg.dataset.clone(),
            algorithm,
            columns: c,
            rows: slice.n_rows(),
            exec_seconds: secs,
            report,
            flagged,
            seed: Some(seed),
        };
        records.push(record(
            Algorithm::Aerial,
            run.exec_seconds,
            evaluate_rules(&run.rules, &db, run.exec_seconds)?,
        ));
        for &miner in miners {
            let (rules, db, mut secs) =
                run_miner(&slice, miner, min_support, cfg.min_conf, cfg.max_antecedents)?;
            for _ in 1..cfg.repeats {
                let (_, _, again) =
                    run_miner(&slice, miner, min_support, cfg.min_conf, cfg.max_antecedents)?;
                secs = secs.min(again);
            }
            let algorithm = match miner {
                Miner::FpGrowth => Algorithm::FpGrowth,
                Miner::Eclat => Algorithm::Eclat,
                Miner::BruteForce => {
                    return Err(Error::InvalidConfig("bruteforce is not a benchmark baseline".into()))
                }
            };
            log::info!("{c} columns: {miner} {} rules in {secs:.3}s", rules.len());
            records.push(record(algorithm, secs, evaluate_rules(&rules, &db, secs)?));
        }
    }
    Ok(records)
}

/// Repeats each variant once per seed on the same data.
pub fn bench_finetune(
    dataset: &str,
    ds: &Dataset,
    embeddings: &EmbeddingMatrix,
    variants: &[Algorithm],
    seeds: &[u64],
    cfg: &AerialConfig,
) -> Result<Vec<BenchmarkRecord>> {
    let db = dataset_transactions(ds)?;
    let mut records = Vec::new();
    for &seed in seeds {
        let seeded = cfg.clone().with_seed(seed);
        for &algorithm in variants {
            let variant = match algorithm {
                Algorithm::Aerial => Variant::Plain,
                Algorithm::AerialWi => Variant::Wi(embeddings),
                Algorithm::AerialDl => Variant::Dl(embeddings),
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "{other} is not an Aerial+ variant"
                    )))
                }
            };
            let run = run_aerial(ds, &seeded, variant)?;
            records.push(BenchmarkRecord {
                dataset: dataset.into(),
                algorithm,
                columns: ds.n_columns(),
                rows: ds.n_rows(),
                exec_seconds: run.exec_seconds,
                report: evaluate_rules(&run.rules, &db, run.exec_seconds)?,
                flagged: false,
                seed: Some(seed),
            });
        }
    }
    Ok(records)
}

/// Fine-tuning benchmark defaults: 25 epochs, batch 2, two antecedents.
pub fn finetune_bench_config() -> AerialConfig {
    AerialConfig {
        train: TrainConfig::default().with_epochs(25),
        ..AerialConfig::default()
    }
}
