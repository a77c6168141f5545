use std::fs::File;
use std::io::{self, BufReader, BufWriter};
use std::path::{Path, PathBuf};

use aerial_core::bench::{
    bench_finetune, bench_scalability, finetune_bench_config, generate_synthetic, run_aerial,
    run_miner, write_records, AerialConfig, Algorithm, ScalabilityConfig, Variant,
};
use aerial_core::finetune::{load_embeddings, synthetic_embeddings};
use aerial_core::metrics::annotate;
use aerial_core::nn::save_checkpoint;
use aerial_core::rule::{read_jsonl, write_jsonl};
use aerial_core::tabular::{
    dataset_transactions, load_csv, load_numeric_csv, one_hot_encode, zscore_discretize,
};
use aerial_core::{evaluate_rules, Dataset, Miner, OneHotSchema, Rule, Strategy};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aerial", version, about = "Association rule mining with denoising autoencoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bin numeric columns into low/medium/high by z-score
    Discretize {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        cutoff: f64,
    },
    /// Write a seeded synthetic categorical table
    Generate {
        #[arg(long, default_value_t = 100)]
        columns: usize,
        #[arg(long, default_value_t = 50)]
        rows: usize,
        #[arg(long, default_value_t = 3)]
        categories: usize,
        #[arg(long, default_value_t = 0.7)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Mine rules with Aerial+ or an algorithmic baseline
    Mine(MineArgs),
    /// Train a fine-tuned Aerial+ variant and extract its rules
    Finetune(FinetuneArgs),
    #[command(subcommand)]
    Embed(EmbedCommand),
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Quality report of a rules file against a dataset
    Metrics { rules: PathBuf, data: PathBuf },
}

#[derive(Subcommand)]
enum EmbedCommand {
    /// Seeded random-projection embeddings for a dataset
    Synth {
        data: PathBuf,
        #[arg(long = "d-e")]
        d_e: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Execution time against column count
    Scalability {
        data: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [10, 25, 50, 100, 150])]
        columns: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [Miner::FpGrowth, Miner::Eclat])]
        algorithms: Vec<Miner>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Runs per algorithm and grid point; the fastest is reported
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long)]
        shuffle_columns: Option<u64>,
        #[arg(long, default_value_t = 0.1)]
        support_floor: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Aerial+ against its fine-tuned variants over several seeds
    Finetune {
        data: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = 10)]
        runs: u64,
        #[arg(long, value_delimiter = ',', default_values_t = [Algorithm::Aerial, Algorithm::AerialWi, Algorithm::AerialDl])]
        algorithms: Vec<Algorithm>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long, default_value_t = 2)]
    antecedents: usize,
    #[arg(long = "tau-a", default_value_t = 0.5)]
    tau_a: f64,
    #[arg(long = "tau-c", default_value_t = 0.8)]
    tau_c: f64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long = "batch-size", default_value_t = 2)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rules file; stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Save the trained autoencoder weights here
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl ExtractArgs {
    fn config(&self) -> AerialConfig {
        let mut cfg = AerialConfig::default().with_seed(self.seed);
        cfg.train.epochs = self.epochs;
        cfg.train.batch_size = self.batch_size;
        cfg.extraction.max_antecedents = self.antecedents;
        cfg.extraction.tau_a = self.tau_a;
        cfg.extraction.tau_c = self.tau_c;
        cfg
    }
}

#[derive(Args)]
struct MineArgs {
    data: PathBuf,
    #[arg(long, default_value = "aerial")]
    algorithm: String,
    #[command(flatten)]
    common: ExtractArgs,
    /// Required by the algorithmic miners
    #[arg(long = "min-support")]
    min_support: Option<f64>,
    #[arg(long = "min-conf", default_value_t = 0.8)]
    min_conf: f64,
}

#[derive(Args)]
struct FinetuneArgs {
    data: PathBuf,
    #[arg(long)]
    strategy: Strategy,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long = "lambda-proj", default_value_t = 1.0)]
    lambda_proj: f64,
    #[command(flatten)]
    common: ExtractArgs,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_rules(
    out: Option<&Path>,
    rules: &[Rule],
    schema: &OneHotSchema,
    source: Option<&str>,
) -> Result<()> {
    match out {
        Some(path) => write_jsonl(create(path)?, rules, schema, source)?,
        None => write_jsonl(io::stdout().lock(), rules, schema, source)?,
    }
    Ok(())
}

/// Prints the quality report when the rules went to a file.
fn report(ds: &Dataset, rules: &[Rule], secs: f64, args: &ExtractArgs) -> Result<()> {
    log::info!("{} rules in {secs:.3}s", rules.len());
    if args.output.is_some() {
        let db = dataset_transactions(ds)?;
        println!("{}", serde_json::to_string(&evaluate_rules(rules, &db, secs)?)?);
    }
    Ok(())
}

fn aerial(ds: &Dataset, cfg: &AerialConfig, variant: Variant<'_>, args: &ExtractArgs) -> Result<()> {
    let run = run_aerial(ds, cfg, variant)?;
    if let Some(path) = &args.checkpoint {
        save_checkpoint(&run.model, path)?;
    }
    write_rules(args.output.as_deref(), &run.rules, &run.schema, Some(variant.algorithm().name()))?;
    report(ds, &run.rules, run.exec_seconds, args)
}

fn mine(args: &MineArgs) -> Result<()> {
    let ds = load_csv(&args.data)?;
    let common = &args.common;
    if args.algorithm == "aerial" {
        return aerial(&ds, &common.config(), Variant::Plain, common);
    }
    let miner: Miner = args.algorithm.parse()?;
    let Some(min_support) = args.min_support else {
        bail!("--min-support is required for {miner}");
    };
    if common.checkpoint.is_some() {
        bail!("--checkpoint only applies to aerial");
    }
    let (mut rules, db, secs) = run_miner(&ds, miner, min_support, args.min_conf, common.antecedents)?;
    annotate(&mut rules, &db);
    write_rules(common.output.as_deref(), &rules, db.schema(), None)?;
    report(&ds, &rules, secs, common)
}

fn finetune(args: &FinetuneArgs) -> Result<()> {
    let ds = load_csv(&args.data)?;
    let embeddings = load_embeddings(&args.embeddings)?;
    let mut cfg = args.common.config();
    cfg.lambda_proj = args.lambda_proj;
    let variant = match args.strategy {
        Strategy::Wi => Variant::Wi(&embeddings),
        Strategy::Dl => Variant::Dl(&embeddings),
    };
    aerial(&ds, &cfg, variant, &args.common)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn bench(cmd: &BenchCommand) -> Result<()> {
    match cmd {
        BenchCommand::Scalability {
            data,
            columns,
            algorithms,
            seed,
            repeats,
            shuffle_columns,
            support_floor,
            output,
        } => {
            let ds = load_csv(data)?;
            let cfg = ScalabilityConfig {
                dataset: dataset_name(data),
                support_floor: *support_floor,
                shuffle_columns: *shuffle_columns,
                repeats: *repeats,
                ..ScalabilityConfig::default()
            };
            let records = bench_scalability(&ds, columns, algorithms, *seed, &cfg)?;
            write_records(create(output)?, &records)?;
        }
        BenchCommand::Finetune {
            data,
            embeddings,
            runs,
            algorithms,
            output,
        } => {
            let ds = load_csv(data)?;
            let e = load_embeddings(embeddings)?;
            let seeds: Vec<u64> = (0..*runs).collect();
            let records = bench_finetune(
                &dataset_name(data),
                &ds,
                &e,
                algorithms,
                &seeds,
                &finetune_bench_config(),
            )?;
            write_records(create(output)?, &records)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Discretize {
            input,
            output,
            cutoff,
        } => {
            let table = load_numeric_csv(&input)?;
            zscore_discretize(&table, cutoff)?.save_csv(&output)?;
        }
        Command::Generate {
            columns,
            rows,
            categories,
            density,
            seed,
            output,
        } => generate_synthetic(columns, rows, categories, density, seed)?.save_csv(&output)?,
        Command::Mine(args) => mine(&args)?,
        Command::Finetune(args) => finetune(&args)?,
        Command::Embed(EmbedCommand::Synth {
            data,
            d_e,
            seed,
            output,
        }) => {
            let (_, matrix) = one_hot_encode(&load_csv(&data)?)?;
            synthetic_embeddings(&matrix, d_e, seed)?.save(&output)?;
        }
        Command::Bench(cmd) => bench(&cmd)?,
        Command::Metrics { rules, data } => {
            let ds = load_csv(&data)?;
            let db = dataset_transactions(&ds)?;
            let file = File::open(&rules).with_context(|| format!("cannot open {}", rules.display()))?;
            let rules = read_jsonl(BufReader::new(file), db.schema())?;
            println!("{}", serde_json::to_string_pretty(&evaluate_rules(&rules, &db, 0.0)?)?);
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
