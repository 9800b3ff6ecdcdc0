//! `dsre` command line.
//!
//! Exit codes: 0 success, 1 usage error or failed gradient check, 2 bad or
//! missing input (path or config line reported), 3 training aborted on a
//! non-finite loss.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::synthetic::{generate_synthetic, SyntheticConfig};
use crate::corpus::{load_corpus, CorpusOptions, InstanceBag, RelationSchema, DEFAULT_MAX_SENTENCE_LEN};
use crate::encoder::StaticEmbeddings;
use crate::error::Error;
use crate::model::ModelConfig;
use crate::training::{self, checkpoint, TrainConfig};
use crate::util::write_atomic;
use crate::{eval, Result};

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(name = "dsre", version, about = "Distant-supervision relation extraction with memory-network attention")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded synthetic corpus, schema, embeddings, sidecar and gold files.
    GenSynthetic(GenArgs),
    /// Train a model; writes checkpoints and metrics.csv.
    Train(TrainArgs),
    /// Score a corpus and write its precision/recall curve.
    Evaluate(EvalArgs),
    /// Print and save per-hop attention for each bag.
    InspectAttention(InspectArgs),
    /// Compare analytic and finite-difference gradients on a seeded micro-batch.
    Gradcheck(GradArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 13)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    noise_rate: f64,
    #[arg(long, default_value_t = 8)]
    relations: usize,
    #[arg(long, default_value_t = 50)]
    bags_per_relation: usize,
    #[arg(long, default_value_t = 4)]
    bag_size: usize,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 300)]
    embedding_dim: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Output directory for checkpoints and metrics.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Held-out corpus scored after every epoch.
    #[arg(long)]
    dev_corpus: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lambda_couple: Option<f64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Gold facts; defaults to the corpus labels.
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Defaults to the path recorded in the checkpoint.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// PR curve CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scoring threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// TSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFiniteLoss { .. } => 3,
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Config { .. }
        | Error::Checkpoint(_)
        | Error::InvalidInstance { .. } => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::GenSynthetic(a) => gen_synthetic(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::InspectAttention(a) => inspect(a),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn gen_synthetic(a: GenArgs) -> Result<i32> {
    let corpus = generate_synthetic(&SyntheticConfig {
        noise_rate: a.noise_rate,
        num_relations: a.relations,
        bags_per_relation: a.bags_per_relation,
        bag_size: a.bag_size,
        seed: a.seed,
        test_fraction: a.test_fraction,
        embedding_dim: a.embedding_dim,
        ..Default::default()
    })?;
    let files = corpus.write(&a.out)?;
    println!("train bags: {}  test bags: {}", corpus.train.len(), corpus.test.len());
    for p in [
        &files.train,
        &files.test,
        &files.schema,
        &files.embeddings,
        &files.sidecar,
        &files.train_gold,
        &files.test_gold,
    ] {
        println!("wrote {}", p.display());
    }
    Ok(0)
}

fn require<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument(format!("no {key} given (flag --{} or config key {key})", key.replace('_', "-"))))
}

fn train(a: TrainArgs) -> Result<i32> {
    let mut config = match &a.config {
        Some(p) => TrainConfig::load(p).map_err(|e| match e {
            Error::Config { line, message } => Error::Config {
                line,
                message: format!("{}: {message}", p.display()),
            },
            other => other,
        })?,
        None => TrainConfig::default(),
    };
    if a.corpus.is_some() {
        config.corpus = a.corpus;
    }
    if a.schema.is_some() {
        config.schema = a.schema;
    }
    if a.embeddings.is_some() {
        config.embeddings = a.embeddings;
    }
    if a.out.is_some() {
        config.output_dir = a.out;
    }
    if a.dev_corpus.is_some() {
        config.dev_corpus = a.dev_corpus;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    if let Some(l) = a.lambda_couple {
        config.lambda_couple = l;
    }
    config.validate()?;

    let opts = CorpusOptions::default();
    let bags = load_corpus(require(&config.corpus, "corpus")?, &opts)?;
    let schema = RelationSchema::load(require(&config.schema, "schema")?)?;
    let embeddings = StaticEmbeddings::load(require(&config.embeddings, "embeddings")?)?;
    let out = require(&config.output_dir, "output_dir")?.to_path_buf();
    let dev = config.dev_corpus.as_deref().map(|p| load_corpus(p, &opts)).transpose()?;

    let outcome = training::train(
        &bags,
        &schema,
        &embeddings,
        &config,
        ModelConfig::default(),
        dev.as_deref(),
        Some(&out),
    )?;
    println!("initial loss {:.6}", outcome.initial_loss);
    if let Some(last) = outcome.metrics.last() {
        println!("epoch {} loss {:.6}", last.epoch, last.train_loss);
    }
    let written = if config.epochs == 0 { "checkpoint_epoch0.ckpt" } else { "final.ckpt" };
    println!("wrote {}", out.join(written).display());
    Ok(0)
}

/// Embeddings from the flag, else from the path in the checkpoint's config.
fn embeddings_for(flag: Option<PathBuf>, snapshot: &str) -> Result<StaticEmbeddings> {
    let path = match flag {
        Some(p) => p,
        None => TrainConfig::parse(snapshot)?
            .embeddings
            .ok_or_else(|| Error::InvalidArgument("checkpoint records no embeddings path; pass --embeddings".into()))?,
    };
    StaticEmbeddings::load(&path)
}

fn load_eval_corpus(path: &Path) -> Result<Vec<InstanceBag>> {
    // capacity truncation happens (with a warning) at scoring time
    load_corpus(
        path,
        &CorpusOptions {
            max_sentence_len: DEFAULT_MAX_SENTENCE_LEN,
            memory_capacity: usize::MAX,
        },
    )
}

fn evaluate(a: EvalArgs) -> Result<i32> {
    let (model, snapshot) = checkpoint::load(&a.checkpoint)?;
    let embeddings = embeddings_for(a.embeddings, &snapshot)?;
    let bags = load_eval_corpus(&a.corpus)?;
    let gold = match &a.gold {
        Some(p) => eval::load_gold(p)?,
        None => eval::gold_from_bags(&bags),
    };
    let predictions = eval::score_corpus(&model, &bags, &embeddings, a.threads)?;
    let curve = eval::pr_curve(&predictions, &gold)?;
    if let Some(out) = &a.out {
        write_atomic(out, curve.to_csv().as_bytes())?;
    }
    println!("{}", curve.summary());
    Ok(0)
}

fn inspect(a: InspectArgs) -> Result<i32> {
    let (model, snapshot) = checkpoint::load(&a.checkpoint)?;
    let embeddings = embeddings_for(a.embeddings, &snapshot)?;
    let bags = load_eval_corpus(&a.corpus)?;
    let report = eval::attention_report(&model, &bags, &embeddings)?;
    if let Some(out) = &a.out {
        write_atomic(out, report.to_tsv().as_bytes())?;
    }
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(report.to_table().as_bytes());
    Ok(0)
}

fn gradcheck(a: GradArgs) -> Result<i32> {
    let report = training::gradcheck::run(a.seed)?;
    println!("checked {} coordinates", report.checked);
    println!("max_relative_error={:.3e}", report.max_relative_error);
    Ok(if report.max_relative_error < GRADCHECK_TOLERANCE { 0 } else { 1 })
}
