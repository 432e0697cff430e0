mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use advdoc_core::corpus::{parse_documents, LabeledDoc};
use advdoc_core::eval::{
    embed_documents, embeddings_to_tsv, format_topics, pr_curve, DEFAULT_FRACTIONS,
};
use advdoc_core::training::{load_checkpoint, save_checkpoint, train_with_callback};
use advdoc_core::verify::{self, DEFAULT_STEP, DEFAULT_TOLERANCE};
use advdoc_core::{Checkpoint, Corpus, Error, Vocabulary};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use config::{EffectiveConfig, RunConfigFile};

#[derive(Parser)]
#[command(
    name = "advdoc",
    version,
    about = "Adversarial document model: train, evaluate, inspect"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes checkpoint.bin (best by validation), metrics.jsonl and config.json.
    Train {
        /// Flat JSON run config. Required keys: vocab, labels, docs. Others default to the 20 Newsgroups setup.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed (default 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's out_dir (default: the directory holding the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrieval precision of held-out queries against a pool, as fraction<TAB>precision.
    Eval {
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Documents file searched for neighbours.
        #[arg(long)]
        pool: PathBuf,
        /// Documents file whose every line is used as a query.
        #[arg(long)]
        queries: PathBuf,
        /// Comma-separated retrieval fractions in (0, 1].
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.0002,0.001,0.002,0.005,0.01,0.02,0.05,0.1,0.2,0.5"
        )]
        fractions: Vec<f64>,
        /// Optional vocabulary file; its size must match the checkpoint.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Write the TSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Top-k words by absolute encoder weight for every hidden unit.
    Topics {
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Vocabulary file, one token per line; its size must match the checkpoint.
        #[arg(long)]
        vocab: PathBuf,
        /// Words per unit; must not exceed the vocabulary size.
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Write document representations as TSV (doc_id, label, components).
    Export {
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Documents file to embed; ids follow line order.
        #[arg(long)]
        docs: PathBuf,
        /// Destination TSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional vocabulary file; its size must match the checkpoint.
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Check every analytic gradient against central finite differences.
    Gradcheck {
        /// Number of random instances per check (seeds 0..N).
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Finite-difference step.
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        /// Largest accepted relative error.
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            let diverged = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Divergence(_))));
            ExitCode::from(if diverged { 2 } else { 1 })
        }
    }
}

fn one_line(e: &anyhow::Error) -> String {
    e.chain()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(": ")
        .replace('\n', " ")
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Train { config, seed, out } => train(&config, seed, out),
        Command::Eval {
            checkpoint,
            pool,
            queries,
            fractions,
            vocab,
            out,
        } => eval(
            &checkpoint,
            &pool,
            &queries,
            &fractions,
            vocab.as_deref(),
            out.as_deref(),
        ),
        Command::Topics {
            checkpoint,
            vocab,
            k,
        } => topics(&checkpoint, &vocab, k),
        Command::Export {
            checkpoint,
            docs,
            out,
            vocab,
        } => export(&checkpoint, &docs, &out, vocab.as_deref()),
        Command::Gradcheck {
            seeds,
            step,
            tolerance,
        } => gradcheck(seeds, step, tolerance),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn train(config_path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<ExitCode> {
    let file = RunConfigFile::load(config_path)?;
    let corpus = Corpus::parse(
        &read(&file.vocab)?,
        &read(&file.labels)?,
        &read(&file.docs)?,
    )
    .with_context(|| format!("loading corpus {}", file.docs.display()))?;
    let mut config = file.train_config(corpus.vocab_size())?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config.validate()?;
    let out_dir = out
        .or(file.out_dir.clone())
        .unwrap_or_else(|| config_path.parent().unwrap_or(Path::new(".")).to_path_buf());
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let absolute =
        |p: &Path| fs::canonicalize(p).with_context(|| format!("resolving {}", p.display()));
    let echo = EffectiveConfig {
        vocab: absolute(&file.vocab)?,
        labels: absolute(&file.labels)?,
        docs: absolute(&file.docs)?,
        out_dir: absolute(&out_dir)?,
        train: config.clone(),
    };
    let mut echo_text = serde_json::to_string_pretty(&echo)?;
    echo_text.push('\n');
    fs::write(out_dir.join("config.json"), echo_text)?;

    let metrics_path = out_dir.join("metrics.jsonl");
    let mut metrics = BufWriter::new(
        File::create(&metrics_path)
            .with_context(|| format!("creating {}", metrics_path.display()))?,
    );
    let outcome = train_with_callback(&config, &corpus, |m| {
        serde_json::to_writer(&mut metrics, m)?;
        metrics.write_all(b"\n")?;
        metrics.flush()?;
        Ok(())
    });
    metrics.flush()?;
    let outcome = outcome?;

    save_checkpoint(&outcome.best, out_dir.join("checkpoint.bin"))?;
    eprintln!(
        "trained {} epochs; best epoch {} (validation precision {})",
        outcome.last.epoch,
        outcome.best.epoch,
        outcome
            .best
            .validation_score
            .map_or("n/a".to_string(), |s| format!("{s:.4}")),
    );
    Ok(ExitCode::SUCCESS)
}

fn load(path: &Path) -> Result<Checkpoint> {
    load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn check_vocab(ckpt: &Checkpoint, vocab: Option<&Path>) -> Result<Option<Vocabulary>> {
    let Some(path) = vocab else { return Ok(None) };
    let vocab =
        Vocabulary::parse(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    if vocab.len() != ckpt.config.vocab_size {
        bail!(
            "vocabulary size mismatch: {} has {} words, checkpoint expects {}",
            path.display(),
            vocab.len(),
            ckpt.config.vocab_size
        );
    }
    Ok(Some(vocab))
}

fn load_docs(path: &Path, vocab_size: usize) -> Result<Vec<LabeledDoc>> {
    parse_documents(&read(path)?, vocab_size, None).with_context(|| {
        format!(
            "parsing {} against the checkpoint vocabulary of {vocab_size} words",
            path.display()
        )
    })
}

fn eval(
    checkpoint: &Path,
    pool: &Path,
    queries: &Path,
    fractions: &[f64],
    vocab: Option<&Path>,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let ckpt = load(checkpoint)?;
    check_vocab(&ckpt, vocab)?;
    let v = ckpt.config.vocab_size;
    let pool = embed_documents(&ckpt.dae, &load_docs(pool, v)?)?;
    let queries = embed_documents(&ckpt.dae, &load_docs(queries, v)?)?;
    let fractions = if fractions.is_empty() {
        &DEFAULT_FRACTIONS[..]
    } else {
        fractions
    };
    let tsv = pr_curve(&queries, &pool, fractions)?.to_tsv();
    match out {
        Some(path) => {
            fs::write(path, tsv).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{tsv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn topics(checkpoint: &Path, vocab: &Path, k: usize) -> Result<ExitCode> {
    let ckpt = load(checkpoint)?;
    let vocab = check_vocab(&ckpt, Some(vocab))?.expect("vocab given");
    print!("{}", format_topics(&ckpt.dae, &vocab, k)?);
    Ok(ExitCode::SUCCESS)
}

fn export(checkpoint: &Path, docs: &Path, out: &Path, vocab: Option<&Path>) -> Result<ExitCode> {
    let ckpt = load(checkpoint)?;
    check_vocab(&ckpt, vocab)?;
    let set = embed_documents(&ckpt.dae, &load_docs(docs, ckpt.config.vocab_size)?)?;
    fs::write(out, embeddings_to_tsv(&set))
        .with_context(|| format!("writing {}", out.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(seeds: u64, step: f64, tolerance: f64) -> Result<ExitCode> {
    if seeds == 0 {
        bail!("--seeds must be positive");
    }
    let reports = verify::run_suite(0..seeds, step)?;
    let mut failing = Vec::new();
    for name in verify::check_names() {
        let mine: Vec<_> = reports.iter().filter(|r| r.name == name).collect();
        let worst = mine.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
        let ok = mine.iter().all(|r| r.passed(tolerance));
        println!(
            "{name:<18} max_rel_error {worst:.3e}  {}",
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failing.push(name);
        }
    }
    if failing.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: gradient checks failed: {}", failing.join(", "));
        Ok(ExitCode::from(1))
    }
}
