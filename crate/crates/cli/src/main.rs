mod args;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use paravid::eval::{evaluate_run, medr, parse_targets, Qrels, RunFile};
use paravid::gateway::conformance::{vectors_jsonl, VECTOR_SETTINGS};
use paravid::gateway::Gateway;
use paravid::index::{EmbeddingStore, StoreKind};
use paravid::paraphrase::read_topics;
use paravid::pipeline::{
    run_fuse, run_paraphrase, run_search, run_subsample_experiment, run_verify, signif_report, CommandReport,
};

use args::Overrides;

#[derive(Debug, Parser)]
#[command(name = "paravid", version, about = "Paraphrase-expanded video search pipeline")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Metric {
    Xinfap,
    Medr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Embedding,
    Concept,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expand each topic into a bundle of paraphrases.
    Paraphrase {
        /// Topic file: `qid<TAB>text` per line.
        #[arg(long)]
        topics: PathBuf,
        /// Output directory; defaults to the configured bundle directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score paraphrases against QA pairs and mark the valid ones.
    Verify,
    /// Rank the corpus for the user query and every transformation.
    Search {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Combine search scores into the final fused run.
    Fuse {
        /// Search output directory holding `scores/`.
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a run file.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum, default_value = "xinfap")]
        metric: Metric,
        /// Judgments, required for xinfap.
        #[arg(long)]
        qrels: Option<PathBuf>,
        /// `topic video_id` targets, required for medr.
        #[arg(long)]
        targets: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired randomization test between two runs.
    Signif {
        #[arg(long)]
        run_a: PathBuf,
        #[arg(long)]
        run_b: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
    },
    /// Mean metric against the number of valid queries per transformation.
    ExperimentSubsample {
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded random store for testing.
    SynthStore {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, value_enum, default_value = "embedding")]
        kind: Kind,
        /// Vector file; ids go to `<out>.ids`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the wire-protocol conformance vectors.
    Conformance {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration.
    PrintConfig,
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
            }
            std::fs::write(path, text).with_context(|| path.display().to_string())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn summarize(command: &str, report: &CommandReport) -> u8 {
    log::info!(
        "{command}: {} topic(s), {} failure(s), {} manifest row(s)",
        report.topics,
        report.failures.len(),
        report.manifest.rows.len()
    );
    for f in &report.failures {
        eprintln!("{command}: topic {} failed: {}", f.qid, f.error);
    }
    report.exit_code() as u8
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let cfg = cli.overrides.resolve()?;
    let gateway = || Gateway::new(cfg.provider.clone()).context("provider configuration");
    match cli.command {
        Command::Paraphrase { topics, out } => {
            let topics = read_topics(&topics)?;
            let out = out.unwrap_or_else(|| cfg.paths.bundles.clone());
            let report = run_paraphrase(&cfg, &gateway()?, &topics, &out)?;
            Ok(summarize("paraphrase", &report))
        }
        Command::Verify => {
            let report = run_verify(&cfg, &gateway()?, &cfg.paths.bundles)?;
            Ok(summarize("verify", &report))
        }
        Command::Search { out } => {
            let stores = cfg.load_stores()?;
            let out = out.unwrap_or_else(|| cfg.paths.runs.clone());
            let report = run_search(&cfg, &gateway()?, &cfg.paths.bundles, &stores, &out)?;
            Ok(summarize("search", &report))
        }
        Command::Fuse { scores, out } => {
            let stores = cfg.load_stores()?;
            let scores = scores.unwrap_or_else(|| cfg.paths.runs.clone());
            let out = out.unwrap_or_else(|| scores.clone());
            let report = run_fuse(&cfg, &stores.embedding, &scores, &out)?;
            Ok(summarize("fuse", &report))
        }
        Command::Eval {
            run,
            metric,
            qrels,
            targets,
            out,
        } => {
            let run = RunFile::read(&run)?;
            let text = match metric {
                Metric::Xinfap => {
                    let Some(qrels) = qrels else { bail!("--qrels is required for xinfap") };
                    evaluate_run(&run, &Qrels::read(&qrels)?, cfg.infap_params())?.to_tsv()
                }
                Metric::Medr => {
                    let Some(targets) = targets else { bail!("--targets is required for medr") };
                    let text = std::fs::read_to_string(&targets).with_context(|| targets.display().to_string())?;
                    medr(&run, &parse_targets(&text, &targets.display().to_string())?)?.to_tsv()
                }
            };
            emit(out.as_deref(), &text)?;
            Ok(0)
        }
        Command::Signif { run_a, run_b, qrels } => {
            let report = signif_report(
                &RunFile::read(&run_a)?,
                &RunFile::read(&run_b)?,
                &Qrels::read(&qrels)?,
                cfg.infap_params(),
                cfg.iterations,
                cfg.seed,
            )?;
            emit(None, &report.to_tsv())?;
            Ok(0)
        }
        Command::ExperimentSubsample { qrels, out } => {
            let stores = cfg.load_stores()?;
            let table = run_subsample_experiment(&cfg, &gateway()?, &cfg.paths.bundles, &stores, &Qrels::read(&qrels)?)?;
            emit(out.as_deref(), &table.to_tsv())?;
            Ok(0)
        }
        Command::SynthStore { count, dim, kind, out } => {
            let kind = match kind {
                Kind::Embedding => StoreKind::Embedding,
                Kind::Concept => StoreKind::Concept,
            };
            let store = EmbeddingStore::synthetic(kind, count, dim, cfg.seed)?;
            let mut ids = out.clone().into_os_string();
            ids.push(".ids");
            store.write(&out, Path::new(&ids))?;
            Ok(0)
        }
        Command::Conformance { out } => {
            emit(out.as_deref(), &vectors_jsonl(&VECTOR_SETTINGS))?;
            Ok(0)
        }
        Command::PrintConfig => {
            emit(None, &cfg.to_json())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
