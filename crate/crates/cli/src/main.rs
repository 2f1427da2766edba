use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use layground::commands::{self, EvalInputs};
use layground::config::{Mode, RunConfig};
use layground::rerank::ScorerSpec;
use layground::{Error, Result};

/// Retrieval grounding and evaluation for lay summarization.
#[derive(Debug, Parser)]
#[command(name = "layground", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build one BM25 index per searchable corpus.
    BuildIndex(Common),
    /// Retrieve, re-rank and assemble model inputs or zero-shot prompts.
    Ground(GroundArgs),
    /// Score generated summaries against references.
    Eval(EvalArgs),
    /// Render metric and grounding-usage tables.
    Report(ReportArgs),
    /// Split `{id, title, text}` articles into passage chunks.
    Chunk(ChunkArgs),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Worker threads (defaults to the config value, then one per core).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct GroundArgs {
    #[command(flatten)]
    common: Common,
    /// finetune-input or zero-shot-prompt.
    #[arg(long)]
    mode: Option<Mode>,
    /// lexical or remote.
    #[arg(long)]
    scorer: Option<String>,
    /// Bridge endpoint for the remote scorer.
    #[arg(long, value_name = "URL")]
    scorer_endpoint: Option<String>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// JSON lines of `{id, summary}`.
    #[arg(long, value_name = "PATH")]
    generated: Option<PathBuf>,
    /// JSON lines of `{id, summary}` or dataset records.
    #[arg(long, value_name = "PATH")]
    references: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    familiar_words: Option<PathBuf>,
    /// Configuration name shown in report tables.
    #[arg(long)]
    label: Option<String>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Metric report files from `eval`; may be repeated.
    #[arg(long = "metrics", value_name = "PATH")]
    metrics: Vec<PathBuf>,
    /// Grounded-input or prompt file for usage statistics.
    #[arg(long, value_name = "PATH")]
    grounded: Option<PathBuf>,
    /// Output stem; `.txt` and `.json` are written.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ChunkArgs {
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    #[arg(long, default_value_t = layground::corpus::DEFAULT_SENTENCES_PER_CHUNK)]
    sentences: usize,
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_file(&common.config)?;
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required(value: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    value
        .or_else(|| fallback.clone())
        .ok_or_else(|| Error::Config(format!("no {what} file given (flag or [eval] config)")))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildIndex(common) => {
            let cfg = load(&common)?;
            for b in commands::cmd_build_index(&cfg)? {
                println!("{}\t{}\t{}", b.corpus, b.doc_count, b.dir.display());
            }
        }
        Command::Ground(args) => {
            let mut cfg = load(&args.common)?;
            if let Some(mode) = args.mode {
                cfg.mode = mode;
            }
            if args.scorer.is_some() || args.scorer_endpoint.is_some() {
                let configured = match &cfg.scorer {
                    ScorerSpec::Remote { endpoint } => Some(endpoint.clone()),
                    ScorerSpec::Lexical => None,
                };
                let kind = args.scorer.as_deref().unwrap_or("remote");
                let endpoint = args.scorer_endpoint.or(configured);
                cfg.scorer = ScorerSpec::from_parts(kind, endpoint.as_deref())?;
            }
            cfg.validate()?;
            let run = commands::cmd_ground(&cfg, args.out.as_deref())?;
            println!("{}\t{}", run.outputs.len(), run.out_path.display());
            println!("provenance\t{}", run.provenance_path.display());
        }
        Command::Eval(args) => {
            let cfg = load(&args.common)?;
            let generated = required(args.generated, &cfg.eval.generated, "generated-summaries")?;
            let references = required(args.references, &cfg.eval.references, "reference")?;
            let familiar = args.familiar_words.or_else(|| cfg.eval.familiar_words.clone());
            let label = args.label.or_else(|| cfg.eval.label.clone());
            let inputs = EvalInputs {
                generated: &generated,
                references: &references,
                familiar_words: familiar.as_deref(),
                label: label.as_deref(),
            };
            let report = commands::cmd_eval(&inputs, cfg.workers)?;
            let out = args.out.unwrap_or_else(|| cfg.output.metrics.clone());
            commands::write_report(&out, &report)?;
            for (metric, agg) in &report.aggregates {
                println!("{metric}\t{:.6}\t{:.6}", agg.mean, agg.std);
            }
            println!("{}\t{}", report.rows.len(), out.display());
        }
        Command::Report(args) => {
            let cfg = load(&args.common)?;
            let paths = if args.metrics.is_empty() {
                vec![cfg.output.metrics.clone()]
            } else {
                args.metrics
            };
            let reports = paths
                .iter()
                .map(|p| commands::read_report(p))
                .collect::<Result<Vec<_>>>()?;
            let tables = commands::cmd_report(&reports, args.grounded.as_deref())?;
            let stem = args.out.unwrap_or_else(|| cfg.output.report.clone());
            let (txt, json) = commands::write_tables(&stem, &tables)?;
            print!("{}", tables.render_text());
            log::info!("wrote {} and {}", txt.display(), json.display());
        }
        Command::Chunk(args) => {
            let n = commands::cmd_chunk(&args.input, &args.out, args.sentences)?;
            println!("{n}\t{}", args.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
