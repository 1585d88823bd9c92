mod commands;
mod config;
mod fixtures;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bitextkit_core::providers::ProviderKind;
use bitextkit_core::{Error, Result};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "bitextkit", version, about = "Bitext mining, adapter training and embedding evaluation")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for stage-internal parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Provider kind for every stage (`mock`) or one stage (`eval=file`).
    #[arg(long, global = true, value_name = "[STAGE=]KIND")]
    provider: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean, filter and split raw documents.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Pair source articles with target articles.
    MatchArticles {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Extract parallel sentences from two prepared collections.
    MineSentences {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        /// Reuse article pairs from `match-articles` instead of matching again.
        #[arg(long)]
        articles: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Extract paraphrase pairs from one prepared collection.
    MineParaphrases {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate adversarial negatives and write a review sheet.
    BuildBenchmark {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Turn a reviewed sheet into benchmark items.
    ReviewImport {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Treat pending triples as accepted (synthetic runs only).
        #[arg(long)]
        accept_pending: bool,
    },
    /// Train the contrastive adapter on mined pairs.
    TrainAdapter {
        #[arg(long, required = true)]
        pairs: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluation tasks.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Pairwise CKA dissimilarity between languages.
    Cka(CkaArgs),
    /// Difference between two CKA matrices.
    CkaCompare {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Configuration helpers.
    #[command(subcommand)]
    Config(ConfigCommand),
    /// Write the synthetic fixture set.
    #[command(hide = true)]
    SynthFixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Retrieval accuracy in both directions of each pair file.
    Bitext {
        #[arg(long, required = true)]
        pairs: Vec<PathBuf>,
        /// `src-tgt` names, one per pair file; taken from the file name otherwise.
        #[arg(long)]
        langs: Vec<String>,
        #[arg(long)]
        adapter: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Zero-shot classification with label templates.
    Zsc {
        #[arg(long)]
        data: PathBuf,
        /// One label name per line; the Luxembourgish topic labels otherwise.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// One template per line; the shipped Luxembourgish ones otherwise.
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        adapter: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Paraphrase detection on a benchmark file.
    Paraphrase {
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long)]
        adapter: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Cross-lingual transfer with linear classifiers.
    Transfer {
        /// Holds `labels.txt`, `<lang>.train.tsv`, `<lang>.dev.tsv` and `<target>.test.tsv`.
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sources: Vec<String>,
        #[arg(long, default_value = "lb")]
        target: String,
        /// Sources reported but left out of the mean.
        #[arg(long, value_delimiter = ',', default_value = "lb")]
        exclude: Vec<String>,
        #[arg(long)]
        adapter: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
struct CkaArgs {
    /// `lang=FILE` vector TSVs with row-aligned sentences.
    #[arg(long, conflicts_with = "texts")]
    embeddings: Vec<String>,
    /// `lang=FILE` text files, one sentence per line, row-aligned.
    #[arg(long)]
    texts: Vec<String>,
    #[arg(long)]
    adapter: Option<PathBuf>,
    /// Matrix CSV; the JSON report goes next to it.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Subcommand)]
enum ConfigCommand {
    /// Print the effective configuration.
    Show,
}

fn apply_overrides(cfg: &mut RunConfig, cli: &Cli) -> Result<()> {
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    for spec in &cli.provider {
        let (stage, kind) = match spec.split_once('=') {
            Some((s, k)) => (Some(s), k),
            None => (None, spec.as_str()),
        };
        let kind: ProviderKind = kind.parse()?;
        match stage {
            None => {
                for s in ["article", "sentence", "eval"] {
                    cfg.stage_mut(s).expect("known stage").kind = kind;
                }
            }
            Some(s) => {
                cfg.stage_mut(s)
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown provider stage {s:?}; expected article, sentence or eval")))?
                    .kind = kind;
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::InvalidConfig("--jobs must be >= 1".to_string()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("--jobs: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut cfg, &cli)?;
    cfg.validate()?;
    let ctx = commands::Context::new(cfg);
    log::info!("config hash {}", ctx.hash);
    match cli.command {
        Command::Ingest { input, output } => ctx.ingest(&input, &output),
        Command::MatchArticles { src, tgt, output } => ctx.match_articles(&src, &tgt, &output),
        Command::MineSentences { src, tgt, articles, output } => ctx.mine_sentences(&src, &tgt, articles.as_deref(), &output),
        Command::MineParaphrases { input, output } => ctx.mine_paraphrases(&input, &output),
        Command::BuildBenchmark { pairs, output } => ctx.build_benchmark(&pairs, &output),
        Command::ReviewImport { input, output, accept_pending } => ctx.review_import(&input, &output, accept_pending),
        Command::TrainAdapter { pairs, output } => ctx.train_adapter(&pairs, &output),
        Command::Eval(EvalCommand::Bitext { pairs, langs, adapter, output }) => {
            ctx.eval_bitext(&pairs, &langs, adapter.as_deref(), &output)
        }
        Command::Eval(EvalCommand::Zsc { data, labels, templates, adapter, output }) => {
            ctx.eval_zsc(&data, labels.as_deref(), templates.as_deref(), adapter.as_deref(), &output)
        }
        Command::Eval(EvalCommand::Paraphrase { benchmark, adapter, output }) => {
            ctx.eval_paraphrase(&benchmark, adapter.as_deref(), &output)
        }
        Command::Eval(EvalCommand::Transfer { data_dir, sources, target, exclude, adapter, output }) => {
            ctx.eval_transfer(&data_dir, &sources, &target, &exclude, adapter.as_deref(), &output)
        }
        Command::Cka(a) => ctx.cka(&a.embeddings, &a.texts, a.adapter.as_deref(), &a.output),
        Command::CkaCompare { before, after, output } => ctx.cka_compare(&before, &after, &output),
        Command::Config(ConfigCommand::Show) => {
            print!("{}", ctx.cfg.to_toml());
            Ok(())
        }
        Command::SynthFixtures { out } => fixtures::write_fixtures(&out),
    }
}

/// 1 for anything the user can fix in the config or arguments, 2 otherwise.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::MalformedTemplate(_) | Error::UnknownLanguage(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
