use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use archetype::analytics::UnclassifiedPolicy;
use archetype::corpus::save_corpus;
use archetype::pipeline::{
    self, ManifestKind, PipelineConfig, ProviderConfig, Stage, DEFAULT_OUT_DIR, OUT_DIR_ENV,
};
use archetype::retrofit::Norm;
use archetype::synthetic::{synthetic_corpus, DEFAULT_DISCIPLINES};

/// Retrofit scholarly-document sections onto seven structural section types
/// and compute per-discipline structural archetypes.
#[derive(Parser)]
#[command(name = "archetype", version)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the config file.
#[derive(Args)]
struct Overrides {
    /// TOML or JSON pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for all stage artifacts.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    /// Corpus JSONL file (read by `sample`).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Fail on the first malformed corpus record instead of skipping it.
    #[arg(long, global = true)]
    strict: bool,
    /// Documents sampled per discipline.
    #[arg(long, global = true)]
    sample_size: Option<usize>,
    /// Seed for sampling and the annotation manifest.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Complete alias file to use instead of the derived vocabulary.
    #[arg(long, global = true)]
    vocabulary: Option<PathBuf>,
    /// Extra aliases merged into the defaults by `vocab`.
    #[arg(long, global = true)]
    aliases: Option<PathBuf>,
    /// Frequent headings inspected by `vocab`.
    #[arg(long, global = true)]
    top_k: Option<usize>,
    /// Disciplines a frequent heading must appear in (default: half).
    #[arg(long, global = true)]
    min_disciplines: Option<usize>,
    /// Embedding provider.
    #[arg(long, global = true, value_enum)]
    provider: Option<ProviderKind>,
    /// Vector dimension of the hash or lexical provider.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Seed of the hash provider.
    #[arg(long, global = true)]
    hash_seed: Option<u64>,
    /// Embedding cache written by an external embedder (implies --provider cache).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Whitespace tokens of heading + body fed to the embedder.
    #[arg(long, global = true)]
    max_tokens: Option<usize>,
    /// Threshold weight on the furthest-member distance.
    #[arg(long, global = true)]
    weight: Option<f64>,
    /// Distance norm: l2 or l1.
    #[arg(long, global = true)]
    norm: Option<Norm>,
    /// Fewest seeds a type needs to get a centroid.
    #[arg(long, global = true)]
    min_members: Option<usize>,
    /// Position histogram bins.
    #[arg(long, global = true)]
    bins: Option<usize>,
    /// Unclassified sections in transitions: drop or keep-as-gap.
    #[arg(long, global = true)]
    policy: Option<UnclassifiedPolicy>,
    /// Gold labels CSV (doc_id,section_index,gold_type).
    #[arg(long, global = true)]
    gold: Option<PathBuf>,
    /// Sections per type in the annotation manifest.
    #[arg(long, global = true)]
    per_type: Option<usize>,
    /// Skip SVG charts in `report`.
    #[arg(long, global = true)]
    no_svg: bool,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderKind {
    Hash,
    Lexical,
    Cache,
}

#[derive(Subcommand)]
enum Command {
    /// Convert S2ORC-style records into the corpus format.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Sample documents per discipline into the working corpus.
    Sample,
    /// Heading frequency statistics of the working corpus.
    Stats,
    /// Derive the structural vocabulary from frequent headings.
    Vocab,
    /// Write the embedding input manifest, or an annotation manifest.
    Manifest {
        #[arg(long, value_enum, default_value = "embed")]
        kind: ManifestArg,
    },
    /// Fit per-type centroids and thresholds on seed sections.
    Fit,
    /// Label every section of the working corpus.
    Retrofit,
    /// Positional histograms per discipline.
    Positions,
    /// Transition matrices per discipline.
    Transitions,
    /// Positional frequency differences between two disciplines.
    Compare {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Precision / recall / F1 against gold labels.
    Evaluate,
    /// Bundle CSV/JSON outputs and SVG charts.
    Report,
    /// Write a synthetic corpus (for trying the pipeline out).
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 40)]
        per_discipline: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ManifestArg {
    Embed,
    Annotate,
}

fn effective_config(o: &Overrides) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &o.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = &o.out_dir {
        cfg.out_dir = v.clone();
    } else if o.config.is_none() {
        cfg.out_dir = PathBuf::from(DEFAULT_OUT_DIR);
    }
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                cfg.$field = v;
            }
        };
    }
    set!(sample_size, o.sample_size);
    set!(seed, o.seed);
    set!(top_k, o.top_k);
    set!(max_tokens, o.max_tokens);
    set!(weight, o.weight);
    set!(norm, o.norm);
    set!(min_members, o.min_members);
    set!(bins, o.bins);
    set!(unclassified_policy, o.policy);
    set!(per_type, o.per_type);
    if o.corpus.is_some() {
        cfg.corpus = o.corpus.clone();
    }
    if o.vocabulary.is_some() {
        cfg.vocabulary = o.vocabulary.clone();
    }
    if o.aliases.is_some() {
        cfg.alias_overrides = o.aliases.clone();
    }
    if o.min_disciplines.is_some() {
        cfg.min_disciplines = o.min_disciplines;
    }
    if o.gold.is_some() {
        cfg.gold = o.gold.clone();
    }
    if o.jobs.is_some() {
        cfg.jobs = o.jobs;
    }
    cfg.strict |= o.strict;
    if o.no_svg {
        cfg.svg = false;
    }

    let kind = match (o.provider, &o.cache) {
        (Some(k), _) => Some(k),
        (None, Some(_)) => Some(ProviderKind::Cache),
        (None, None) => None,
    };
    match kind {
        Some(ProviderKind::Cache) => {
            let path = match (&o.cache, &cfg.provider) {
                (Some(p), _) => p.clone(),
                (None, ProviderConfig::Cache { path }) => path.clone(),
                _ => anyhow::bail!("--provider cache needs --cache PATH"),
            };
            cfg.provider = ProviderConfig::Cache { path };
        }
        Some(ProviderKind::Lexical) => {
            let dim = o.dim.unwrap_or(match cfg.provider {
                ProviderConfig::Hash { dim, .. } | ProviderConfig::Lexical { dim } => dim,
                ProviderConfig::Cache { .. } => 256,
            });
            cfg.provider = ProviderConfig::Lexical { dim };
        }
        Some(ProviderKind::Hash) | None => {
            if kind.is_some() || o.dim.is_some() || o.hash_seed.is_some() {
                cfg.provider = match cfg.provider {
                    ProviderConfig::Lexical { dim } if kind.is_none() => ProviderConfig::Lexical {
                        dim: o.dim.unwrap_or(dim),
                    },
                    ProviderConfig::Hash { dim, seed } => ProviderConfig::Hash {
                        dim: o.dim.unwrap_or(dim),
                        seed: o.hash_seed.unwrap_or(seed),
                    },
                    _ => ProviderConfig::Hash {
                        dim: o.dim.unwrap_or(64),
                        seed: o.hash_seed.unwrap_or(0),
                    },
                };
            }
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let stage = match cli.command {
        Command::Synth {
            output,
            per_discipline,
            seed,
        } => {
            let docs = synthetic_corpus(&DEFAULT_DISCIPLINES, per_discipline, seed);
            save_corpus(&output, &docs)?;
            say(format_args!("wrote {} documents to {}", docs.len(), output.display()));
            return Ok(());
        }
        Command::Convert { input, output } => Stage::Convert { input, output },
        Command::Sample => Stage::Sample,
        Command::Stats => Stage::Stats,
        Command::Vocab => Stage::Vocab,
        Command::Manifest { kind } => Stage::Manifest {
            kind: match kind {
                ManifestArg::Embed => ManifestKind::Embed,
                ManifestArg::Annotate => ManifestKind::Annotate,
            },
        },
        Command::Fit => Stage::Fit,
        Command::Retrofit => Stage::Retrofit,
        Command::Positions => Stage::Positions,
        Command::Transitions => Stage::Transitions,
        Command::Compare { a, b } => Stage::Compare { a, b },
        Command::Evaluate => Stage::Evaluate,
        Command::Report => Stage::Report,
    };
    let cfg = effective_config(&cli.overrides)?;
    let outcome = pipeline::run(&stage, &cfg).with_context(|| format!("`{}` failed", stage.name()))?;
    for note in &outcome.notes {
        say(format_args!("{}", note.trim_end()));
    }
    for path in &outcome.artifacts {
        say(format_args!("wrote {}", path.display()));
    }
    Ok(())
}

// A closed stdout (e.g. piped into `head`) is not an error for a batch tool.
fn say(line: std::fmt::Arguments<'_>) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
