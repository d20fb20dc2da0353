//! Artifact-oriented pipeline stages behind the `archetype` command.
//!
//! Every stage reads its inputs from the configured corpus or from files a
//! previous stage left in the output directory, and writes its own outputs
//! there atomically. A missing prerequisite names the stage to run first.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::{
    self, compare_disciplines, position_histogram, transition_matrix, HistogramMode,
    UnclassifiedPolicy, DEFAULT_BINS,
};
use crate::corpus::{self, load_corpus, sample_per_discipline, save_corpus, Document};
use crate::embedding::{
    build_input_text, hash_provider, lexical_provider, manifest_bytes, Embedder, EmbeddingCache, DEFAULT_MAX_TOKENS,
};
use crate::error::{Error, Result};
use crate::evaluation::{self, evaluate, stratified_gold_sampler, GoldLabelSet, DEFAULT_PER_TYPE};
use crate::io::{write_atomic, write_json};
use crate::retrofit::{
    fit_corpus, load_labeled, retrofit_corpus, save_labeled, BeforeAfterCounts, FitOptions,
    LabeledDocument, Norm, RetrofitModel, DEFAULT_MIN_MEMBERS, DEFAULT_WEIGHT,
};
use crate::vocabulary::{
    count_headings, derive_vocabulary, singleton_fraction, AliasMap, SectionType,
    StructuralVocabulary,
};

pub const OUT_DIR_ENV: &str = "ARCHETYPE_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "archetype-out";

pub const SAMPLE_FILE: &str = "sample.jsonl";
pub const SAMPLE_REPORT_FILE: &str = "sample_report.json";
pub const STATS_FILE: &str = "stats.json";
pub const VOCABULARY_FILE: &str = "vocabulary.json";
pub const VOCAB_REPORT_FILE: &str = "vocab_report.json";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const ANNOTATION_FILE: &str = "annotation.csv";
pub const ANNOTATION_REPORT_FILE: &str = "annotation_report.json";
pub const MODEL_FILE: &str = "model.json";
pub const LABELED_FILE: &str = "labeled.jsonl";
pub const COUNTS_FILE: &str = "retrofit_counts.json";
pub const COUNTS_CSV_FILE: &str = "retrofit_counts.csv";
pub const POSITIONS_FILE: &str = "positions.json";
pub const POSITIONS_CSV_FILE: &str = "positions.csv";
pub const TRANSITIONS_FILE: &str = "transitions.json";
pub const TRANSITIONS_CSV_FILE: &str = "transitions.csv";
pub const COMPARE_FILE: &str = "compare.json";
pub const COMPARE_CSV_FILE: &str = "compare.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const METRICS_TABLE_FILE: &str = "metrics.txt";
pub const REPORT_DIR: &str = "report";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderConfig {
    /// Built-in pseudorandom provider; needs no model files.
    Hash { dim: usize, seed: u64 },
    /// Built-in feature-hashed bag of words.
    Lexical { dim: usize },
    /// Vectors precomputed by an external embedder, read from a cache file.
    Cache { path: PathBuf },
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Hash { dim: 64, seed: 0 }
    }
}

/// Effective configuration for a stage. Loaded from TOML or JSON and then
/// overridden by command-line flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub strict: bool,
    pub sample_size: usize,
    pub seed: u64,
    /// Complete alias file used by `fit` and `retrofit` instead of the
    /// derived `vocabulary.json`.
    pub vocabulary: Option<PathBuf>,
    /// Aliases added to the defaults by `vocab`.
    pub alias_overrides: Option<PathBuf>,
    pub top_k: usize,
    pub min_disciplines: Option<usize>,
    pub provider: ProviderConfig,
    pub max_tokens: usize,
    pub weight: f64,
    pub norm: Norm,
    pub min_members: usize,
    pub bins: usize,
    pub unclassified_policy: UnclassifiedPolicy,
    pub gold: Option<PathBuf>,
    pub per_type: usize,
    pub svg: bool,
    pub jobs: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            out_dir: PathBuf::from(DEFAULT_OUT_DIR),
            strict: false,
            sample_size: 1000,
            seed: 42,
            vocabulary: None,
            alias_overrides: None,
            top_k: 20,
            min_disciplines: None,
            provider: ProviderConfig::default(),
            max_tokens: DEFAULT_MAX_TOKENS,
            weight: DEFAULT_WEIGHT,
            norm: Norm::L2,
            min_members: DEFAULT_MIN_MEMBERS,
            bins: DEFAULT_BINS,
            unclassified_policy: UnclassifiedPolicy::Drop,
            gold: None,
            per_type: DEFAULT_PER_TYPE,
            svg: true,
            jobs: None,
        }
    }
}

impl PipelineConfig {
    /// Reads a `.toml` or `.json` config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| Error::Config(e.to_string())),
            Some("json") => serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string())),
            _ => Err(Error::Config(format!(
                "{}: config must be .toml or .json",
                path.display()
            ))),
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn validate_values(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.sample_size == 0 {
            return bad("sample_size must be at least 1");
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1");
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be at least 1");
        }
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return bad("weight must be positive");
        }
        if self.bins < 2 {
            return bad("bins must be at least 2");
        }
        if self.per_type == 0 {
            return bad("per_type must be at least 1");
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1");
        }
        if let ProviderConfig::Hash { dim, .. } | ProviderConfig::Lexical { dim } = self.provider {
            if dim < 2 {
                return bad("provider dim must be at least 2");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifestKind {
    /// Input texts for an external embedder.
    #[default]
    Embed,
    /// Stratified sample of labeled sections for gold annotation.
    Annotate,
}

/// Pipeline subcommands.
#[derive(Clone, Debug, PartialEq)]
pub enum Stage {
    Convert { input: PathBuf, output: PathBuf },
    Sample,
    Stats,
    Vocab,
    Manifest { kind: ManifestKind },
    Fit,
    Retrofit,
    Positions,
    Transitions,
    Compare { a: String, b: String },
    Evaluate,
    Report,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Convert { .. } => "convert",
            Stage::Sample => "sample",
            Stage::Stats => "stats",
            Stage::Vocab => "vocab",
            Stage::Manifest { .. } => "manifest",
            Stage::Fit => "fit",
            Stage::Retrofit => "retrofit",
            Stage::Positions => "positions",
            Stage::Transitions => "transitions",
            Stage::Compare { .. } => "compare",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

/// Files written and human-readable notes from one stage.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageOutcome {
    pub artifacts: Vec<PathBuf>,
    pub notes: Vec<String>,
}

impl StageOutcome {
    fn wrote(&mut self, path: PathBuf) {
        self.artifacts.push(path);
    }

    fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }
}

fn require(path: &Path, stage: &'static str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            stage,
        })
    }
}

fn require_input(path: Option<&PathBuf>, what: &str) -> Result<PathBuf> {
    let path = path.ok_or_else(|| Error::Config(format!("no {what} configured")))?;
    if !path.is_file() {
        return Err(Error::Config(format!("{what} {} does not exist", path.display())));
    }
    Ok(path.clone())
}

/// Checks every input the stage will read before anything runs.
fn validate(stage: &Stage, cfg: &PipelineConfig) -> Result<()> {
    cfg.validate_values()?;
    let vocab = || match &cfg.vocabulary {
        Some(p) => require_input(Some(p), "vocabulary file").map(|_| ()),
        None => require(&cfg.out(VOCABULARY_FILE), "vocab"),
    };
    let provider = || match &cfg.provider {
        ProviderConfig::Cache { path } => require_input(Some(path), "embedding cache").map(|_| ()),
        ProviderConfig::Hash { .. } | ProviderConfig::Lexical { .. } => Ok(()),
    };
    match stage {
        Stage::Convert { input, .. } => {
            require_input(Some(input), "input file")?;
        }
        Stage::Sample => {
            require_input(cfg.corpus.as_ref(), "corpus")?;
        }
        Stage::Stats | Stage::Manifest { kind: ManifestKind::Embed } => {
            require(&cfg.out(SAMPLE_FILE), "sample")?;
        }
        Stage::Vocab => {
            require(&cfg.out(SAMPLE_FILE), "sample")?;
            if let Some(p) = &cfg.alias_overrides {
                require_input(Some(p), "alias override file")?;
            }
        }
        Stage::Manifest { kind: ManifestKind::Annotate } => {
            require(&cfg.out(SAMPLE_FILE), "sample")?;
            require(&cfg.out(LABELED_FILE), "retrofit")?;
        }
        Stage::Fit => {
            require(&cfg.out(SAMPLE_FILE), "sample")?;
            vocab()?;
            provider()?;
        }
        Stage::Retrofit => {
            require(&cfg.out(SAMPLE_FILE), "sample")?;
            require(&cfg.out(MODEL_FILE), "fit")?;
            vocab()?;
            provider()?;
        }
        Stage::Positions | Stage::Transitions | Stage::Compare { .. } | Stage::Report => {
            require(&cfg.out(LABELED_FILE), "retrofit")?;
        }
        Stage::Evaluate => {
            require(&cfg.out(LABELED_FILE), "retrofit")?;
            require_input(cfg.gold.as_ref(), "gold label file")?;
        }
    }
    Ok(())
}

/// Validates, then runs `stage` (inside a sized thread pool when `jobs` is
/// set) and echoes the effective config to `config/<stage>.json`.
pub fn run(stage: &Stage, cfg: &PipelineConfig) -> Result<StageOutcome> {
    validate(stage, cfg)?;
    let mut outcome = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| dispatch(stage, cfg))?,
        None => dispatch(stage, cfg)?,
    };
    if !matches!(stage, Stage::Convert { .. }) {
        let echo = cfg.out_dir.join("config").join(format!("{}.json", stage.name()));
        write_json(&echo, cfg)?;
        outcome.wrote(echo);
    }
    Ok(outcome)
}

fn dispatch(stage: &Stage, cfg: &PipelineConfig) -> Result<StageOutcome> {
    match stage {
        Stage::Convert { input, output } => convert(input, output),
        Stage::Sample => sample(cfg),
        Stage::Stats => stats(cfg),
        Stage::Vocab => vocab(cfg),
        Stage::Manifest { kind: ManifestKind::Embed } => embed_manifest(cfg),
        Stage::Manifest { kind: ManifestKind::Annotate } => annotation_manifest(cfg),
        Stage::Fit => fit(cfg),
        Stage::Retrofit => retrofit(cfg),
        Stage::Positions => positions(cfg),
        Stage::Transitions => transitions(cfg),
        Stage::Compare { a, b } => compare(cfg, a, b),
        Stage::Evaluate => evaluate_stage(cfg),
        Stage::Report => report(cfg),
    }
}

fn convert(input: &Path, output: &Path) -> Result<StageOutcome> {
    let reader = BufReader::new(File::open(input).map_err(|e| Error::io(input, e))?);
    let mut buf = Vec::new();
    let report = corpus::convert_s2orc(reader, BufWriter::new(&mut buf))?;
    write_atomic(output, &buf)?;
    let mut o = StageOutcome::default();
    o.note(format!(
        "converted {} of {} records ({} skipped)",
        report.written,
        report.read,
        report.skipped.len()
    ));
    o.wrote(output.to_path_buf());
    Ok(o)
}

fn working_corpus(cfg: &PipelineConfig) -> Result<Vec<Document>> {
    Ok(load_corpus(&cfg.out(SAMPLE_FILE), true)?.documents)
}

fn sample(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let corpus_path = cfg.corpus.as_ref().expect("validated");
    let loaded = load_corpus(corpus_path, cfg.strict)?;
    let (docs, report) = sample_per_discipline(&loaded.documents, cfg.sample_size, cfg.seed)?;
    let mut o = StageOutcome::default();
    save_corpus(&cfg.out(SAMPLE_FILE), &docs)?;
    o.wrote(cfg.out(SAMPLE_FILE));
    let json = serde_json::json!({
        "loaded": loaded.documents.len(),
        "skipped_records": loaded.skipped,
        "sampled": docs.len(),
        "sampling": report,
    });
    write_json(&cfg.out(SAMPLE_REPORT_FILE), &json)?;
    o.wrote(cfg.out(SAMPLE_REPORT_FILE));
    if !loaded.skipped.is_empty() {
        o.note(format!("skipped {} malformed records", loaded.skipped.len()));
    }
    for (d, s) in report.short_disciplines() {
        o.note(format!("{d}: only {} of {} documents available", s.available, cfg.sample_size));
    }
    o.note(format!("sampled {} documents", docs.len()));
    Ok(o)
}

fn stats(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let docs = working_corpus(cfg)?;
    let table = count_headings(&docs);
    let mut disciplines = std::collections::BTreeMap::<&str, usize>::new();
    for d in &docs {
        *disciplines.entry(d.discipline.as_str()).or_default() += 1;
    }
    let mut top: Vec<(&str, u64)> = table.totals().collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    top.truncate(50);
    let json = serde_json::json!({
        "documents": docs.len(),
        "sections": docs.iter().map(|d| d.sections.len()).sum::<usize>(),
        "disciplines": disciplines,
        "distinct_headings": table.distinct(),
        "total_headings": table.total(),
        "singleton_fraction": if table.is_empty() { None } else { Some(singleton_fraction(&table)?) },
        "top_headings": top.iter().map(|(h, n)| serde_json::json!({"heading": h, "count": n})).collect::<Vec<_>>(),
    });
    write_json(&cfg.out(STATS_FILE), &json)?;
    let mut o = StageOutcome::default();
    o.note(format!(
        "{} documents, {} distinct headings, singleton fraction {}",
        docs.len(),
        table.distinct(),
        json["singleton_fraction"].as_f64().map_or("n/a".into(), |f| format!("{f:.4}"))
    ));
    o.wrote(cfg.out(STATS_FILE));
    Ok(o)
}

fn vocab(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let docs = working_corpus(cfg)?;
    let table = count_headings(&docs);
    let overrides: Option<AliasMap> = match &cfg.alias_overrides {
        Some(p) => Some(crate::io::read_json(p)?),
        None => None,
    };
    let (vocabulary, report) =
        derive_vocabulary(&table, overrides.as_ref(), cfg.top_k, cfg.min_disciplines)?;
    let mut o = StageOutcome::default();
    vocabulary.save(&cfg.out(VOCABULARY_FILE))?;
    o.wrote(cfg.out(VOCABULARY_FILE));
    write_json(&cfg.out(VOCAB_REPORT_FILE), &report)?;
    o.wrote(cfg.out(VOCAB_REPORT_FILE));
    for w in &report.warnings {
        o.note(format!("warning: {w}"));
    }
    if !report.unmapped.is_empty() {
        o.note(format!("unmapped top headings: {}", report.unmapped.join(", ")));
    }
    Ok(o)
}

fn embed_manifest(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let docs = working_corpus(cfg)?;
    let texts = docs
        .iter()
        .flat_map(|d| &d.sections)
        .map(|s| build_input_text(s, cfg.max_tokens))
        .collect::<Result<Vec<_>>>()?;
    let bytes = manifest_bytes(texts);
    write_atomic(&cfg.out(MANIFEST_FILE), &bytes)?;
    let mut o = StageOutcome::default();
    o.wrote(cfg.out(MANIFEST_FILE));
    Ok(o)
}

fn annotation_manifest(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let docs = working_corpus(cfg)?;
    let labeled = load_labeled(&cfg.out(LABELED_FILE))?;
    let manifest = stratified_gold_sampler(&docs, &labeled, cfg.per_type, cfg.seed)?;
    let mut o = StageOutcome::default();
    write_atomic(&cfg.out(ANNOTATION_FILE), &manifest.to_csv()?)?;
    o.wrote(cfg.out(ANNOTATION_FILE));
    let json = serde_json::json!({
        "per_type": cfg.per_type,
        "seed": cfg.seed,
        "rows": manifest.rows.len(),
        "shortfalls": manifest.shortfalls,
    });
    write_json(&cfg.out(ANNOTATION_REPORT_FILE), &json)?;
    o.wrote(cfg.out(ANNOTATION_REPORT_FILE));
    for (t, n) in &manifest.shortfalls {
        o.note(format!("{t}: only {n} predicted instances"));
    }
    Ok(o)
}

fn load_vocabulary(cfg: &PipelineConfig) -> Result<StructuralVocabulary> {
    match &cfg.vocabulary {
        Some(p) => StructuralVocabulary::load(p),
        None => StructuralVocabulary::load(&cfg.out(VOCABULARY_FILE)),
    }
}

/// Builds the embedder selected by the configuration.
pub fn make_embedder(provider: &ProviderConfig) -> Result<Embedder> {
    Ok(match provider {
        ProviderConfig::Hash { dim, seed } => Embedder::new(Box::new(hash_provider(*dim, *seed)?)),
        ProviderConfig::Lexical { dim } => Embedder::new(Box::new(lexical_provider(*dim)?)),
        ProviderConfig::Cache { path } => Embedder::cache_only(EmbeddingCache::load(path)?),
    })
}

fn fit(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let docs = working_corpus(cfg)?;
    let vocabulary = load_vocabulary(cfg)?;
    let embedder = make_embedder(&cfg.provider)?;
    let model = fit_corpus(
        &docs,
        &vocabulary,
        &embedder,
        cfg.max_tokens,
        FitOptions {
            weight: cfg.weight,
            min_members: cfg.min_members,
            norm: cfg.norm,
        },
    )?;
    model.save(&cfg.out(MODEL_FILE))?;
    let mut o = StageOutcome::default();
    o.wrote(cfg.out(MODEL_FILE));
    for c in model.centroids() {
        o.note(format!(
            "{}: {} seeds, threshold {:.4}",
            c.section_type, c.member_count, c.threshold
        ));
    }
    for e in model.excluded() {
        o.note(format!("{}: excluded ({} seeds < {})", e.section_type, e.seeds, cfg.min_members));
    }
    Ok(o)
}

fn counts_csv(counts: &BeforeAfterCounts) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["discipline", "type", "before", "after"])?;
    for (disc, c) in &counts.per_discipline {
        for t in SectionType::ALL {
            w.write_record([
                disc.clone(),
                t.to_string(),
                c.before[&t].to_string(),
                c.after[&t].to_string(),
            ])?;
        }
        w.write_record([disc.clone(), "unclassified".into(), String::new(), c.unclassified.to_string()])?;
    }
    w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
}

fn retrofit(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let docs = working_corpus(cfg)?;
    let vocabulary = load_vocabulary(cfg)?;
    let model = RetrofitModel::load(&cfg.out(MODEL_FILE))?;
    let embedder = make_embedder(&cfg.provider)?;
    let out = retrofit_corpus(&docs, &model, &embedder, &vocabulary, cfg.max_tokens)?;
    let mut o = StageOutcome::default();
    save_labeled(&cfg.out(LABELED_FILE), &out.labeled)?;
    o.wrote(cfg.out(LABELED_FILE));
    write_json(&cfg.out(COUNTS_FILE), &out.counts)?;
    o.wrote(cfg.out(COUNTS_FILE));
    write_atomic(&cfg.out(COUNTS_CSV_FILE), &counts_csv(&out.counts)?)?;
    o.wrote(cfg.out(COUNTS_CSV_FILE));
    let overall = &out.counts.overall;
    o.note(format!(
        "{} sections: {} classified, {} unclassified",
        overall.sections,
        overall.sections - overall.unclassified,
        overall.unclassified
    ));
    Ok(o)
}

fn all_positions(cfg: &PipelineConfig, labeled: &[LabeledDocument]) -> Result<Vec<analytics::PositionHistogramSet>> {
    analytics::disciplines(labeled)
        .iter()
        .map(|d| position_histogram(labeled, d, cfg.bins, HistogramMode::Frequency))
        .collect()
}

fn all_transitions(cfg: &PipelineConfig, labeled: &[LabeledDocument]) -> Vec<analytics::TransitionMatrix> {
    analytics::disciplines(labeled)
        .iter()
        .map(|d| transition_matrix(labeled, d, cfg.unclassified_policy))
        .collect()
}

fn positions(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let labeled = load_labeled(&cfg.out(LABELED_FILE))?;
    let sets = all_positions(cfg, &labeled)?;
    let mut o = StageOutcome::default();
    write_json(&cfg.out(POSITIONS_FILE), &sets)?;
    o.wrote(cfg.out(POSITIONS_FILE));
    write_atomic(&cfg.out(POSITIONS_CSV_FILE), &analytics::positions_csv(&sets)?)?;
    o.wrote(cfg.out(POSITIONS_CSV_FILE));
    Ok(o)
}

fn transitions(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let labeled = load_labeled(&cfg.out(LABELED_FILE))?;
    let matrices = all_transitions(cfg, &labeled);
    let mut o = StageOutcome::default();
    write_json(&cfg.out(TRANSITIONS_FILE), &matrices)?;
    o.wrote(cfg.out(TRANSITIONS_FILE));
    write_atomic(&cfg.out(TRANSITIONS_CSV_FILE), &analytics::transitions_csv(&matrices)?)?;
    o.wrote(cfg.out(TRANSITIONS_CSV_FILE));
    Ok(o)
}

fn compare(cfg: &PipelineConfig, a: &str, b: &str) -> Result<StageOutcome> {
    let labeled = load_labeled(&cfg.out(LABELED_FILE))?;
    let known = analytics::disciplines(&labeled);
    for d in [a, b] {
        if !known.iter().any(|k| k == d) {
            return Err(Error::InvalidParameter(format!(
                "discipline {d:?} not in labeled corpus (known: {})",
                known.join(", ")
            )));
        }
    }
    let ha = position_histogram(&labeled, a, cfg.bins, HistogramMode::Frequency)?;
    let hb = position_histogram(&labeled, b, cfg.bins, HistogramMode::Frequency)?;
    let cmp = compare_disciplines(&ha, &hb)?;
    let mut o = StageOutcome::default();
    write_json(&cfg.out(COMPARE_FILE), &cmp)?;
    o.wrote(cfg.out(COMPARE_FILE));
    write_atomic(&cfg.out(COMPARE_CSV_FILE), &analytics::comparison_csv(&cmp)?)?;
    o.wrote(cfg.out(COMPARE_CSV_FILE));
    let ranking: Vec<String> = cmp.ranking.iter().map(|t| t.to_string()).collect();
    o.note(format!("types by difference: {}", ranking.join(", ")));
    Ok(o)
}

fn evaluate_stage(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let labeled = load_labeled(&cfg.out(LABELED_FILE))?;
    let gold = GoldLabelSet::load(cfg.gold.as_ref().expect("validated"))?;
    let report = evaluate(&labeled, &gold)?;
    let table = evaluation::render_table(&report);
    let mut o = StageOutcome::default();
    write_json(&cfg.out(METRICS_FILE), &report)?;
    o.wrote(cfg.out(METRICS_FILE));
    write_atomic(&cfg.out(METRICS_TABLE_FILE), table.as_bytes())?;
    o.wrote(cfg.out(METRICS_TABLE_FILE));
    o.note(table);
    Ok(o)
}

fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect();
    s.trim_matches('-').to_string()
}

fn report(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let labeled = load_labeled(&cfg.out(LABELED_FILE))?;
    let dir = cfg.out(REPORT_DIR);
    let sets = all_positions(cfg, &labeled)?;
    let matrices = all_transitions(cfg, &labeled);
    let mut o = StageOutcome::default();

    let put = |name: &str, bytes: &[u8], o: &mut StageOutcome| -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, bytes)?;
        o.wrote(p);
        Ok(())
    };
    put(POSITIONS_CSV_FILE, &analytics::positions_csv(&sets)?, &mut o)?;
    put(TRANSITIONS_CSV_FILE, &analytics::transitions_csv(&matrices)?, &mut o)?;
    put(POSITIONS_FILE, &json_bytes(&sets)?, &mut o)?;
    put(TRANSITIONS_FILE, &json_bytes(&matrices)?, &mut o)?;
    if cfg.svg {
        for set in &sets {
            let name = format!("positions-{}.svg", slug(&set.discipline));
            put(&name, crate::svg::position_small_multiples(set).as_bytes(), &mut o)?;
        }
        for m in &matrices {
            let name = format!("transitions-{}.svg", slug(&m.discipline));
            put(&name, crate::svg::transition_heatmap(m).as_bytes(), &mut o)?;
        }
    }

    // Optional upstream artifacts are folded into the summary when present.
    let optional = |name: &str| -> Result<Option<serde_json::Value>> {
        let p = cfg.out(name);
        if p.is_file() {
            Ok(Some(crate::io::read_json(&p)?))
        } else {
            Ok(None)
        }
    };
    let sections: usize = labeled.iter().map(|d| d.labels.len()).sum();
    let classified: usize = labeled
        .iter()
        .flat_map(|d| &d.labels)
        .filter(|l| l.is_classified())
        .count();
    let summary = serde_json::json!({
        "documents": labeled.len(),
        "sections": sections,
        "classified": classified,
        "unclassified": sections - classified,
        "disciplines": analytics::disciplines(&labeled),
        "bins": cfg.bins,
        "unclassified_policy": cfg.unclassified_policy,
        "stats": optional(STATS_FILE)?,
        "vocabulary": optional(VOCAB_REPORT_FILE)?,
        "retrofit_counts": optional(COUNTS_FILE)?,
        "metrics": optional(METRICS_FILE)?,
    });
    put("summary.json", &json_bytes(&summary)?, &mut o)?;
    Ok(o)
}

fn json_bytes<T: Serialize + ?Sized>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}
