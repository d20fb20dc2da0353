//! Precision, recall and F1 of retrofitted labels against gold annotations,
//! plus a stratified sampler that prepares annotation manifests.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::retrofit::LabeledDocument;
use crate::vocabulary::SectionType;

pub const DEFAULT_PER_TYPE: usize = 30;
const N: usize = SectionType::COUNT;
/// Column index of the unclassified prediction in a confusion matrix.
pub const UNCLASSIFIED_COLUMN: usize = N;

/// Gold section types keyed by (document id, section index).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GoldLabelSet {
    entries: BTreeMap<(String, usize), SectionType>,
}

#[derive(Deserialize)]
struct GoldRow {
    doc_id: String,
    section_index: usize,
    #[serde(default)]
    gold_type: String,
}

impl GoldLabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, doc_id: &str, index: usize, ty: SectionType) {
        self.entries.insert((doc_id.to_string(), index), ty);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize, SectionType)> {
        self.entries.iter().map(|((d, i), t)| (d.as_str(), *i, *t))
    }

    /// Reads `doc_id,section_index,gold_type` CSV. Extra columns are ignored
    /// and rows with an empty `gold_type` are skipped, so a filled-in
    /// annotation manifest can be read directly.
    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut set = Self::new();
        let mut rdr = csv::Reader::from_reader(reader);
        for row in rdr.deserialize::<GoldRow>() {
            let row = row?;
            let gold = row.gold_type.trim();
            if gold.is_empty() {
                continue;
            }
            let ty: SectionType = gold.parse().map_err(|_| Error::InvalidGold {
                doc_id: row.doc_id.clone(),
                index: row.section_index,
                gold: gold.to_string(),
            })?;
            set.insert(&row.doc_id, row.section_index, ty);
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(file)
    }
}

/// `counts[gold][predicted]`; the last column holds unclassified predictions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; N + 1]; N],
}

impl ConfusionMatrix {
    pub fn add(&mut self, gold: SectionType, predicted: Option<SectionType>) {
        let col = predicted.map_or(UNCLASSIFIED_COLUMN, SectionType::index);
        self.counts[gold.index()][col] += 1;
    }

    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (SectionType, Option<SectionType>)>,
    {
        let mut cm = Self::default();
        for (g, p) in pairs {
            cm.add(g, p);
        }
        cm
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, t: SectionType) -> u64 {
        self.counts[t.index()][t.index()]
    }

    /// Other-gold sections predicted as `t`.
    pub fn false_positives(&self, t: SectionType) -> u64 {
        (0..N)
            .filter(|&g| g != t.index())
            .map(|g| self.counts[g][t.index()])
            .sum()
    }

    /// Gold `t` sections predicted as something else, unclassified included.
    pub fn false_negatives(&self, t: SectionType) -> u64 {
        self.counts[t.index()].iter().sum::<u64>() - self.true_positives(t)
    }
}

/// Precision, recall and F1; `None` marks an undefined value (zero
/// denominator).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Scores {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn f1(p: Option<f64>, r: Option<f64>) -> Option<f64> {
    let (p, r) = (p?, r?);
    Some(if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 })
}

impl Scores {
    fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypeMetrics {
    pub section_type: SectionType,
    #[serde(flatten)]
    pub scores: Scores,
    /// Gold instances of this type.
    pub support: u64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub evaluated: u64,
    pub per_type: Vec<TypeMetrics>,
    /// Unweighted mean over types where each metric is defined.
    #[serde(rename = "macro")]
    pub macro_avg: Scores,
    /// From pooled TP/FP/FN counts.
    #[serde(rename = "micro")]
    pub micro_avg: Scores,
    pub unclassified: u64,
    pub confusion: ConfusionMatrix,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> EvaluationReport {
    let per_type: Vec<TypeMetrics> = SectionType::ALL
        .into_iter()
        .map(|t| {
            let (tp, fp, fn_) = (cm.true_positives(t), cm.false_positives(t), cm.false_negatives(t));
            TypeMetrics {
                section_type: t,
                scores: Scores::from_counts(tp, fp, fn_),
                support: tp + fn_,
                true_positives: tp,
                false_positives: fp,
                false_negatives: fn_,
            }
        })
        .collect();
    let macro_avg = {
        let precision = mean_defined(per_type.iter().map(|m| m.scores.precision));
        let recall = mean_defined(per_type.iter().map(|m| m.scores.recall));
        let f1 = mean_defined(per_type.iter().map(|m| m.scores.f1));
        Scores { precision, recall, f1 }
    };
    let sum = |f: fn(&TypeMetrics) -> u64| per_type.iter().map(f).sum::<u64>();
    let micro_avg = Scores::from_counts(
        sum(|m| m.true_positives),
        sum(|m| m.false_positives),
        sum(|m| m.false_negatives),
    );
    EvaluationReport {
        evaluated: cm.total(),
        per_type,
        macro_avg,
        micro_avg,
        unclassified: cm.counts.iter().map(|r| r[UNCLASSIFIED_COLUMN]).sum(),
        confusion: cm.clone(),
    }
}

/// Scores predictions on the gold-labeled sections. Every gold key must have
/// a prediction.
pub fn evaluate(predictions: &[LabeledDocument], gold: &GoldLabelSet) -> Result<EvaluationReport> {
    if gold.is_empty() {
        return Err(Error::EmptyGold);
    }
    let by_id: HashMap<&str, &LabeledDocument> =
        predictions.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut cm = ConfusionMatrix::default();
    for (doc_id, index, gold_type) in gold.iter() {
        let label = by_id
            .get(doc_id)
            .and_then(|d| d.labels.get(index))
            .ok_or_else(|| Error::MissingPrediction {
                doc_id: doc_id.to_string(),
                index,
            })?;
        cm.add(gold_type, label.section_type());
    }
    Ok(metrics_from_confusion(&cm))
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"))
}

/// Aligned text table: one row per type, then macro and micro rows.
pub fn render_table(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>9} {:>6} {:>6} {:>7}",
        "type", "precision", "recall", "f1", "support"
    );
    let mut row = |name: &str, s: &Scores, support: String| {
        let _ = writeln!(
            out,
            "{:<14} {:>9} {:>6} {:>6} {:>7}",
            name,
            fmt_metric(s.precision),
            fmt_metric(s.recall),
            fmt_metric(s.f1),
            support
        );
    };
    for m in &report.per_type {
        row(m.section_type.name(), &m.scores, m.support.to_string());
    }
    row("overall-macro", &report.macro_avg, report.evaluated.to_string());
    row("overall-micro", &report.micro_avg, report.evaluated.to_string());
    out
}

/// One row of an annotation manifest; `gold_type` is left for the annotator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AnnotationRow {
    pub doc_id: String,
    pub section_index: usize,
    pub discipline: String,
    pub predicted_type: SectionType,
    pub heading: String,
    pub body_snippet: String,
    pub gold_type: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AnnotationManifest {
    pub rows: Vec<AnnotationRow>,
    /// Types with fewer than `per_type` predicted instances: type → available.
    pub shortfalls: BTreeMap<SectionType, usize>,
}

impl AnnotationManifest {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "doc_id",
                "section_index",
                "discipline",
                "predicted_type",
                "heading",
                "body_snippet",
                "gold_type",
            ])?;
        }
        w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
    }
}

const SNIPPET_TOKENS: usize = 50;

fn type_rng(seed: u64, ty: SectionType) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(ty.name().as_bytes());
    let mut key = [0u8; 32];
    key.copy_from_slice(&h.finalize());
    ChaCha8Rng::from_seed(key)
}

/// Draws up to `per_type` sections predicted as each type, deterministically
/// for a given seed. `corpus` supplies heading and body text by document id.
pub fn stratified_gold_sampler(
    corpus: &[Document],
    labeled: &[LabeledDocument],
    per_type: usize,
    seed: u64,
) -> Result<AnnotationManifest> {
    let docs: HashMap<&str, &Document> = corpus.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut pools: BTreeMap<SectionType, Vec<(&str, usize)>> = BTreeMap::new();
    for d in labeled {
        for (i, label) in d.labels.iter().enumerate() {
            if let Some(t) = label.section_type() {
                pools.entry(t).or_default().push((d.id.as_str(), i));
            }
        }
    }
    let mut rows = Vec::new();
    let mut shortfalls = BTreeMap::new();
    for ty in SectionType::ALL {
        let mut pool = pools.remove(&ty).unwrap_or_default();
        pool.sort();
        if pool.len() < per_type {
            shortfalls.insert(ty, pool.len());
        }
        let take = per_type.min(pool.len());
        let mut chosen: Vec<(&str, usize)> =
            rand::seq::index::sample(&mut type_rng(seed, ty), pool.len(), take)
                .into_iter()
                .map(|i| pool[i])
                .collect();
        chosen.sort();
        for (doc_id, index) in chosen {
            let doc = docs.get(doc_id).ok_or_else(|| {
                Error::InvalidDocument(format!("labeled document {doc_id:?} not in corpus"))
            })?;
            let section = doc.sections.get(index).ok_or_else(|| {
                Error::InvalidDocument(format!("{doc_id:?} has no section {index}"))
            })?;
            rows.push(AnnotationRow {
                doc_id: doc_id.to_string(),
                section_index: index,
                discipline: doc.discipline.as_str().to_string(),
                predicted_type: ty,
                heading: section.heading.clone(),
                body_snippet: section
                    .body
                    .split_whitespace()
                    .take(SNIPPET_TOKENS)
                    .collect::<Vec<_>>()
                    .join(" "),
                gold_type: String::new(),
            });
        }
    }
    Ok(AnnotationManifest { rows, shortfalls })
}
