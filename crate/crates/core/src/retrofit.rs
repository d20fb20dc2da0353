//! Nearest-centroid classification with per-type rejection thresholds.
//!
//! Each section type is represented by the elementwise mean of its seed
//! embeddings. A type's threshold is `weight` times the distance from that
//! mean to its furthest seed. A section goes to the nearest centroid, unless
//! it lies beyond that centroid's threshold, in which case it is
//! unclassified.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Discipline, Document};
use crate::embedding::{build_input_text, Embedder, EmbeddingVector, ProviderDescriptor};
use crate::error::{Error, Result};
use crate::vocabulary::{seed_instances, SectionType, StructuralVocabulary};

pub const DEFAULT_WEIGHT: f64 = 0.5;
pub const DEFAULT_MIN_MEMBERS: usize = 2;

/// Vector norm used for centroid distances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    #[default]
    L2,
}

impl std::str::FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            _ => Err(Error::InvalidParameter(format!("unknown norm {s:?}"))),
        }
    }
}

fn check_dims(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(())
}

/// Distance between two vectors under `norm`.
pub fn distance_with(norm: Norm, a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    check_dims(a, b)?;
    let pairs = a.as_slice().iter().zip(b.as_slice());
    Ok(match norm {
        Norm::L2 => pairs
            .map(|(x, y)| {
                let d = x - y;
                d * d
            })
            .sum::<f64>()
            .sqrt(),
        Norm::L1 => pairs.map(|(x, y)| (x - y).abs()).sum(),
    })
}

/// Euclidean distance.
pub fn distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    distance_with(Norm::L2, a, b)
}

/// Elementwise arithmetic mean.
pub fn compute_centroid(instances: &[EmbeddingVector]) -> Result<EmbeddingVector> {
    let first = instances.first().ok_or(Error::EmptyInstances)?;
    let mut sums = vec![0.0f64; first.dim()];
    for v in instances {
        check_dims(first, v)?;
        for (s, x) in sums.iter_mut().zip(v.as_slice()) {
            *s += x;
        }
    }
    let n = instances.len() as f64;
    EmbeddingVector::new(sums.into_iter().map(|s| s / n).collect())
}

/// Largest distance from `centroid` to any instance.
pub fn max_member_distance(
    norm: Norm,
    centroid: &EmbeddingVector,
    instances: &[EmbeddingVector],
) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::EmptyInstances);
    }
    instances.iter().try_fold(0.0f64, |acc, v| {
        Ok(acc.max(distance_with(norm, v, centroid)?))
    })
}

/// `weight` × the distance from `centroid` to its furthest instance (L2).
pub fn compute_threshold(
    centroid: &EmbeddingVector,
    instances: &[EmbeddingVector],
    weight: f64,
) -> Result<f64> {
    check_weight(weight)?;
    Ok(weight * max_member_distance(Norm::L2, centroid, instances)?)
}

fn check_weight(weight: f64) -> Result<()> {
    if weight.is_finite() && weight > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("weight must be positive, got {weight}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub section_type: SectionType,
    pub vector: EmbeddingVector,
    pub member_count: usize,
    pub max_member_distance: f64,
    pub threshold: f64,
}

/// Outcome of classifying one vector. Both variants carry the nearest type
/// and the distance to it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Label {
    Classified {
        section_type: SectionType,
        distance: f64,
    },
    Unclassified {
        nearest: SectionType,
        distance: f64,
    },
}

impl Label {
    pub fn section_type(&self) -> Option<SectionType> {
        match *self {
            Label::Classified { section_type, .. } => Some(section_type),
            Label::Unclassified { .. } => None,
        }
    }

    pub fn nearest(&self) -> SectionType {
        match *self {
            Label::Classified { section_type, .. } => section_type,
            Label::Unclassified { nearest, .. } => nearest,
        }
    }

    pub fn distance(&self) -> f64 {
        match *self {
            Label::Classified { distance, .. } | Label::Unclassified { distance, .. } => distance,
        }
    }

    pub fn is_classified(&self) -> bool {
        matches!(self, Label::Classified { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedType {
    pub section_type: SectionType,
    pub seeds: usize,
}

/// Fitted centroids and thresholds, tied to the provider that produced the
/// seed embeddings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct RetrofitModel {
    weight: f64,
    norm: Norm,
    provider: ProviderDescriptor,
    /// Canonical type order.
    centroids: Vec<Centroid>,
    seed_counts: BTreeMap<SectionType, usize>,
    excluded: Vec<ExcludedType>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    weight: f64,
    norm: Norm,
    provider: ProviderDescriptor,
    centroids: BTreeMap<SectionType, CentroidFile>,
    seed_counts: BTreeMap<SectionType, usize>,
    #[serde(default)]
    excluded: Vec<ExcludedType>,
}

#[derive(Serialize, Deserialize)]
struct CentroidFile {
    vector: EmbeddingVector,
    member_count: usize,
    max_member_distance: f64,
    threshold: f64,
}

impl From<RetrofitModel> for ModelFile {
    fn from(m: RetrofitModel) -> Self {
        ModelFile {
            weight: m.weight,
            norm: m.norm,
            provider: m.provider,
            centroids: m
                .centroids
                .into_iter()
                .map(|c| {
                    (
                        c.section_type,
                        CentroidFile {
                            vector: c.vector,
                            member_count: c.member_count,
                            max_member_distance: c.max_member_distance,
                            threshold: c.threshold,
                        },
                    )
                })
                .collect(),
            seed_counts: m.seed_counts,
            excluded: m.excluded,
        }
    }
}

impl TryFrom<ModelFile> for RetrofitModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        check_weight(f.weight)?;
        if f.centroids.is_empty() {
            return Err(Error::InvalidParameter("model has no centroids".into()));
        }
        let mut centroids = Vec::with_capacity(f.centroids.len());
        for (section_type, c) in f.centroids {
            if c.vector.dim() != f.provider.dim {
                return Err(Error::DimMismatch {
                    expected: f.provider.dim,
                    actual: c.vector.dim(),
                });
            }
            if c.member_count == 0 || c.max_member_distance < 0.0 || c.threshold < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "invalid centroid statistics for {section_type}"
                )));
            }
            centroids.push(Centroid {
                section_type,
                vector: c.vector,
                member_count: c.member_count,
                max_member_distance: c.max_member_distance,
                threshold: c.threshold,
            });
        }
        Ok(RetrofitModel {
            weight: f.weight,
            norm: f.norm,
            provider: f.provider,
            centroids,
            seed_counts: f.seed_counts,
            excluded: f.excluded,
        })
    }
}

/// Fitting parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub weight: f64,
    pub min_members: usize,
    pub norm: Norm,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            weight: DEFAULT_WEIGHT,
            min_members: DEFAULT_MIN_MEMBERS,
            norm: Norm::L2,
        }
    }
}

/// Fits one centroid per type that has at least `min_members` seeds; other
/// types are recorded in [`RetrofitModel::excluded`].
pub fn fit(
    seeds: &[(EmbeddingVector, SectionType)],
    provider: &ProviderDescriptor,
    options: FitOptions,
) -> Result<RetrofitModel> {
    check_weight(options.weight)?;
    let mut grouped: BTreeMap<SectionType, Vec<EmbeddingVector>> = BTreeMap::new();
    for (v, ty) in seeds {
        if v.dim() != provider.dim {
            return Err(Error::DimMismatch {
                expected: provider.dim,
                actual: v.dim(),
            });
        }
        grouped.entry(*ty).or_default().push(v.clone());
    }

    let mut centroids = Vec::new();
    let mut excluded = Vec::new();
    let mut seed_counts = BTreeMap::new();
    for (ty, members) in grouped {
        seed_counts.insert(ty, members.len());
        if members.len() < options.min_members.max(1) {
            excluded.push(ExcludedType {
                section_type: ty,
                seeds: members.len(),
            });
            continue;
        }
        let vector = compute_centroid(&members)?;
        let max_member_distance = max_member_distance(options.norm, &vector, &members)?;
        centroids.push(Centroid {
            section_type: ty,
            vector,
            member_count: members.len(),
            max_member_distance,
            threshold: options.weight * max_member_distance,
        });
    }
    if centroids.is_empty() {
        return Err(Error::NoQualifyingType {
            min_members: options.min_members,
        });
    }
    Ok(RetrofitModel {
        weight: options.weight,
        norm: options.norm,
        provider: provider.clone(),
        centroids,
        seed_counts,
        excluded,
    })
}

impl RetrofitModel {
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn provider(&self) -> &ProviderDescriptor {
        &self.provider
    }

    pub fn dim(&self) -> usize {
        self.provider.dim
    }

    pub fn centroids(&self) -> &[Centroid] {
        &self.centroids
    }

    pub fn centroid(&self, ty: SectionType) -> Option<&Centroid> {
        self.centroids.iter().find(|c| c.section_type == ty)
    }

    pub fn seed_counts(&self) -> &BTreeMap<SectionType, usize> {
        &self.seed_counts
    }

    pub fn excluded(&self) -> &[ExcludedType] {
        &self.excluded
    }

    /// Same centroids with thresholds recomputed for a different weight.
    pub fn with_weight(&self, weight: f64) -> Result<Self> {
        check_weight(weight)?;
        let mut m = self.clone();
        m.weight = weight;
        for c in &mut m.centroids {
            c.threshold = weight * c.max_member_distance;
        }
        Ok(m)
    }

    /// Nearest centroid (ties go to the earlier type in canonical order),
    /// rejected when farther than that centroid's threshold.
    pub fn classify(&self, v: &EmbeddingVector) -> Result<Label> {
        if v.dim() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                actual: v.dim(),
            });
        }
        let mut best: Option<(&Centroid, f64)> = None;
        for c in &self.centroids {
            let d = distance_with(self.norm, v, &c.vector)?;
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((c, d));
            }
        }
        let (c, distance) = best.expect("model has at least one centroid");
        Ok(if distance <= c.threshold {
            Label::Classified {
                section_type: c.section_type,
                distance,
            }
        } else {
            Label::Unclassified {
                nearest: c.section_type,
                distance,
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        crate::io::read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }
}

pub fn classify(v: &EmbeddingVector, model: &RetrofitModel) -> Result<Label> {
    model.classify(v)
}

/// Embeds every seed section of `corpus` and fits a model on them.
pub fn fit_corpus(
    corpus: &[Document],
    vocab: &StructuralVocabulary,
    embedder: &Embedder,
    max_tokens: usize,
    options: FitOptions,
) -> Result<RetrofitModel> {
    let seeds = seed_instances(corpus, vocab);
    let labeled = seeds
        .par_iter()
        .map(|s| {
            let text = build_input_text(s.section, max_tokens)?;
            Ok((embedder.embed(&text)?, s.section_type))
        })
        .collect::<Result<Vec<_>>>()?;
    fit(&labeled, embedder.descriptor(), options)
}

/// Labels for every section of one document, in section order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDocument {
    pub id: String,
    pub discipline: Discipline,
    pub labels: Vec<Label>,
}

/// Seed-heading matches ("before") and classifier output ("after") per
/// type for one discipline.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeCounts {
    pub sections: u64,
    pub before: BTreeMap<SectionType, u64>,
    pub after: BTreeMap<SectionType, u64>,
    pub unclassified: u64,
}

impl TypeCounts {
    fn zeroed() -> Self {
        let zeros: BTreeMap<_, _> = SectionType::ALL.into_iter().map(|t| (t, 0)).collect();
        Self {
            sections: 0,
            before: zeros.clone(),
            after: zeros,
            unclassified: 0,
        }
    }

    fn absorb(&mut self, other: &TypeCounts) {
        self.sections += other.sections;
        self.unclassified += other.unclassified;
        for (t, n) in &other.before {
            *self.before.entry(*t).or_insert(0) += n;
        }
        for (t, n) in &other.after {
            *self.after.entry(*t).or_insert(0) += n;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeforeAfterCounts {
    pub per_discipline: BTreeMap<String, TypeCounts>,
    pub overall: TypeCounts,
}

/// Counts from already-labeled documents; `corpus` and `labeled` must be
/// aligned document by document.
pub fn before_after_counts(
    corpus: &[Document],
    labeled: &[LabeledDocument],
    vocab: &StructuralVocabulary,
) -> BeforeAfterCounts {
    let mut per_discipline: BTreeMap<String, TypeCounts> = BTreeMap::new();
    for (doc, lab) in corpus.iter().zip(labeled) {
        let counts = per_discipline
            .entry(doc.discipline.as_str().to_string())
            .or_insert_with(TypeCounts::zeroed);
        for (section, label) in doc.sections.iter().zip(&lab.labels) {
            counts.sections += 1;
            if let Some(t) = vocab.match_heading(&section.heading) {
                *counts.before.get_mut(&t).unwrap() += 1;
            }
            match label.section_type() {
                Some(t) => *counts.after.get_mut(&t).unwrap() += 1,
                None => counts.unclassified += 1,
            }
        }
    }
    let mut overall = TypeCounts::zeroed();
    for c in per_discipline.values() {
        overall.absorb(c);
    }
    BeforeAfterCounts {
        per_discipline,
        overall,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrofitOutput {
    pub labeled: Vec<LabeledDocument>,
    pub counts: BeforeAfterCounts,
}

fn label_document(
    doc: &Document,
    model: &RetrofitModel,
    embedder: &Embedder,
    max_tokens: usize,
) -> Result<LabeledDocument> {
    let labels = doc
        .sections
        .iter()
        .map(|s| {
            let text = build_input_text(s, max_tokens)?;
            model.classify(&embedder.embed(&text)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledDocument {
        id: doc.id.clone(),
        discipline: doc.discipline.clone(),
        labels,
    })
}

/// Labels every section of `corpus`. Documents are processed in parallel and
/// returned in input order. On a provider failure the error reports how many
/// leading documents were labeled successfully.
pub fn retrofit_corpus(
    corpus: &[Document],
    model: &RetrofitModel,
    embedder: &Embedder,
    vocab: &StructuralVocabulary,
    max_tokens: usize,
) -> Result<RetrofitOutput> {
    model.provider().ensure_matches(embedder.descriptor())?;
    let results: Vec<Result<LabeledDocument>> = corpus
        .par_iter()
        .map(|doc| label_document(doc, model, embedder, max_tokens))
        .collect();
    let mut labeled = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(d) => labeled.push(d),
            Err(e) => {
                return Err(Error::RetrofitAborted {
                    completed_documents: labeled.len(),
                    source: Box::new(e),
                })
            }
        }
    }
    let counts = before_after_counts(corpus, &labeled, vocab);
    Ok(RetrofitOutput { labeled, counts })
}

pub fn save_labeled(path: &Path, docs: &[LabeledDocument]) -> Result<()> {
    let mut out = Vec::new();
    for d in docs {
        out.extend(serde_json::to_vec(d)?);
        out.push(b'\n');
    }
    crate::io::write_atomic(path, &out)
}

pub fn load_labeled(path: &Path) -> Result<Vec<LabeledDocument>> {
    let text = crate::io::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
