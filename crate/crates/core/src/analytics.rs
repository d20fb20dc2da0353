//! Structural-archetype statistics over labeled corpora: type sequences,
//! positional histograms, transition matrices and discipline comparisons.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrofit::LabeledDocument;
use crate::vocabulary::SectionType;

pub const DEFAULT_BINS: usize = 20;
const N: usize = SectionType::COUNT;

/// What to do with unclassified sections when building sequences.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnclassifiedPolicy {
    /// Remove them; their neighbours become adjacent.
    #[default]
    Drop,
    /// Treat them as a break; no transition is counted across one.
    KeepAsGap,
}

impl std::str::FromStr for UnclassifiedPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop" => Ok(Self::Drop),
            "keep-as-gap" | "gap" => Ok(Self::KeepAsGap),
            _ => Err(Error::InvalidParameter(format!("unknown unclassified policy {s:?}"))),
        }
    }
}

/// The ordered section types of one document, split into runs of adjacent
/// types. Under [`UnclassifiedPolicy::Drop`] there is at most one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TypeSequence {
    pub doc_id: String,
    pub discipline: String,
    pub segments: Vec<Vec<SectionType>>,
}

impl TypeSequence {
    pub fn types(&self) -> impl Iterator<Item = SectionType> + '_ {
        self.segments.iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Consecutive (previous, next) pairs within each run.
    pub fn transitions(&self) -> impl Iterator<Item = (SectionType, SectionType)> + '_ {
        self.segments
            .iter()
            .flat_map(|seg| seg.windows(2).map(|w| (w[0], w[1])))
    }
}

pub fn extract_sequence(doc: &LabeledDocument, policy: UnclassifiedPolicy) -> TypeSequence {
    let mut segments: Vec<Vec<SectionType>> = vec![Vec::new()];
    for label in &doc.labels {
        match (label.section_type(), policy) {
            (Some(t), _) => segments.last_mut().unwrap().push(t),
            (None, UnclassifiedPolicy::Drop) => {}
            (None, UnclassifiedPolicy::KeepAsGap) => {
                if !segments.last().unwrap().is_empty() {
                    segments.push(Vec::new());
                }
            }
        }
    }
    segments.retain(|s| !s.is_empty());
    TypeSequence {
        doc_id: doc.id.clone(),
        discipline: doc.discipline.as_str().to_string(),
        segments,
    }
}

/// Bin of section `index` in a document of `n` sections: the midpoint
/// position `(index + 0.5) / n` scaled to `bins`, clamped to the last bin.
/// Computed as `floor((2·index + 1)·bins / 2n)` in integers so positions
/// that fall exactly on a bin edge are never rounded into the lower bin.
pub fn position_bin(index: usize, n: usize, bins: usize) -> usize {
    ((2 * index + 1) * bins / (2 * n)).min(bins - 1)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistogramMode {
    /// Plain counts.
    Raw,
    /// Counts divided by the discipline's number of classified sections.
    #[default]
    Frequency,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositionHistogram {
    pub section_type: SectionType,
    pub counts: Vec<u64>,
    /// Counts or frequencies, according to the owning set's mode.
    pub values: Vec<f64>,
}

/// One histogram per section type for a discipline, sharing bins and mode.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositionHistogramSet {
    pub discipline: String,
    pub bins: usize,
    pub mode: HistogramMode,
    /// Number of classified sections counted.
    pub total: u64,
    /// Canonical type order.
    pub histograms: Vec<PositionHistogram>,
}

impl PositionHistogramSet {
    pub fn get(&self, ty: SectionType) -> &PositionHistogram {
        &self.histograms[ty.index()]
    }

    /// Lower and upper edge of `bin` on [0, 1].
    pub fn bin_edges(&self, bin: usize) -> (f64, f64) {
        (bin as f64 / self.bins as f64, (bin + 1) as f64 / self.bins as f64)
    }

    pub fn frequency(&self, ty: SectionType, bin: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.get(ty).counts[bin] as f64 / self.total as f64
        }
    }
}

fn add_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    a
}

/// Positional distribution of each section type within one discipline.
/// Unclassified sections are excluded; documents of other disciplines are
/// ignored.
pub fn position_histogram(
    labeled: &[LabeledDocument],
    discipline: &str,
    bins: usize,
    mode: HistogramMode,
) -> Result<PositionHistogramSet> {
    if bins < 2 {
        return Err(Error::InvalidParameter("at least 2 bins are required".into()));
    }
    // flat [type][bin] tally
    let flat = labeled
        .par_iter()
        .filter(|d| d.discipline.as_str() == discipline)
        .fold(
            || vec![0u64; N * bins],
            |mut acc, doc| {
                let n = doc.labels.len();
                for (i, label) in doc.labels.iter().enumerate() {
                    if let Some(t) = label.section_type() {
                        acc[t.index() * bins + position_bin(i, n, bins)] += 1;
                    }
                }
                acc
            },
        )
        .reduce(|| vec![0u64; N * bins], add_counts);
    let total: u64 = flat.iter().sum();
    let histograms = SectionType::ALL
        .into_iter()
        .map(|t| {
            let counts = flat[t.index() * bins..(t.index() + 1) * bins].to_vec();
            let values = counts
                .iter()
                .map(|&c| match mode {
                    HistogramMode::Raw => c as f64,
                    HistogramMode::Frequency if total == 0 => 0.0,
                    HistogramMode::Frequency => c as f64 / total as f64,
                })
                .collect();
            PositionHistogram {
                section_type: t,
                counts,
                values,
            }
        })
        .collect();
    Ok(PositionHistogramSet {
        discipline: discipline.to_string(),
        bins,
        mode,
        total,
        histograms,
    })
}

/// First-order transition statistics for one discipline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionMatrix {
    pub discipline: String,
    /// `counts[from][to]`, canonical type order.
    pub counts: [[u64; N]; N],
    /// Row-normalized counts; rows without any outgoing transition are zero.
    pub probs: [[f64; N]; N],
}

impl TransitionMatrix {
    pub fn from_counts(discipline: &str, counts: [[u64; N]; N]) -> Self {
        let mut probs = [[0.0; N]; N];
        for (row, prow) in counts.iter().zip(probs.iter_mut()) {
            let total: u64 = row.iter().sum();
            if total > 0 {
                for (c, p) in row.iter().zip(prow.iter_mut()) {
                    *p = *c as f64 / total as f64;
                }
            }
        }
        Self {
            discipline: discipline.to_string(),
            counts,
            probs,
        }
    }

    pub fn prob(&self, from: SectionType, to: SectionType) -> f64 {
        self.probs[from.index()][to.index()]
    }

    pub fn support(&self, from: SectionType, to: SectionType) -> u64 {
        self.counts[from.index()][to.index()]
    }

    pub fn row_total(&self, from: SectionType) -> u64 {
        self.counts[from.index()].iter().sum()
    }
}

fn count_transitions<'a, I>(sequences: I) -> [[u64; N]; N]
where
    I: IntoIterator<Item = &'a TypeSequence>,
{
    let mut counts = [[0u64; N]; N];
    for seq in sequences {
        for (a, b) in seq.transitions() {
            counts[a.index()][b.index()] += 1;
        }
    }
    counts
}

/// Transition matrix over already extracted sequences.
pub fn transition_matrix_from_sequences(discipline: &str, sequences: &[TypeSequence]) -> TransitionMatrix {
    TransitionMatrix::from_counts(discipline, count_transitions(sequences))
}

/// Maximum-likelihood probabilities of type `b` immediately following type
/// `a` within the discipline's documents.
pub fn transition_matrix(
    labeled: &[LabeledDocument],
    discipline: &str,
    policy: UnclassifiedPolicy,
) -> TransitionMatrix {
    let counts = labeled
        .par_iter()
        .filter(|d| d.discipline.as_str() == discipline)
        .map(|d| count_transitions([&extract_sequence(d, policy)]))
        .reduce(
            || [[0u64; N]; N],
            |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(b) {
                    ra.iter_mut().zip(rb).for_each(|(x, y)| *x += y);
                }
                a
            },
        );
    TransitionMatrix::from_counts(discipline, counts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypeDifference {
    pub section_type: SectionType,
    /// frequency(A) − frequency(B) per bin.
    pub differences: Vec<f64>,
    pub total_abs_difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DisciplineComparison {
    pub a: String,
    pub b: String,
    pub bins: usize,
    /// Canonical type order.
    pub per_type: Vec<TypeDifference>,
    /// Types by decreasing total absolute difference (ties in canonical order).
    pub ranking: Vec<SectionType>,
}

/// Per-type, per-bin frequency differences A − B.
pub fn compare_disciplines(
    a: &PositionHistogramSet,
    b: &PositionHistogramSet,
) -> Result<DisciplineComparison> {
    if a.bins != b.bins {
        return Err(Error::Incomparable(format!("{} vs {} bins", a.bins, b.bins)));
    }
    if a.mode != HistogramMode::Frequency || b.mode != HistogramMode::Frequency {
        return Err(Error::Incomparable("both sets must be in frequency mode".into()));
    }
    let per_type: Vec<TypeDifference> = SectionType::ALL
        .into_iter()
        .map(|t| {
            let differences: Vec<f64> = a
                .get(t)
                .values
                .iter()
                .zip(&b.get(t).values)
                .map(|(x, y)| x - y)
                .collect();
            let total_abs_difference = differences.iter().map(|d| d.abs()).sum();
            TypeDifference {
                section_type: t,
                differences,
                total_abs_difference,
            }
        })
        .collect();
    let mut ranking: Vec<&TypeDifference> = per_type.iter().collect();
    ranking.sort_by(|x, y| {
        y.total_abs_difference
            .total_cmp(&x.total_abs_difference)
            .then(x.section_type.cmp(&y.section_type))
    });
    let ranking = ranking.into_iter().map(|d| d.section_type).collect();
    Ok(DisciplineComparison {
        a: a.discipline.clone(),
        b: b.discipline.clone(),
        bins: a.bins,
        per_type,
        ranking,
    })
}

/// Disciplines present in a labeled corpus, sorted.
pub fn disciplines(labeled: &[LabeledDocument]) -> Vec<String> {
    labeled
        .iter()
        .map(|d| d.discipline.as_str().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Long-format CSV: `discipline,type,bin,low,high,count,frequency`.
pub fn positions_csv(sets: &[PositionHistogramSet]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["discipline", "type", "bin", "low", "high", "count", "frequency"])?;
    for set in sets {
        for h in &set.histograms {
            for (bin, count) in h.counts.iter().enumerate() {
                let (low, high) = set.bin_edges(bin);
                w.write_record([
                    set.discipline.clone(),
                    h.section_type.to_string(),
                    bin.to_string(),
                    low.to_string(),
                    high.to_string(),
                    count.to_string(),
                    set.frequency(h.section_type, bin).to_string(),
                ])?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
}

/// Long-format CSV: `discipline,from,to,prob,support`.
pub fn transitions_csv(matrices: &[TransitionMatrix]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["discipline", "from", "to", "prob", "support"])?;
    for m in matrices {
        for from in SectionType::ALL {
            for to in SectionType::ALL {
                w.write_record([
                    m.discipline.clone(),
                    from.to_string(),
                    to.to_string(),
                    m.prob(from, to).to_string(),
                    m.support(from, to).to_string(),
                ])?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
}

/// CSV: `a,b,type,bin,low,high,difference`.
pub fn comparison_csv(c: &DisciplineComparison) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["a", "b", "type", "bin", "low", "high", "difference"])?;
    for t in &c.per_type {
        for (bin, d) in t.differences.iter().enumerate() {
            w.write_record([
                c.a.clone(),
                c.b.clone(),
                t.section_type.to_string(),
                bin.to_string(),
                (bin as f64 / c.bins as f64).to_string(),
                ((bin + 1) as f64 / c.bins as f64).to_string(),
                d.to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
}
