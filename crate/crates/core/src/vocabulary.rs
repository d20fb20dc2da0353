//! Heading normalization, heading frequency statistics and the structural
//! vocabulary of seven canonical section types.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Section};
use crate::error::{Error, Result};

/// The canonical section types. Declaration order is the canonical order,
/// used for tie-breaking and display everywhere.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum SectionType {
    Introduction,
    Background,
    Methods,
    Results,
    Analysis,
    Discussion,
    Conclusion,
}

impl SectionType {
    pub const COUNT: usize = 7;

    pub const ALL: [SectionType; Self::COUNT] = [
        SectionType::Introduction,
        SectionType::Background,
        SectionType::Methods,
        SectionType::Results,
        SectionType::Analysis,
        SectionType::Discussion,
        SectionType::Conclusion,
    ];

    /// Position in canonical order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SectionType::Introduction => "introduction",
            SectionType::Background => "background",
            SectionType::Methods => "methods",
            SectionType::Results => "results",
            SectionType::Analysis => "analysis",
            SectionType::Discussion => "discussion",
            SectionType::Conclusion => "conclusion",
        }
    }
}

impl fmt::Display for SectionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SectionType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_lowercase();
        Self::ALL
            .into_iter()
            .find(|ty| ty.name() == t)
            .ok_or_else(|| Error::UnknownSectionType(s.to_string()))
    }
}

// Leading enumeration tokens: "3", "3.", "3.1.", "(3)", "3)", roman "IV.",
// single letters "A." / "a)".
static ENUMERATION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:\(?[0-9]+(?:\.[0-9]+)*[.):]?|[ivxlcdm]+[.)]|\(?[a-z][.)])$").unwrap()
});

fn is_enumeration(token: &str) -> bool {
    ENUMERATION.is_match(token)
}

fn is_number(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c.is_ascii_digit())
}

/// Normalizes a raw section heading.
///
/// Lowercases, strips leading enumeration ("3.", "3.1", "IV.", "A."),
/// replaces every non-alphanumeric character with a space, collapses
/// whitespace and trims. The result may be empty. Idempotent.
pub fn normalize_heading(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let mut tokens = lowered.split_whitespace().peekable();
    while tokens.peek().is_some_and(|t| is_enumeration(t)) {
        tokens.next();
    }
    let rest: Vec<&str> = tokens.collect();
    let cleaned: String = rest
        .join(" ")
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    // Punctuation removal can expose bare numbers ("#3 results" -> "3 results").
    let mut words: Vec<&str> = cleaned.split_whitespace().collect();
    let numeric_prefix = words.iter().take_while(|w| is_number(w)).count();
    words.drain(..numeric_prefix);
    words.join(" ")
}

/// Normalized heading → discipline → count.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadingFrequencyTable {
    entries: BTreeMap<String, BTreeMap<String, u64>>,
    total: u64,
}

impl HeadingFrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one occurrence. Empty headings are ignored.
    pub fn add(&mut self, heading: &str, discipline: &str) {
        if heading.is_empty() {
            return;
        }
        *self
            .entries
            .entry(heading.to_string())
            .or_default()
            .entry(discipline.to_string())
            .or_insert(0) += 1;
        self.total += 1;
    }

    /// Associative merge of two tables.
    pub fn merge(mut self, other: HeadingFrequencyTable) -> Self {
        for (heading, per_disc) in other.entries {
            let slot = self.entries.entry(heading).or_default();
            for (disc, n) in per_disc {
                *slot.entry(disc).or_insert(0) += n;
            }
        }
        self.total += other.total;
        self
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of distinct normalized headings.
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn count(&self, heading: &str, discipline: &str) -> u64 {
        self.entries
            .get(heading)
            .and_then(|m| m.get(discipline))
            .copied()
            .unwrap_or(0)
    }

    pub fn heading_total(&self, heading: &str) -> u64 {
        self.entries
            .get(heading)
            .map(|m| m.values().sum())
            .unwrap_or(0)
    }

    pub fn discipline_count(&self, heading: &str) -> usize {
        self.entries.get(heading).map_or(0, |m| m.len())
    }

    /// All disciplines seen anywhere in the table.
    pub fn disciplines(&self) -> BTreeSet<&str> {
        self.entries
            .values()
            .flat_map(|m| m.keys().map(String::as_str))
            .collect()
    }

    /// (heading, total count) pairs in heading order.
    pub fn totals(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries
            .iter()
            .map(|(h, m)| (h.as_str(), m.values().sum()))
    }

    pub fn entries(&self) -> &BTreeMap<String, BTreeMap<String, u64>> {
        &self.entries
    }
}

/// Tallies normalized headings per discipline, one increment per section
/// with a non-empty normalized heading.
pub fn count_headings(corpus: &[Document]) -> HeadingFrequencyTable {
    corpus
        .par_iter()
        .fold(HeadingFrequencyTable::new, |mut table, doc| {
            for section in &doc.sections {
                table.add(&normalize_heading(&section.heading), doc.discipline.as_str());
            }
            table
        })
        .reduce(HeadingFrequencyTable::new, HeadingFrequencyTable::merge)
}

/// Fraction of distinct normalized headings that occur exactly once.
pub fn singleton_fraction(table: &HeadingFrequencyTable) -> Result<f64> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let singletons = table.totals().filter(|&(_, n)| n == 1).count();
    Ok(singletons as f64 / table.distinct() as f64)
}

/// Alias map as stored on disk: type name → list of headings.
pub type AliasMap = BTreeMap<String, Vec<String>>;

/// Never a section type: it occurs once per paper at a fixed location.
const EXCLUDED_HEADING: &str = "abstract";

fn default_aliases(ty: SectionType) -> &'static [&'static str] {
    match ty {
        SectionType::Introduction => &["introduction", "intro"],
        SectionType::Background => &["background", "related work", "literature review"],
        SectionType::Methods => &[
            "methods",
            "method",
            "materials and methods",
            "methodology",
            "experimental",
        ],
        SectionType::Results => &["results", "result", "findings"],
        SectionType::Analysis => &["analysis", "analyses"],
        SectionType::Discussion => &["discussion", "discussions"],
        SectionType::Conclusion => &[
            "conclusion",
            "conclusions",
            "summary",
            "concluding remarks",
        ],
    }
}

/// The seven section types together with the normalized headings that map
/// onto each of them. Alias sets are disjoint and always contain the type's
/// own name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructuralVocabulary {
    aliases: BTreeMap<SectionType, BTreeSet<String>>,
    lookup: HashMap<String, SectionType>,
}

impl Default for StructuralVocabulary {
    fn default() -> Self {
        let mut vocab = Self::empty();
        for ty in SectionType::ALL {
            for alias in default_aliases(ty) {
                vocab
                    .insert(ty, alias)
                    .expect("default alias map is disjoint");
            }
        }
        vocab
    }
}

impl StructuralVocabulary {
    fn empty() -> Self {
        let mut vocab = Self {
            aliases: BTreeMap::new(),
            lookup: HashMap::new(),
        };
        for ty in SectionType::ALL {
            vocab.aliases.insert(ty, BTreeSet::new());
            vocab.insert(ty, ty.name()).expect("canonical names are distinct");
        }
        vocab
    }

    fn insert(&mut self, ty: SectionType, alias: &str) -> Result<()> {
        let alias = normalize_heading(alias);
        if alias.is_empty() {
            return Err(Error::InvalidVocabulary(format!(
                "empty alias for type {ty}"
            )));
        }
        if alias == EXCLUDED_HEADING {
            return Err(Error::InvalidVocabulary(
                "\"abstract\" cannot be aliased to a section type".into(),
            ));
        }
        match self.lookup.get(&alias) {
            Some(&existing) if existing != ty => Err(Error::InvalidVocabulary(format!(
                "alias {alias:?} maps to both {existing} and {ty}"
            ))),
            Some(_) => Ok(()),
            None => {
                self.lookup.insert(alias.clone(), ty);
                self.aliases.entry(ty).or_default().insert(alias);
                Ok(())
            }
        }
    }

    /// Builds a vocabulary from a complete alias map. Each type's canonical
    /// name is added to its own set.
    pub fn from_alias_map(map: &AliasMap) -> Result<Self> {
        let mut vocab = Self::empty();
        vocab.extend(map)?;
        Ok(vocab)
    }

    /// Returns a copy extended by `overrides`; disjointness is enforced.
    pub fn with_overrides(&self, overrides: &AliasMap) -> Result<Self> {
        let mut vocab = self.clone();
        vocab.extend(overrides)?;
        Ok(vocab)
    }

    fn extend(&mut self, map: &AliasMap) -> Result<()> {
        for (name, aliases) in map {
            let ty: SectionType = name.parse()?;
            for alias in aliases {
                self.insert(ty, alias)?;
            }
        }
        Ok(())
    }

    pub fn aliases(&self, ty: SectionType) -> &BTreeSet<String> {
        &self.aliases[&ty]
    }

    /// Looks up an already-normalized heading.
    pub fn lookup(&self, normalized: &str) -> Option<SectionType> {
        self.lookup.get(normalized).copied()
    }

    /// Normalizes a raw heading and looks it up.
    pub fn match_heading(&self, raw: &str) -> Option<SectionType> {
        self.lookup(&normalize_heading(raw))
    }

    pub fn to_alias_map(&self) -> AliasMap {
        self.aliases
            .iter()
            .map(|(ty, set)| (ty.name().to_string(), set.iter().cloned().collect()))
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let map: AliasMap = crate::io::read_json(path)?;
        Self::from_alias_map(&map)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, &self.to_alias_map())
    }
}

impl Serialize for StructuralVocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_alias_map().serialize(s)
    }
}

impl<'de> Deserialize<'de> for StructuralVocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let map = AliasMap::deserialize(d)?;
        Self::from_alias_map(&map).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopHeading {
    pub heading: String,
    pub count: u64,
    pub disciplines: usize,
    pub mapped_to: Option<SectionType>,
}

/// Outcome of [`derive_vocabulary`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VocabularyReport {
    pub top_k: usize,
    pub min_disciplines: usize,
    pub disciplines: usize,
    pub distinct_headings: usize,
    pub total_headings: u64,
    pub singleton_fraction: f64,
    pub top_headings: Vec<TopHeading>,
    pub unmapped: Vec<String>,
    /// Total table count of every alias heading, per type.
    pub seed_heading_counts: BTreeMap<SectionType, u64>,
    pub warnings: Vec<String>,
}

/// Half the disciplines present, rounded up (at least 1).
pub fn default_min_disciplines(table: &HeadingFrequencyTable) -> usize {
    table.disciplines().len().div_ceil(2).max(1)
}

/// Selects the `top_k` most frequent headings used by at least
/// `min_disciplines` disciplines and maps them onto section types through
/// the default alias map extended by `overrides`.
///
/// `min_disciplines = None` uses [`default_min_disciplines`]. Frequency ties
/// are ordered by heading text.
pub fn derive_vocabulary(
    table: &HeadingFrequencyTable,
    overrides: Option<&AliasMap>,
    top_k: usize,
    min_disciplines: Option<usize>,
) -> Result<(StructuralVocabulary, VocabularyReport)> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let vocab = match overrides {
        Some(o) => StructuralVocabulary::default().with_overrides(o)?,
        None => StructuralVocabulary::default(),
    };
    let min_disciplines = min_disciplines.unwrap_or_else(|| default_min_disciplines(table));

    let mut candidates: Vec<(&str, u64)> = table
        .totals()
        .filter(|&(h, _)| h != EXCLUDED_HEADING && table.discipline_count(h) >= min_disciplines)
        .collect();
    candidates.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    candidates.truncate(top_k);

    let top_headings: Vec<TopHeading> = candidates
        .iter()
        .map(|&(heading, count)| TopHeading {
            heading: heading.to_string(),
            count,
            disciplines: table.discipline_count(heading),
            mapped_to: vocab.lookup(heading),
        })
        .collect();
    let unmapped: Vec<String> = top_headings
        .iter()
        .filter(|t| t.mapped_to.is_none())
        .map(|t| t.heading.clone())
        .collect();

    let mut warnings = Vec::new();
    if top_headings.iter().all(|t| t.mapped_to.is_none()) {
        warnings.push(
            "no top heading matched any alias; using the default vocabulary unchanged".into(),
        );
    }
    let seed_heading_counts = SectionType::ALL
        .into_iter()
        .map(|ty| {
            let n = vocab.aliases(ty).iter().map(|a| table.heading_total(a)).sum();
            (ty, n)
        })
        .collect();

    let report = VocabularyReport {
        top_k,
        min_disciplines,
        disciplines: table.disciplines().len(),
        distinct_headings: table.distinct(),
        total_headings: table.total(),
        singleton_fraction: singleton_fraction(table)?,
        top_headings,
        unmapped,
        seed_heading_counts,
        warnings,
    };
    Ok((vocab, report))
}

/// A section whose heading matched an alias, with its type.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeedInstance<'a> {
    pub doc_id: &'a str,
    pub section: &'a Section,
    pub section_type: SectionType,
}

/// Every section whose normalized heading belongs to an alias set, in corpus
/// order.
pub fn seed_instances<'a>(
    corpus: &'a [Document],
    vocab: &StructuralVocabulary,
) -> Vec<SeedInstance<'a>> {
    corpus
        .iter()
        .flat_map(|doc| {
            doc.sections.iter().filter_map(move |section| {
                vocab.match_heading(&section.heading).map(|ty| SeedInstance {
                    doc_id: &doc.id,
                    section,
                    section_type: ty,
                })
            })
        })
        .collect()
}
