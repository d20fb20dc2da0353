//! Corpus loading, validation, conversion and per-discipline sampling.
//!
//! The on-disk corpus is UTF-8 JSONL, one document per line:
//!
//! ```json
//! {"id": "p1", "discipline": "Physics", "sections": [{"heading": "Introduction", "body": "..."}]}
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Discipline tag. Trimmed, non-empty, compared case-sensitively.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Discipline(String);

impl Discipline {
    pub fn new(name: &str) -> Result<Self> {
        let trimmed = name.trim();
        if trimmed.is_empty() {
            return Err(Error::InvalidDocument("empty discipline".into()));
        }
        Ok(Self(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Discipline {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Discipline::new(&s)
    }
}

impl From<Discipline> for String {
    fn from(d: Discipline) -> String {
        d.0
    }
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Section {
    /// 0-based position within the owning document.
    pub index: usize,
    pub heading: String,
    pub body: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub discipline: Discipline,
    pub sections: Vec<Section>,
}

impl Document {
    /// Builds a validated document; section indices are assigned in order.
    pub fn new<I, H, B>(id: &str, discipline: &str, sections: I) -> Result<Self>
    where
        I: IntoIterator<Item = (H, B)>,
        H: Into<String>,
        B: Into<String>,
    {
        if id.trim().is_empty() {
            return Err(Error::InvalidDocument("empty id".into()));
        }
        let discipline = Discipline::new(discipline)?;
        let sections: Vec<Section> = sections
            .into_iter()
            .enumerate()
            .map(|(index, (h, b))| Section {
                index,
                heading: h.into(),
                body: b.into(),
            })
            .collect();
        if sections.is_empty() {
            return Err(Error::InvalidDocument(format!("document {id:?} has no sections")));
        }
        if let Some(s) = sections
            .iter()
            .find(|s| s.heading.trim().is_empty() && s.body.trim().is_empty())
        {
            return Err(Error::InvalidDocument(format!(
                "document {id:?} section {} has neither heading nor body",
                s.index
            )));
        }
        Ok(Self {
            id: id.to_string(),
            discipline,
            sections,
        })
    }

    fn to_record(&self) -> Record {
        Record {
            id: self.id.clone(),
            discipline: self.discipline.as_str().to_string(),
            sections: self
                .sections
                .iter()
                .map(|s| RecordSection {
                    heading: s.heading.clone(),
                    body: s.body.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RecordSection {
    #[serde(default)]
    heading: String,
    #[serde(default)]
    body: String,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    discipline: String,
    sections: Vec<RecordSection>,
}

impl Record {
    fn into_document(self) -> Result<Document> {
        Document::new(
            &self.id,
            &self.discipline,
            self.sections.into_iter().map(|s| (s.heading, s.body)),
        )
    }
}

/// One line serialized in the corpus format (no trailing newline).
pub fn document_to_json(doc: &Document) -> String {
    serde_json::to_string(&doc.to_record()).expect("record serialization is infallible")
}

pub fn document_from_json(line: &str) -> Result<Document> {
    let record: Record = serde_json::from_str(line)?;
    record.into_document()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SkippedRecord {
    pub line: usize,
    pub reason: String,
}

/// Streaming reader over a corpus file.
///
/// Malformed records are an error in strict mode and skipped (and recorded)
/// otherwise. Duplicate ids are always an error. Blank lines are ignored.
pub struct CorpusReader<R> {
    lines: std::io::Lines<R>,
    path: PathBuf,
    line_no: usize,
    strict: bool,
    seen: HashSet<String>,
    skipped: Vec<SkippedRecord>,
    failed: bool,
}

impl CorpusReader<BufReader<File>> {
    pub fn open(path: &Path, strict: bool) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(BufReader::new(file), path, strict))
    }
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(reader: R, path: &Path, strict: bool) -> Self {
        Self {
            lines: reader.lines(),
            path: path.to_path_buf(),
            line_no: 0,
            strict,
            seen: HashSet::new(),
            skipped: Vec::new(),
            failed: false,
        }
    }

    pub fn skipped(&self) -> &[SkippedRecord] {
        &self.skipped
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(Error::io(&self.path, e)));
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            match document_from_json(&line) {
                Ok(doc) => {
                    if !self.seen.insert(doc.id.clone()) {
                        self.failed = true;
                        return Some(Err(Error::DuplicateId {
                            id: doc.id,
                            line: self.line_no,
                        }));
                    }
                    return Some(Ok(doc));
                }
                Err(e) if self.strict => {
                    self.failed = true;
                    return Some(Err(Error::MalformedRecord {
                        path: self.path.clone(),
                        line: self.line_no,
                        reason: e.to_string(),
                    }));
                }
                Err(e) => self.skipped.push(SkippedRecord {
                    line: self.line_no,
                    reason: e.to_string(),
                }),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadedCorpus {
    pub documents: Vec<Document>,
    pub skipped: Vec<SkippedRecord>,
}

/// Loads a whole corpus file into memory.
pub fn load_corpus(path: &Path, strict: bool) -> Result<LoadedCorpus> {
    let mut reader = CorpusReader::open(path, strict)?;
    let documents = reader.by_ref().collect::<Result<Vec<_>>>()?;
    Ok(LoadedCorpus {
        documents,
        skipped: reader.skipped,
    })
}

pub fn write_corpus<W: Write>(mut out: W, docs: &[Document]) -> std::io::Result<()> {
    for doc in docs {
        out.write_all(document_to_json(doc).as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Saves documents in corpus format, atomically.
pub fn save_corpus(path: &Path, docs: &[Document]) -> Result<()> {
    let mut buf = Vec::new();
    write_corpus(&mut buf, docs).map_err(|e| Error::io(path, e))?;
    crate::io::write_atomic(path, &buf)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DisciplineSample {
    pub available: usize,
    pub selected: usize,
    pub shortfall: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SampleReport {
    pub per_discipline: usize,
    pub seed: u64,
    pub rng: &'static str,
    pub disciplines: BTreeMap<String, DisciplineSample>,
}

impl SampleReport {
    pub fn short_disciplines(&self) -> impl Iterator<Item = (&str, &DisciplineSample)> {
        self.disciplines
            .iter()
            .filter(|(_, s)| s.shortfall > 0)
            .map(|(d, s)| (d.as_str(), s))
    }
}

/// Identity of the sampling algorithm, recorded in every sample report.
pub const SAMPLING_ALGORITHM: &str =
    "chacha8(sha256(seed_le64 || discipline)) + rand::seq::index::sample over id-sorted documents";

fn discipline_rng(seed: u64, discipline: &Discipline) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(discipline.as_str().as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Draws up to `n` documents per discipline uniformly without replacement.
///
/// Each discipline gets its own generator derived from `(seed, discipline)`,
/// and candidates are ordered by id before drawing, so the result depends
/// only on the set of documents, `n` and `seed`. Output is ordered by
/// (discipline, id).
pub fn sample_per_discipline(
    corpus: &[Document],
    n: usize,
    seed: u64,
) -> Result<(Vec<Document>, SampleReport)> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    let mut groups: BTreeMap<&Discipline, Vec<&Document>> = BTreeMap::new();
    for doc in corpus {
        groups.entry(&doc.discipline).or_default().push(doc);
    }

    let mut out = Vec::new();
    let mut disciplines = BTreeMap::new();
    for (discipline, mut docs) in groups {
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        let available = docs.len();
        let take = n.min(available);
        let mut picked: Vec<&Document> = if take == available {
            docs
        } else {
            let mut rng = discipline_rng(seed, discipline);
            rand::seq::index::sample(&mut rng, available, take)
                .into_iter()
                .map(|i| docs[i])
                .collect()
        };
        picked.sort_by(|a, b| a.id.cmp(&b.id));
        out.extend(picked.into_iter().cloned());
        disciplines.insert(
            discipline.as_str().to_string(),
            DisciplineSample {
                available,
                selected: take,
                shortfall: n - take,
            },
        );
    }
    Ok((
        out,
        SampleReport {
            per_discipline: n,
            seed,
            rng: SAMPLING_ALGORITHM,
            disciplines,
        },
    ))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConvertReport {
    pub read: usize,
    pub written: usize,
    pub skipped: Vec<SkippedRecord>,
}

#[derive(Deserialize)]
struct S2orcParagraph {
    #[serde(default)]
    section: Option<String>,
    #[serde(default)]
    text: String,
}

#[derive(Deserialize)]
struct S2orcRecord {
    #[serde(alias = "id")]
    paper_id: serde_json::Value,
    #[serde(default)]
    discipline: Option<String>,
    #[serde(default)]
    mag_field_of_study: Option<serde_json::Value>,
    #[serde(default)]
    body_text: Vec<S2orcParagraph>,
}

impl S2orcRecord {
    fn discipline(&self) -> Option<String> {
        if let Some(d) = &self.discipline {
            return Some(d.clone());
        }
        match self.mag_field_of_study.as_ref()? {
            serde_json::Value::String(s) => Some(s.clone()),
            serde_json::Value::Array(items) => items.first()?.as_str().map(str::to_string),
            _ => None,
        }
    }

    fn id(&self) -> Option<String> {
        match &self.paper_id {
            serde_json::Value::String(s) => Some(s.clone()),
            serde_json::Value::Number(n) => Some(n.to_string()),
            _ => None,
        }
    }

    /// Groups consecutive paragraphs sharing a section name into one section,
    /// joining their text with newlines.
    fn into_document(self) -> Result<Document> {
        let id = self
            .id()
            .ok_or_else(|| Error::InvalidDocument("paper_id is not a string or number".into()))?;
        let discipline = self
            .discipline()
            .ok_or_else(|| Error::InvalidDocument(format!("{id}: no discipline")))?;
        let mut sections: Vec<(String, String)> = Vec::new();
        for para in self.body_text {
            let heading = para.section.unwrap_or_default();
            match sections.last_mut() {
                Some((h, body)) if *h == heading => {
                    if !body.is_empty() && !para.text.is_empty() {
                        body.push('\n');
                    }
                    body.push_str(&para.text);
                }
                _ => sections.push((heading, para.text)),
            }
        }
        sections.retain(|(h, b)| !(h.trim().is_empty() && b.trim().is_empty()));
        Document::new(&id, &discipline, sections)
    }
}

/// Converts S2ORC-style records (`paper_id`, `discipline` or
/// `mag_field_of_study`, `body_text` paragraphs with `section`/`text`) into
/// the corpus format. Unusable records are skipped and reported.
pub fn convert_s2orc<R: BufRead, W: Write>(input: R, mut output: W) -> Result<ConvertReport> {
    let mut report = ConvertReport::default();
    let mut seen = HashSet::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        report.read += 1;
        let converted = serde_json::from_str::<S2orcRecord>(&line)
            .map_err(Error::from)
            .and_then(S2orcRecord::into_document);
        match converted {
            Ok(doc) if seen.insert(doc.id.clone()) => {
                writeln!(output, "{}", document_to_json(&doc))
                    .map_err(|e| Error::io("<output>", e))?;
                report.written += 1;
            }
            Ok(doc) => report.skipped.push(SkippedRecord {
                line: i + 1,
                reason: format!("duplicate id {:?}", doc.id),
            }),
            Err(e) => report.skipped.push(SkippedRecord {
                line: i + 1,
                reason: e.to_string(),
            }),
        }
    }
    Ok(report)
}
