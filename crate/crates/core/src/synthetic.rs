//! Deterministic synthetic corpora for demos and tests.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::vocabulary::SectionType;

pub const DEFAULT_DISCIPLINES: [&str; 5] = [
    "Biology",
    "Physics",
    "Political Science",
    "Psychology",
    "Sociology",
];

fn headings(ty: SectionType) -> &'static [&'static str] {
    match ty {
        SectionType::Introduction => &["Introduction", "INTRODUCTION", "Intro"],
        SectionType::Background => &["Background", "Related Work", "Literature Review"],
        SectionType::Methods => &["Methods", "Materials and Methods", "Methodology", "Method"],
        SectionType::Results => &["Results", "Findings", "RESULTS"],
        SectionType::Analysis => &["Analysis", "Analyses"],
        SectionType::Discussion => &["Discussion", "Discussions"],
        SectionType::Conclusion => &["Conclusion", "Conclusions", "Summary", "Concluding Remarks"],
    }
}

const FREE_HEADINGS: &[&str] = &[
    "Our Approach",
    "Experimental Setup",
    "Case Study",
    "Data Collection",
    "Theoretical Framework",
    "Limitations",
    "Model",
    "Participants",
    "Future Work",
];

fn topic_words(ty: SectionType) -> &'static [&'static str] {
    match ty {
        SectionType::Introduction => &["we", "propose", "this", "paper", "question", "motivate"],
        SectionType::Background => &["prior", "studies", "literature", "earlier", "work", "reviewed"],
        SectionType::Methods => &["sample", "procedure", "measured", "protocol", "apparatus", "design"],
        SectionType::Results => &["observed", "table", "significant", "mean", "increase", "figure"],
        SectionType::Analysis => &["regression", "variance", "decomposition", "robustness", "model"],
        SectionType::Discussion => &["interpret", "suggests", "implication", "consistent", "limitation"],
        SectionType::Conclusion => &["conclude", "summary", "overall", "contribution", "future"],
    }
}

const FILLER: &[&str] = &["the", "of", "and", "a", "in", "to", "is", "for", "with", "on"];

fn enumerate(rng: &mut ChaCha8Rng, position: usize, heading: &str) -> String {
    match rng.random_range(0..4) {
        0 => format!("{}. {heading}", position + 1),
        1 => format!("{}.1 {heading}", position + 1),
        _ => heading.to_string(),
    }
}

fn body(rng: &mut ChaCha8Rng, ty: SectionType) -> String {
    let len = rng.random_range(8..60);
    (0..len)
        .map(|_| {
            if rng.random_bool(0.4) {
                *topic_words(ty).choose(rng).unwrap()
            } else {
                *FILLER.choose(rng).unwrap()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn skeleton(rng: &mut ChaCha8Rng) -> Vec<SectionType> {
    use SectionType::*;
    let mut seq = vec![Introduction];
    if rng.random_bool(0.4) {
        seq.push(Background);
    }
    let cycles = if rng.random_bool(0.3) { 2 } else { 1 };
    for _ in 0..cycles {
        seq.push(Methods);
        seq.push(Results);
        if rng.random_bool(0.3) {
            seq.push(Analysis);
        }
        if rng.random_bool(0.6) {
            seq.push(Discussion);
        }
    }
    seq.push(Conclusion);
    seq
}

/// `per_discipline` documents for each discipline. Section types follow a
/// loose introduction → methods → results → conclusion skeleton; roughly a
/// fifth of the headings are free-form and match no alias.
pub fn synthetic_corpus(disciplines: &[&str], per_discipline: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(disciplines.len() * per_discipline);
    for disc in disciplines {
        for i in 0..per_discipline {
            let sections: Vec<(String, String)> = skeleton(&mut rng)
                .into_iter()
                .enumerate()
                .map(|(pos, ty)| {
                    let heading = if rng.random_bool(0.2) {
                        FREE_HEADINGS.choose(&mut rng).unwrap().to_string()
                    } else {
                        headings(ty).choose(&mut rng).unwrap().to_string()
                    };
                    let heading = if rng.random_bool(0.03) {
                        String::new()
                    } else {
                        enumerate(&mut rng, pos, &heading)
                    };
                    (heading, body(&mut rng, ty))
                })
                .collect();
            let id = format!("{}-{i:05}", disc.to_lowercase().replace(' ', "-"));
            docs.push(Document::new(&id, disc, sections).expect("synthetic documents are valid"));
        }
    }
    docs
}
