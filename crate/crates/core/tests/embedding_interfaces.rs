//! The manifest and cache files are the contract with the out-of-process
//! transformer embedder; these tests write them the way a Python writer
//! using `json.dumps` would.

use std::fmt::Write as _;
use std::path::Path;

use archetype::embedding::{
    content_key, hash_provider, read_manifest, EmbeddingCache, EmbeddingProvider, EmbeddingVector,
    Embedder,
};
use archetype::pipeline::{self, ManifestKind, PipelineConfig, ProviderConfig, Stage};
use archetype::synthetic::{synthetic_corpus, DEFAULT_DISCIPLINES};
use archetype::Error;

#[test]
fn hash_provider_is_unit_norm_and_uncorrelated() {
    let p = hash_provider(8, 0).unwrap();
    let vs: Vec<EmbeddingVector> = (0..1000)
        .map(|i| p.embed_text(&format!("text number {i}")).unwrap())
        .collect();
    for v in &vs {
        assert!((v.l2_norm() - 1.0).abs() < 1e-6);
    }
    let mut sum = 0.0;
    let mut n = 0;
    for pair in vs.windows(2) {
        sum += pair[0].as_slice().iter().zip(pair[1].as_slice()).map(|(a, b)| a * b).sum::<f64>();
        n += 1;
    }
    let mean_cos = sum / n as f64;
    assert!(mean_cos.abs() < 0.05, "mean cosine {mean_cos}");

    assert_eq!(p.embed_text("same").unwrap(), p.embed_text("same").unwrap());
    assert_ne!(
        hash_provider(8, 1).unwrap().embed_text("same").unwrap(),
        p.embed_text("same").unwrap()
    );
}

fn python_style_cache(path: &Path, dim: usize, entries: &[(String, Vec<f64>)]) {
    let mut s = format!("{{\"provider\": \"allenai/scibert_scivocab_uncased\", \"dim\": {dim}, \"version\": \"cls-v1\"}}\n");
    for (key, v) in entries {
        let nums: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        writeln!(s, "{{\"key\": \"{key}\", \"vec\": [{}]}}", nums.join(", ")).unwrap();
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn reads_externally_written_cache() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.jsonl");
    let key = content_key("Methods we measured");
    python_style_cache(&path, 3, &[(key.clone(), vec![0.1, -2.5e-5, 1.0])]);

    let cache = EmbeddingCache::load(&path).unwrap();
    assert_eq!(cache.descriptor().name, "allenai/scibert_scivocab_uncased");
    assert_eq!(cache.len(), 1);
    let v = cache.get(&key).unwrap();
    assert_eq!(v.as_slice(), [0.1f32 as f64, -2.5e-5f32 as f64, 1.0]);

    let embedder = Embedder::cache_only(cache);
    assert_eq!(embedder.embed("Methods we measured").unwrap(), v);
    match embedder.embed("never embedded") {
        Err(Error::Provider { key, .. }) => assert_eq!(key, content_key("never embedded")),
        other => panic!("expected provider error, got {other:?}"),
    }
}

#[test]
fn header_only_cache_is_valid_and_bad_rows_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    python_style_cache(&path, 4, &[]);
    assert!(EmbeddingCache::load(&path).unwrap().is_empty());

    let bad = dir.path().join("bad.jsonl");
    python_style_cache(&bad, 4, &[("k".into(), vec![1.0, 2.0])]);
    match EmbeddingCache::load(&bad) {
        Err(Error::CorruptCache { reason, .. }) => assert!(reason.contains("line 2"), "{reason}"),
        other => panic!("expected corrupt cache, got {other:?}"),
    }

    std::fs::write(&bad, "{\"provider\": \"m\", \"dim\": 2, \"version\": \"1\"}\n{\"key\": \"k\", \"vec\": [NaN, 1.0]}\n").unwrap();
    assert!(matches!(EmbeddingCache::load(&bad), Err(Error::CorruptCache { .. })));
}

#[test]
fn cache_round_trip_is_exact_at_stored_precision() {
    let p = hash_provider(16, 4).unwrap();
    let embedder = Embedder::new(Box::new(p));
    let texts: Vec<String> = (0..50).map(|i| format!("section {i}")).collect();
    let first: Vec<_> = texts.iter().map(|t| embedder.embed(t).unwrap()).collect();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    embedder.snapshot().save(&path).unwrap();
    let loaded = EmbeddingCache::load(&path).unwrap();
    assert_eq!(loaded.to_bytes(), std::fs::read(&path).unwrap());

    let reread = Embedder::cache_only(loaded);
    for (t, v) in texts.iter().zip(&first) {
        assert_eq!(&reread.embed(t).unwrap(), v);
    }
}

fn manifest_vector(text: &str, dim: usize) -> Vec<f64> {
    // a crude stand-in for a real encoder: heading-word indicator features
    let lower = text.to_lowercase();
    let mut v = vec![0.01; dim];
    for (i, word) in ["intro", "method", "result", "discuss", "conclu"].iter().enumerate() {
        if lower.split_whitespace().next().is_some_and(|w| w.contains(word)) {
            v[i] = 1.0;
        }
    }
    v
}

#[test]
fn manifest_then_external_cache_drives_retrofit() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    archetype::corpus::save_corpus(&corpus, &synthetic_corpus(&DEFAULT_DISCIPLINES, 8, 3)).unwrap();
    let mut cfg = PipelineConfig {
        corpus: Some(corpus),
        out_dir: dir.path().join("out"),
        sample_size: 8,
        ..PipelineConfig::default()
    };
    for stage in [Stage::Sample, Stage::Vocab, Stage::Manifest { kind: ManifestKind::Embed }] {
        pipeline::run(&stage, &cfg).unwrap();
    }
    let manifest = read_manifest(&cfg.out_dir.join(pipeline::MANIFEST_FILE)).unwrap();
    assert!(!manifest.is_empty());
    for entry in &manifest {
        assert_eq!(entry.key, content_key(&entry.text));
        assert!(entry.text.split_whitespace().count() <= 25);
    }
    assert!(manifest.windows(2).all(|w| w[0].key < w[1].key));

    let cache = dir.path().join("cache.jsonl");
    let entries: Vec<(String, Vec<f64>)> = manifest
        .iter()
        .map(|e| (e.key.clone(), manifest_vector(&e.text, 6)))
        .collect();
    python_style_cache(&cache, 6, &entries);

    cfg.provider = ProviderConfig::Cache { path: cache };
    pipeline::run(&Stage::Fit, &cfg).unwrap();
    pipeline::run(&Stage::Retrofit, &cfg).unwrap();
    let labeled =
        archetype::retrofit::load_labeled(&cfg.out_dir.join(pipeline::LABELED_FILE)).unwrap();
    let sections: usize = labeled.iter().map(|d| d.labels.len()).sum();
    let classified = labeled.iter().flat_map(|d| &d.labels).filter(|l| l.is_classified()).count();
    assert!(sections >= manifest.len());
    assert!(classified > 0);
}
