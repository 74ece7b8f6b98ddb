#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use matner::corpus::{parse_standoff, AnnotatedParagraph};
use matner::ingest::{parse_document, read_metadata, Document};
use matner::normalize::PatternGaps;
use matner::trends::ExtractionRecord;

pub fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(path)
}

pub fn golden(name: &str) -> String {
    fs::read_to_string(fixture("pipeline/golden").join(name)).unwrap()
}

/// Every fixture document with its gold-annotated paragraphs.
pub fn fixture_documents() -> Vec<(Document, Vec<AnnotatedParagraph>)> {
    let meta = read_metadata(fs::read(fixture("pipeline/metadata.jsonl")).unwrap().as_slice()).unwrap();
    (1..=10)
        .map(|k| {
            let id = format!("doc{k:02}");
            let xml = fs::read(fixture(&format!("pipeline/xml/{id}.xml"))).unwrap();
            let mut doc = parse_document(&xml, &id).unwrap();
            if let Some(m) = meta.get(&id) {
                doc.apply_metadata(m);
            }
            let text = fs::read_to_string(fixture(&format!("pipeline/brat/{id}.txt"))).unwrap();
            let ann = fs::read_to_string(fixture(&format!("pipeline/brat/{id}.ann"))).unwrap();
            let paragraphs = parse_standoff(&id, &text, &ann).unwrap();
            (doc, paragraphs)
        })
        .collect()
}

/// Extraction records built from the gold spans, one per paragraph.
pub fn fixture_records() -> Vec<ExtractionRecord> {
    let mut gaps = PatternGaps::default();
    let mut out = Vec::new();
    for (doc, paragraphs) in fixture_documents() {
        for (i, (p, a)) in doc.paragraphs.iter().zip(&paragraphs).enumerate() {
            out.push(ExtractionRecord::from_spans(
                &doc.doc_id,
                doc.year,
                doc.country.clone(),
                &p.section,
                i,
                &a.spans,
                &mut gaps,
            ));
        }
    }
    assert!(gaps.is_empty(), "unnormalized phrases in fixture");
    out
}
