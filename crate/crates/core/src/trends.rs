//! Aggregations over extraction records: material rankings by year,
//! country tabulation, material type by country and year, and synthesis
//! conditions by year.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{EntitySpan, Label};
use crate::error::Result;
use crate::ingest::section_matches;
use crate::normalize::{normalize_spans, PatternGaps, QuantityKind};
use crate::wordvec::{fold_script_digits, UNKNOWN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialMention {
    pub surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordQuantity {
    pub kind: QuantityKind,
    pub values: Vec<f64>,
    pub unit: String,
}

impl RecordQuantity {
    pub fn upper(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::max)
    }
}

/// Tagger and normalizer output for one paragraph, with document metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub doc_id: String,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub country: Option<String>,
    #[serde(default)]
    pub section: String,
    #[serde(default)]
    pub paragraph_index: usize,
    #[serde(default)]
    pub materials: Vec<MaterialMention>,
    #[serde(default)]
    pub quantities: Vec<RecordQuantity>,
}

impl ExtractionRecord {
    /// Builds the record for one tagged paragraph: Mat-Final surfaces as
    /// materials and every normalizable span as quantities.
    pub fn from_spans(
        doc_id: &str,
        year: Option<i32>,
        country: Option<String>,
        section: &str,
        paragraph_index: usize,
        spans: &[EntitySpan],
        gaps: &mut PatternGaps,
    ) -> Self {
        let materials = spans
            .iter()
            .filter(|s| s.label == Label::MatFinal)
            .map(|s| MaterialMention {
                surface: s.surface.clone(),
                material_type: None,
            })
            .collect();
        let quantities = normalize_spans(doc_id, paragraph_index, spans, gaps)
            .into_iter()
            .map(|q| RecordQuantity {
                kind: q.kind,
                values: q.values,
                unit: q.unit,
            })
            .collect();
        ExtractionRecord {
            doc_id: doc_id.to_string(),
            year,
            country,
            section: section.to_string(),
            paragraph_index,
            materials,
            quantities,
        }
    }
}

pub fn read_records<R: BufRead>(input: R) -> Result<Vec<ExtractionRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn write_records<W: Write>(mut out: W, records: &[ExtractionRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    Ok(())
}

fn is_formula_like(token: &str) -> bool {
    token.chars().any(|c| c.is_ascii_uppercase())
}

/// Trims, collapses whitespace, folds script digits and rejoins formula
/// pieces split by flattened sub/superscript markup (`TiO 2` → `TiO2`,
/// `CH 3 NH 3 PbI 3` → `CH3NH3PbI3`). Case is preserved.
pub fn canonical_material(surface: &str) -> String {
    let folded = fold_script_digits(surface);
    let mut out: Vec<String> = Vec::new();
    let mut joined_digit = false;
    for tok in folded.split_whitespace() {
        let digits = tok.chars().all(|c| c.is_ascii_digit());
        let merge = match out.last() {
            Some(prev) if digits => prev.chars().last().is_some_and(char::is_alphabetic) && is_formula_like(prev),
            Some(prev) => {
                joined_digit
                    && prev.chars().last().is_some_and(|c| c.is_ascii_digit())
                    && tok.chars().next().is_some_and(|c| c.is_ascii_uppercase())
            }
            None => false,
        };
        if merge {
            out.last_mut().unwrap().push_str(tok);
            joined_digit = digits;
        } else {
            out.push(tok.to_string());
            joined_digit = false;
        }
    }
    out.join(" ")
}

/// Label of the year bucket containing `year`: the year itself for width
/// 1, otherwise `start-end` with `start` a multiple of the width.
pub fn year_bucket(year: i32, width: u32) -> String {
    if width <= 1 {
        return year.to_string();
    }
    let w = width as i32;
    let start = year - year.rem_euclid(w);
    format!("{}-{}", start, start + w - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMaterial {
    pub material: String,
    pub papers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearRanking {
    pub bucket: String,
    pub ranking: Vec<RankedMaterial>,
}

type DocSets = BTreeMap<(i32, String), BTreeSet<String>>;

fn merge_sets(mut a: DocSets, b: DocSets) -> DocSets {
    for (k, v) in b {
        a.entry(k).or_default().extend(v);
    }
    a
}

fn ranked(counts: BTreeMap<String, usize>) -> Vec<RankedMaterial> {
    let mut v: Vec<RankedMaterial> = counts
        .into_iter()
        .map(|(material, papers)| RankedMaterial { material, papers })
        .collect();
    v.sort_by(|a, b| b.papers.cmp(&a.papers).then_with(|| a.material.cmp(&b.material)));
    v
}

/// Final-material rankings per year bucket, counting each material once
/// per paper. Records without a year, or whose section fails the filter,
/// are ignored; an empty filter keeps every section.
pub fn count_materials_by_year<P: AsRef<str> + Sync>(
    records: &[ExtractionRecord],
    section_filter: &[P],
    bucket_width: u32,
) -> Vec<YearRanking> {
    let sets: DocSets = records
        .par_iter()
        .filter(|r| section_matches(&r.section, section_filter))
        .fold(DocSets::new, |mut acc, r| {
            if let Some(year) = r.year {
                let start = if bucket_width <= 1 {
                    year
                } else {
                    year - year.rem_euclid(bucket_width as i32)
                };
                for m in &r.materials {
                    let name = canonical_material(&m.surface);
                    if !name.is_empty() {
                        acc.entry((start, name)).or_default().insert(r.doc_id.clone());
                    }
                }
            }
            acc
        })
        .reduce(DocSets::new, merge_sets);
    let mut per_bucket: BTreeMap<i32, BTreeMap<String, usize>> = BTreeMap::new();
    for ((start, name), docs) in sets {
        per_bucket.entry(start).or_default().insert(name, docs.len());
    }
    per_bucket
        .into_iter()
        .map(|(start, counts)| YearRanking {
            bucket: year_bucket(start, bucket_width),
            ranking: ranked(counts),
        })
        .collect()
}

/// Raw Mat-Final mention counts over all records, most frequent first.
pub fn count_mentions(records: &[ExtractionRecord]) -> Vec<RankedMaterial> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for m in records.iter().flat_map(|r| &r.materials) {
        *counts.entry(canonical_material(&m.surface)).or_default() += 1;
    }
    ranked(counts)
}

pub fn write_year_rankings<W: Write>(out: W, rankings: &[YearRanking]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bucket", "rank", "material", "count"])
        .map_err(csv_error)?;
    for r in rankings {
        for (i, m) in r.ranking.iter().enumerate() {
            w.write_record([
                r.bucket.as_str(),
                &(i + 1).to_string(),
                &m.material,
                &m.papers.to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CountryTable {
    /// `(country, papers)`, most papers first, ties alphabetical.
    pub rows: Vec<(String, usize)>,
    /// Records without a country.
    pub skipped: usize,
}

pub fn tabulate_countries(records: &[ExtractionRecord]) -> CountryTable {
    let mut docs: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut skipped = 0;
    for r in records {
        match r.country.as_deref().map(str::trim) {
            Some(c) if !c.is_empty() => {
                docs.entry(c).or_default().insert(&r.doc_id);
            }
            _ => skipped += 1,
        }
    }
    let mut rows: Vec<(String, usize)> = docs.into_iter().map(|(c, d)| (c.to_string(), d.len())).collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    CountryTable { rows, skipped }
}

pub fn write_countries<W: Write>(out: W, table: &CountryTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["country", "papers"]).map_err(csv_error)?;
    for (c, n) in &table.rows {
        w.write_record([c.as_str(), &n.to_string()]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeTrendKey {
    pub country: String,
    pub year: i32,
    pub material_type: String,
}

/// Papers per (country, year, material type). Materials without a type or
/// classified as unknown are not counted; neither are records missing a
/// country or year.
pub fn material_trend_by_country(records: &[ExtractionRecord]) -> BTreeMap<TypeTrendKey, usize> {
    let mut docs: BTreeMap<TypeTrendKey, BTreeSet<&str>> = BTreeMap::new();
    for r in records {
        let (Some(country), Some(year)) = (r.country.as_deref().map(str::trim), r.year) else {
            continue;
        };
        if country.is_empty() {
            continue;
        }
        for t in r.materials.iter().filter_map(|m| m.material_type.as_deref()) {
            if t == UNKNOWN {
                continue;
            }
            let key = TypeTrendKey {
                country: country.to_string(),
                year,
                material_type: t.to_string(),
            };
            docs.entry(key).or_default().insert(&r.doc_id);
        }
    }
    docs.into_iter().map(|(k, d)| (k, d.len())).collect()
}

pub fn write_type_trends<W: Write>(out: W, trends: &BTreeMap<TypeTrendKey, usize>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["country", "year", "material_type", "papers"])
        .map_err(csv_error)?;
    for (k, n) in trends {
        w.write_record([
            k.country.as_str(),
            &k.year.to_string(),
            &k.material_type,
            &n.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Which records feed the condition scatter.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum MaterialFilter {
    #[default]
    Any,
    /// Canonical surface equality with any Mat-Final mention.
    Surface(String),
    /// Equality with the classified type of any mention.
    Type(String),
}

impl MaterialFilter {
    pub fn accepts(&self, record: &ExtractionRecord) -> bool {
        match self {
            MaterialFilter::Any => true,
            MaterialFilter::Surface(s) => {
                let want = canonical_material(s);
                record.materials.iter().any(|m| canonical_material(&m.surface) == want)
            }
            MaterialFilter::Type(t) => record
                .materials
                .iter()
                .any(|m| m.material_type.as_deref() == Some(t.as_str())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionPoint {
    pub year: i32,
    pub doc_id: String,
    pub paragraph_index: usize,
    pub temperature_c: f64,
    pub time_h: f64,
}

fn max_upper(record: &ExtractionRecord, kind: QuantityKind) -> Option<f64> {
    record
        .quantities
        .iter()
        .filter(|q| q.kind == kind)
        .filter_map(RecordQuantity::upper)
        .reduce(f64::max)
}

/// One (temperature, time) pair per accepted paragraph: the largest upper
/// bound of each kind. Paragraphs lacking either kind, or a year, are left
/// out. Sorted by year, then document and paragraph.
pub fn condition_by_year(records: &[ExtractionRecord], filter: &MaterialFilter) -> Vec<ConditionPoint> {
    let mut points: Vec<ConditionPoint> = records
        .iter()
        .filter(|r| filter.accepts(r))
        .filter_map(|r| {
            Some(ConditionPoint {
                year: r.year?,
                doc_id: r.doc_id.clone(),
                paragraph_index: r.paragraph_index,
                temperature_c: max_upper(r, QuantityKind::Temperature)?,
                time_h: max_upper(r, QuantityKind::Time)?,
            })
        })
        .collect();
    points.sort_by(|a, b| (a.year, &a.doc_id, a.paragraph_index).cmp(&(b.year, &b.doc_id, b.paragraph_index)));
    points
}

pub fn write_conditions<W: Write>(out: W, points: &[ConditionPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["year", "doc_id", "temperature_c", "time_h"])
        .map_err(csv_error)?;
    for p in points {
        w.write_record([
            p.year.to_string(),
            p.doc_id.clone(),
            p.temperature_c.to_string(),
            p.time_h.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> crate::Error {
    crate::Error::Io(e.into())
}
