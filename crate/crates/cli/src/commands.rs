use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use matner::corpus::AnnotatedParagraph;
use matner::corpus::{parse_standoff, read_iob, split_by_group, split_dataset, tokenize, write_iob, EntitySpan};
use matner::ingest::{filter_sections, parse_document, read_metadata, section_matches, Document};
use matner::metrics::{match_corpus, MatchReport};
use matner::normalize::{normalize_spans, PatternGaps};
use matner::tagger::{self, SearchSpace, TaggerConfig};
use matner::trends::{self, ExtractionRecord, MaterialFilter};
use matner::wordvec::{self, EmbeddingSpace, WordVecConfig};

use crate::files::{create, list_inputs, open, read_jsonl, read_string, stem, write_jsonl};
use crate::{
    ClassifyArgs, ConvertArgs, EvalArgs, IaaArgs, IngestArgs, NormalizeArgs, SearchArgs, SplitArgs, TagArgs, TrainArgs,
    TrendsArgs, WordvecArgs,
};

/// One tagged paragraph with the metadata later stages need.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaggedParagraph {
    pub doc_id: String,
    pub year: Option<i32>,
    pub country: Option<String>,
    pub section: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsection: Option<String>,
    pub paragraph_index: usize,
    pub text: String,
    pub spans: Vec<EntitySpan>,
}

fn read_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => toml::from_str(&read_string(p)?).with_context(|| format!("invalid config {}", p.display())),
    }
}

fn read_corpus(path: &Path) -> Result<Vec<AnnotatedParagraph>> {
    read_iob(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn write_corpus(path: &Path, paragraphs: &[AnnotatedParagraph]) -> Result<()> {
    let mut out = create(path)?;
    write_iob(&mut out, paragraphs)?;
    out.flush()?;
    Ok(())
}

pub fn ingest(args: IngestArgs) -> Result<String> {
    let files = list_inputs(&args.input, "xml")?;
    let metadata = match &args.metadata {
        Some(p) => read_metadata(open(p)?).with_context(|| format!("reading {}", p.display()))?,
        None => Default::default(),
    };
    let docs: Vec<Document> = files
        .par_iter()
        .map(|path| {
            let xml = fs::read(path).with_context(|| format!("cannot open input {}", path.display()))?;
            let id = stem(path);
            let mut doc = parse_document(&xml, &id).with_context(|| format!("parsing {}", path.display()))?;
            if let Some(m) = metadata.get(&id) {
                doc.apply_metadata(m);
            }
            if !args.sections.is_empty() {
                doc.paragraphs = filter_sections(&doc, &args.sections);
            }
            Ok(doc)
        })
        .collect::<Result<_>>()?;
    write_jsonl(&args.output, &docs)?;
    let paragraphs: usize = docs.iter().map(|d| d.paragraphs.len()).sum();
    Ok(format!("ingested {} documents, {} paragraphs", docs.len(), paragraphs))
}

pub fn corpus_convert(args: ConvertArgs) -> Result<String> {
    let mut paragraphs = Vec::new();
    let anns = list_inputs(&args.input, "ann")?;
    for ann_path in &anns {
        let txt_path = ann_path.with_extension("txt");
        let text = read_string(&txt_path)?;
        let ann = read_string(ann_path)?;
        let id = stem(ann_path);
        paragraphs.extend(parse_standoff(&id, &text, &ann).with_context(|| format!("in {}", ann_path.display()))?);
    }
    write_corpus(&args.output, &paragraphs)?;
    let spans: usize = paragraphs.iter().map(|p| p.spans.len()).sum();
    Ok(format!(
        "converted {} documents, {} paragraphs, {} entities",
        anns.len(),
        paragraphs.len(),
        spans
    ))
}

pub fn split(args: SplitArgs) -> Result<String> {
    let corpus = read_corpus(&args.input)?;
    let ratios = args.ratios;
    let parts = if args.by_paper {
        split_by_group(&corpus, |p| p.doc_id.clone(), ratios, args.seed)?
    } else {
        split_dataset(&corpus, ratios, args.seed)?
    };
    write_corpus(&args.output.join("train.iob"), &parts.train)?;
    write_corpus(&args.output.join("dev.iob"), &parts.dev)?;
    write_corpus(&args.output.join("test.iob"), &parts.test)?;
    Ok(format!(
        "split {} paragraphs: train {}, dev {}, test {}",
        corpus.len(),
        parts.train.len(),
        parts.dev.len(),
        parts.test.len()
    ))
}

fn tagger_config(path: Option<&Path>, seed: Option<u64>) -> Result<TaggerConfig> {
    let mut config: TaggerConfig = read_config(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

pub fn train(args: TrainArgs) -> Result<String> {
    let config = tagger_config(args.config.as_deref(), args.seed)?;
    let train_set = read_corpus(&args.input)?;
    let dev_set = match &args.dev {
        Some(p) => read_corpus(p)?,
        None => Vec::new(),
    };
    let vectors = match &args.vectors {
        Some(p) => Some(wordvec::read_vectors(open(p)?).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let (model, report) = tagger::train_with(config, &train_set, &dev_set, vectors.as_deref())?;
    tagger::save_model(&args.output, &model).with_context(|| format!("writing {}", args.output.display()))?;
    Ok(format!(
        "trained {} epochs on {} paragraphs, best dev micro-F1 {:.4} at epoch {}",
        report.dev_f1.len(),
        train_set.len(),
        report.best_f1(),
        report.best_epoch + 1
    ))
}

pub fn search(args: SearchArgs) -> Result<String> {
    let base = tagger_config(args.config.as_deref(), None)?;
    let train_set = read_corpus(&args.input)?;
    let dev_set = read_corpus(&args.dev)?;
    let result = tagger::random_search(
        &SearchSpace::default(),
        &base,
        args.budget,
        args.seed,
        &train_set,
        &dev_set,
    )?;
    let mut out = create(&args.output)?;
    serde_json::to_writer_pretty(&mut out, &result)?;
    writeln!(out)?;
    out.flush()?;
    Ok(format!(
        "searched {} configs, best dev micro-F1 {:.4}",
        result.trials.len(),
        result.best.dev_f1
    ))
}

pub fn tag(args: TagArgs) -> Result<String> {
    let model = tagger::load_model(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let docs: Vec<Document> = read_jsonl(&args.input)?;
    let tagged: Vec<Vec<TaggedParagraph>> = docs
        .par_iter()
        .map(|doc| {
            doc.paragraphs
                .iter()
                .enumerate()
                .filter(|(_, p)| args.sections.is_empty() || section_matches(&p.section, &args.sections))
                .map(|(i, p)| {
                    Ok(TaggedParagraph {
                        doc_id: doc.doc_id.clone(),
                        year: doc.year,
                        country: doc.country.clone(),
                        section: p.section.clone(),
                        subsection: p.subsection.clone(),
                        paragraph_index: i,
                        text: p.text.clone(),
                        spans: tagger::tag_paragraph_with(&model, p, !args.unconstrained)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let tagged: Vec<TaggedParagraph> = tagged.into_iter().flatten().collect();
    write_jsonl(&args.output, &tagged)?;
    let spans: usize = tagged.iter().map(|t| t.spans.len()).sum();
    Ok(format!(
        "tagged {} paragraphs from {} documents, {} entities",
        tagged.len(),
        docs.len(),
        spans
    ))
}

pub fn normalize(args: NormalizeArgs) -> Result<String> {
    let tagged: Vec<TaggedParagraph> = read_jsonl(&args.input)?;
    let mut gaps = PatternGaps::default();
    let mut records = Vec::with_capacity(tagged.len());
    let mut quantities = Vec::new();
    for t in &tagged {
        let record = ExtractionRecord::from_spans(
            &t.doc_id,
            t.year,
            t.country.clone(),
            &t.section,
            t.paragraph_index,
            &t.spans,
            &mut gaps,
        );
        if args.quantities.is_some() {
            quantities.extend(normalize_spans(
                &t.doc_id,
                t.paragraph_index,
                &t.spans,
                &mut PatternGaps::default(),
            ));
        }
        records.push(record);
    }
    write_jsonl(&args.output, &records)?;
    if let Some(p) = &args.quantities {
        write_jsonl(p, &quantities)?;
    }
    if let Some(p) = &args.gaps {
        let mut out = create(p)?;
        gaps.write_tsv(&mut out)?;
        out.flush()?;
    }
    let n: usize = records.iter().map(|r| r.quantities.len()).sum();
    Ok(format!(
        "normalized {} quantities from {} paragraphs, {} unrecognized phrases",
        n,
        records.len(),
        gaps.total()
    ))
}

fn write_report(report: &MatchReport, output: Option<&Path>, matrix: Option<&Path>) -> Result<()> {
    if let Some(p) = output {
        let mut out = create(p)?;
        serde_json::to_writer_pretty(&mut out, &report.to_json())?;
        writeln!(out)?;
        out.flush()?;
    }
    if let Some(p) = matrix {
        let mut out = create(p)?;
        report.write_confusion_csv(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<String> {
    let gold = read_corpus(&args.gold)?;
    let pred = read_corpus(&args.pred)?;
    let report = match_corpus(&gold, &pred, args.mode)?;
    write_report(&report, args.output.as_deref(), args.matrix.as_deref())?;
    Ok(format!(
        "micro-F1 {:.4} (P {:.4}, R {:.4}), macro-F1 {:.4}",
        report.micro_f1(),
        report.micro_precision(),
        report.micro_recall(),
        report.macro_f1()
    ))
}

pub fn iaa(args: IaaArgs) -> Result<String> {
    let a = read_corpus(&args.a)?;
    let b = read_corpus(&args.b)?;
    let report = match_corpus(&a, &b, args.mode)?;
    write_report(&report, args.output.as_deref(), None)?;
    Ok(format!(
        "agreement (macro recall) {:.4}, micro-F1 {:.4}",
        report.macro_recall(),
        report.micro_f1()
    ))
}

pub fn wordvec_train(args: WordvecArgs) -> Result<String> {
    let mut config: WordVecConfig = read_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let docs: Vec<Document> = read_jsonl(&args.input)?;
    let sentences: Vec<Vec<String>> = docs
        .iter()
        .flat_map(|d| &d.paragraphs)
        .map(|p| {
            tokenize(&wordvec::fold_script_digits(&p.text))
                .into_iter()
                .map(|t| t.text)
                .collect()
        })
        .collect();
    let space = wordvec::train_embeddings(&sentences, &config)?;
    let mut out = create(&args.output)?;
    space.write_vectors(&mut out)?;
    out.flush()?;
    Ok(format!(
        "trained {} vectors of dimension {}",
        space.vocab().len(),
        space.dim()
    ))
}

pub fn classify(args: ClassifyArgs) -> Result<String> {
    let vectors =
        wordvec::read_vectors(open(&args.vectors)?).with_context(|| format!("reading {}", args.vectors.display()))?;
    let space = EmbeddingSpace::from_vectors(vectors)?;
    let queries: Vec<String> = if args.queries.is_empty() {
        wordvec::DEFAULT_QUERIES.iter().map(|q| q.to_string()).collect()
    } else {
        args.queries.clone()
    };
    let mut records: Vec<ExtractionRecord> = read_jsonl(&args.input)?;
    let mut classes: BTreeMap<String, wordvec::Classification> = BTreeMap::new();
    for m in records.iter().flat_map(|r| &r.materials) {
        let term = trends::canonical_material(&m.surface);
        if let std::collections::btree_map::Entry::Vacant(slot) = classes.entry(term) {
            let c = wordvec::classify_material(slot.key(), &queries, &space);
            slot.insert(c);
        }
    }
    for m in records.iter_mut().flat_map(|r| &mut r.materials) {
        m.material_type = Some(classes[&trends::canonical_material(&m.surface)].label().to_string());
    }
    let rows: Vec<(String, wordvec::Classification)> = classes.into_iter().collect();
    let mut out = create(&args.output)?;
    wordvec::write_classifications(&mut out, &rows)?;
    out.flush()?;
    if let Some(p) = &args.records {
        write_jsonl(p, &records)?;
    }
    let unknown = rows.iter().filter(|(_, c)| c.similarity().is_none()).count();
    Ok(format!("classified {} material names, {} unknown", rows.len(), unknown))
}

pub fn trends(args: TrendsArgs) -> Result<String> {
    let records: Vec<ExtractionRecord> = read_jsonl(&args.input)?;
    if args.output.is_file() {
        bail!("{} is a file, expected a directory", args.output.display());
    }
    let sections: Vec<String> = if args.all_sections {
        Vec::new()
    } else {
        args.sections.clone()
    };
    let rankings = trends::count_materials_by_year(&records, &sections, args.buckets);
    let countries = trends::tabulate_countries(&records);
    let types = trends::material_trend_by_country(&records);
    let filter = match (&args.material, &args.material_type) {
        (Some(m), _) => MaterialFilter::Surface(m.clone()),
        (None, Some(t)) => MaterialFilter::Type(t.clone()),
        (None, None) => MaterialFilter::Any,
    };
    let conditions = trends::condition_by_year(&records, &filter);

    let dir = &args.output;
    let mut out = create(&dir.join("year_ranking.csv"))?;
    trends::write_year_rankings(&mut out, &rankings)?;
    out.flush()?;
    let mut out = create(&dir.join("countries.csv"))?;
    trends::write_countries(&mut out, &countries)?;
    out.flush()?;
    let mut out = create(&dir.join("type_trends.csv"))?;
    trends::write_type_trends(&mut out, &types)?;
    out.flush()?;
    let mut out = create(&dir.join("conditions.csv"))?;
    trends::write_conditions(&mut out, &conditions)?;
    out.flush()?;
    Ok(format!(
        "{} records: {} year buckets, {} countries ({} records without country), {} condition points",
        records.len(),
        rankings.len(),
        countries.rows.len(),
        countries.skipped,
        conditions.len()
    ))
}
