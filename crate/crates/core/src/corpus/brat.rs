use crate::corpus::{check_non_overlapping, AnnotatedParagraph, CharOffsets, EntitySpan, Label};
use crate::error::{Error, Result};
use crate::ingest::Paragraph;

struct RawAnnotation {
    id: String,
    label: Label,
    start: usize,
    end: usize,
    surface: String,
    line: usize,
}

fn parse_ann_line(line_no: usize, line: &str) -> Result<Option<RawAnnotation>> {
    let line = line.trim_end_matches('\r');
    // Only text-bound annotations matter; relations, events, attributes
    // and notes are skipped.
    if !line.starts_with('T') {
        return Ok(None);
    }
    let bad = |message: &str| Error::Annotation {
        line: line_no,
        message: message.to_string(),
    };
    let mut fields = line.splitn(3, '\t');
    let id = fields.next().unwrap_or_default().to_string();
    let body = fields.next().ok_or_else(|| bad("missing label and offsets"))?;
    let surface = fields.next().unwrap_or_default().to_string();
    if body.contains(';') {
        return Err(bad("discontinuous spans are not supported"));
    }
    let mut parts = body.split(' ');
    let label: Label = parts.next().unwrap_or_default().parse()?;
    let mut offset = || -> Result<usize> {
        parts
            .next()
            .ok_or_else(|| bad("missing offset"))?
            .parse()
            .map_err(|_| bad("offset is not an integer"))
    };
    let start = offset()?;
    let end = offset()?;
    if start >= end {
        return Err(bad("span start must precede end"));
    }
    Ok(Some(RawAnnotation {
        id,
        label,
        start,
        end,
        surface,
        line: line_no,
    }))
}

/// Char ranges of blank-line separated paragraphs.
fn paragraph_ranges(text: &str) -> Vec<(usize, usize)> {
    let mut ranges = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    let mut pos = 0;
    for line in text.split('\n') {
        let len = line.chars().count();
        let content = line.trim_end_matches('\r');
        let content_len = content.chars().count();
        if content.trim().is_empty() {
            if let Some(r) = current.take() {
                ranges.push(r);
            }
        } else {
            let r = current.get_or_insert((pos, pos));
            r.1 = pos + content_len;
        }
        pos += len + 1;
    }
    if let Some(r) = current {
        ranges.push(r);
    }
    ranges
}

/// Reads a brat `.txt`/`.ann` pair into annotated paragraphs, splitting the
/// text on blank lines. Span offsets in the result are paragraph-relative.
pub fn parse_standoff(doc_id: &str, text: &str, ann: &str) -> Result<Vec<AnnotatedParagraph>> {
    let offsets = CharOffsets::new(text);
    let mut annotations = Vec::new();
    for (i, line) in ann.lines().enumerate() {
        let Some(a) = parse_ann_line(i + 1, line)? else {
            continue;
        };
        let slice = offsets.slice(a.start, a.end).ok_or_else(|| Error::Annotation {
            line: a.line,
            message: format!("offsets [{}, {}) exceed the text length", a.start, a.end),
        })?;
        if slice != a.surface {
            return Err(Error::SurfaceMismatch {
                id: a.id,
                surface: a.surface,
                slice: slice.to_string(),
            });
        }
        annotations.push(a);
    }
    let global: Vec<EntitySpan> = annotations
        .iter()
        .map(|a| EntitySpan {
            label: a.label,
            start: a.start,
            end: a.end,
            surface: a.surface.clone(),
        })
        .collect();
    check_non_overlapping(&global)?;

    let ranges = paragraph_ranges(text);
    let mut per_paragraph: Vec<Vec<EntitySpan>> = vec![Vec::new(); ranges.len()];
    for (a, span) in annotations.iter().zip(global) {
        let idx = ranges
            .iter()
            .position(|&(s, e)| s <= span.start && span.end <= e)
            .ok_or_else(|| Error::Annotation {
                line: a.line,
                message: format!("annotation {} is not contained in a single paragraph", a.id),
            })?;
        let base = ranges[idx].0;
        per_paragraph[idx].push(EntitySpan {
            start: span.start - base,
            end: span.end - base,
            ..span
        });
    }

    ranges
        .iter()
        .zip(per_paragraph)
        .map(|(&(s, e), mut spans)| {
            spans.sort_by_key(|sp| sp.start);
            let paragraph = Paragraph {
                section: String::new(),
                subsection: None,
                text: offsets.slice(s, e).unwrap_or_default().to_string(),
            };
            AnnotatedParagraph::new(doc_id, paragraph, spans)
        })
        .collect()
}
