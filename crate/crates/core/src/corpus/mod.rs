//! Annotated corpus handling: tokenization, IOB conversion, brat standoff
//! input, the TSV corpus format and dataset splitting.
//!
//! All offsets in this module count Unicode scalar values (chars), not
//! bytes, which is what brat uses.

mod brat;
mod iob_file;
mod label;
mod split;

pub use brat::parse_standoff;
pub use iob_file::{read_iob, write_iob};
pub use label::{Label, Tag};
pub use split::{split_by_group, split_dataset, Split};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Paragraph;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// A labeled character span inside one paragraph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    pub label: Label,
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl EntitySpan {
    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedParagraph {
    pub doc_id: String,
    pub paragraph: Paragraph,
    pub tokens: Vec<Token>,
    pub spans: Vec<EntitySpan>,
    pub tags: Vec<Tag>,
}

impl AnnotatedParagraph {
    /// Tokenizes the paragraph text and encodes `spans` as IOB tags.
    pub fn new(doc_id: impl Into<String>, paragraph: Paragraph, spans: Vec<EntitySpan>) -> Result<Self> {
        let tokens = tokenize(&paragraph.text);
        let tags = encode_iob(&tokens, &spans)?;
        Ok(AnnotatedParagraph {
            doc_id: doc_id.into(),
            paragraph,
            tokens,
            spans,
            tags,
        })
    }
}

/// Char-offset to byte-offset lookup for one string.
pub(crate) struct CharOffsets<'a> {
    text: &'a str,
    bytes: Vec<usize>,
}

impl<'a> CharOffsets<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        let mut bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bytes.push(text.len());
        CharOffsets { text, bytes }
    }

    pub(crate) fn char_len(&self) -> usize {
        self.bytes.len() - 1
    }

    pub(crate) fn slice(&self, start: usize, end: usize) -> Option<&'a str> {
        if start > end || end > self.char_len() {
            return None;
        }
        Some(&self.text[self.bytes[start]..self.bytes[end]])
    }
}

/// Splits text into maximal letter/digit runs; every other non-whitespace
/// character is a token of its own.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    let mut chars = 0;
    for (ci, (bi, ch)) in text.char_indices().enumerate() {
        chars = ci + 1;
        if ch.is_alphanumeric() {
            run.get_or_insert((ci, bi));
            continue;
        }
        if let Some((cs, bs)) = run.take() {
            tokens.push(Token {
                text: text[bs..bi].to_string(),
                start: cs,
                end: ci,
            });
        }
        if !ch.is_whitespace() {
            tokens.push(Token {
                text: ch.to_string(),
                start: ci,
                end: ci + 1,
            });
        }
    }
    if let Some((cs, bs)) = run {
        tokens.push(Token {
            text: text[bs..].to_string(),
            start: cs,
            end: chars,
        });
    }
    tokens
}

pub(crate) fn check_non_overlapping(spans: &[EntitySpan]) -> Result<()> {
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    for pair in sorted.windows(2) {
        if pair[0].overlaps(pair[1]) {
            return Err(Error::OverlappingSpans {
                first_start: pair[0].start,
                first_end: pair[0].end,
                second_start: pair[1].start,
                second_end: pair[1].end,
            });
        }
    }
    Ok(())
}

/// Encodes spans as one IOB tag per token.
///
/// Spans whose boundaries fall inside a token are snapped outward to the
/// covering tokens (with a warning). Spans covering no token are dropped.
pub fn encode_iob(tokens: &[Token], spans: &[EntitySpan]) -> Result<Vec<Tag>> {
    check_non_overlapping(spans)?;
    let mut tags = vec![Tag::O; tokens.len()];
    let mut owner: Vec<Option<usize>> = vec![None; tokens.len()];
    for (si, span) in spans.iter().enumerate() {
        let first = tokens.partition_point(|t| t.end <= span.start);
        let last = tokens.partition_point(|t| t.start < span.end);
        if first >= last {
            log::warn!(
                "span {} [{}, {}) {:?} covers no token; dropped",
                span.label,
                span.start,
                span.end,
                span.surface
            );
            continue;
        }
        if tokens[first].start != span.start || tokens[last - 1].end != span.end {
            log::warn!(
                "span {} [{}, {}) {:?} is not token-aligned; snapped to [{}, {})",
                span.label,
                span.start,
                span.end,
                span.surface,
                tokens[first].start,
                tokens[last - 1].end
            );
        }
        for ti in first..last {
            if let Some(other) = owner[ti] {
                let o = &spans[other];
                return Err(Error::OverlappingSpans {
                    first_start: o.start,
                    first_end: o.end,
                    second_start: span.start,
                    second_end: span.end,
                });
            }
            owner[ti] = Some(si);
            tags[ti] = if ti == first {
                Tag::B(span.label)
            } else {
                Tag::I(span.label)
            };
        }
    }
    Ok(tags)
}

/// Decodes IOB tags back into spans over `text`, from which `tokens` were
/// produced. An `I-x` with no `B-x`/`I-x` predecessor starts a new span, as
/// if it were `B-x`.
pub fn decode_iob(text: &str, tokens: &[Token], tags: &[Tag]) -> Result<Vec<EntitySpan>> {
    if tokens.len() != tags.len() {
        return Err(Error::LengthMismatch {
            tokens: tokens.len(),
            tags: tags.len(),
        });
    }
    let offsets = CharOffsets::new(text);
    let mut spans = Vec::new();
    let mut open: Option<(Label, usize, usize)> = None;
    let close = |open: &mut Option<(Label, usize, usize)>, spans: &mut Vec<EntitySpan>| {
        if let Some((label, first, last)) = open.take() {
            let start = tokens[first].start;
            let end = tokens[last].end;
            let surface = offsets.slice(start, end).map(str::to_string).unwrap_or_else(|| {
                tokens[first..=last]
                    .iter()
                    .map(|t| t.text.as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            });
            spans.push(EntitySpan {
                label,
                start,
                end,
                surface,
            });
        }
    };
    for (i, tag) in tags.iter().enumerate() {
        match *tag {
            Tag::O => close(&mut open, &mut spans),
            Tag::B(label) => {
                close(&mut open, &mut spans);
                open = Some((label, i, i));
            }
            Tag::I(label) => match open.as_mut() {
                Some((l, _, last)) if *l == label => *last = i,
                _ => {
                    close(&mut open, &mut spans);
                    open = Some((label, i, i));
                }
            },
        }
    }
    close(&mut open, &mut spans);
    Ok(spans)
}
