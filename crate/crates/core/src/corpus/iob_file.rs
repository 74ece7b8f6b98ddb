//! The TSV corpus format: a `#doc <doc_id> <section>` line, then one
//! `token<TAB>tag` line per token, then a blank line, for each paragraph.

use std::io::{BufRead, Write};

use crate::corpus::{decode_iob, encode_iob, AnnotatedParagraph, Tag, Token};
use crate::error::{Error, Result};
use crate::ingest::Paragraph;

pub fn write_iob<W: Write>(mut out: W, paragraphs: &[AnnotatedParagraph]) -> Result<()> {
    for p in paragraphs {
        let header = format!("#doc {} {}", p.doc_id, p.paragraph.section);
        writeln!(out, "{}", header.trim_end())?;
        for (token, tag) in p.tokens.iter().zip(&p.tags) {
            writeln!(out, "{}\t{}", token.text, tag)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

struct Pending {
    doc_id: String,
    section: String,
    tokens: Vec<String>,
    tags: Vec<Tag>,
}

impl Pending {
    /// Rebuilds the paragraph with tokens joined by single spaces. Tags are
    /// decoded and re-encoded so the stored sequence is well formed.
    fn finish(self) -> Result<AnnotatedParagraph> {
        let text = self.tokens.join(" ");
        let mut tokens = Vec::with_capacity(self.tokens.len());
        let mut pos = 0;
        for t in self.tokens {
            let len = t.chars().count();
            tokens.push(Token {
                text: t,
                start: pos,
                end: pos + len,
            });
            pos += len + 1;
        }
        let spans = decode_iob(&text, &tokens, &self.tags)?;
        let tags = encode_iob(&tokens, &spans)?;
        Ok(AnnotatedParagraph {
            doc_id: self.doc_id,
            paragraph: Paragraph {
                section: self.section,
                subsection: None,
                text,
            },
            tokens,
            spans,
            tags,
        })
    }
}

pub fn read_iob<R: BufRead>(input: R) -> Result<Vec<AnnotatedParagraph>> {
    let mut out = Vec::new();
    let mut pending: Option<Pending> = None;
    let flush = |pending: &mut Option<Pending>, out: &mut Vec<AnnotatedParagraph>| -> Result<()> {
        if let Some(p) = pending.take() {
            if !p.tokens.is_empty() {
                out.push(p.finish()?);
            }
        }
        Ok(())
    };
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        let line_no = i + 1;
        if line.trim().is_empty() {
            flush(&mut pending, &mut out)?;
            continue;
        }
        if let Some(rest) = line.strip_prefix("#doc") {
            flush(&mut pending, &mut out)?;
            let rest = rest.trim();
            let (doc_id, section) = rest.split_once(' ').unwrap_or((rest, ""));
            pending = Some(Pending {
                doc_id: doc_id.to_string(),
                section: section.trim().to_string(),
                tokens: Vec::new(),
                tags: Vec::new(),
            });
            continue;
        }
        let (token, tag) = line.split_once('\t').ok_or_else(|| Error::IobFormat {
            line: line_no,
            message: "expected token<TAB>tag".into(),
        })?;
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(Error::IobFormat {
                line: line_no,
                message: format!("invalid token {token:?}"),
            });
        }
        let tag: Tag = tag.trim().parse()?;
        let p = pending.get_or_insert_with(|| Pending {
            doc_id: String::new(),
            section: String::new(),
            tokens: Vec::new(),
            tags: Vec::new(),
        });
        p.tokens.push(token.to_string());
        p.tags.push(tag);
    }
    flush(&mut pending, &mut out)?;
    Ok(out)
}
