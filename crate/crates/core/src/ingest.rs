//! Publisher XML to plain-text documents.
//!
//! The element vocabulary is deliberately small:
//!
//! | role | elements |
//! |------|----------|
//! | section | `section`, `sec`, `div`, `abstract` (implicit heading "Abstract") |
//! | heading | `title`, `heading`, `h1`..`h6` |
//! | paragraph | `p`, `para`, `paragraph` |
//! | document title | `article-title`, or the first `title` outside any section |
//! | metadata | `year`, `country` inside `metadata`, `meta` or `article-meta` |
//!
//! Any other element only contributes its text. Every tag boundary inside a
//! paragraph or heading becomes one space, so `10<sup>-3</sup>` reads `10 -3`.

use std::borrow::Cow;
use std::collections::HashMap;
use std::io::BufRead;
use std::sync::LazyLock;

use quick_xml::events::{BytesText, Event};
use quick_xml::Reader;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub year: Option<i32>,
    pub country: Option<String>,
    pub title: String,
    pub paragraphs: Vec<Paragraph>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub section: String,
    pub subsection: Option<String>,
    pub text: String,
}

/// One line of a sidecar metadata file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub doc_id: String,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub country: Option<String>,
}

impl Document {
    /// Fills year and country from sidecar metadata where the XML had none.
    pub fn apply_metadata(&mut self, meta: &Metadata) {
        if self.year.is_none() {
            self.year = meta.year;
        }
        if self.country.is_none() {
            self.country.clone_from(&meta.country);
        }
    }
}

pub fn read_metadata<R: BufRead>(input: R) -> Result<HashMap<String, Metadata>> {
    let mut out = HashMap::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let meta: Metadata = serde_json::from_str(&line)?;
        out.insert(meta.doc_id.clone(), meta);
    }
    Ok(out)
}

static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^<>]*>").unwrap());
static SPACES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());

fn collapse(text: &str) -> String {
    SPACES.replace_all(text, " ").trim().to_string()
}

/// Removes inline tags, putting one space at every tag boundary, then
/// collapses whitespace runs and trims.
pub fn strip_markup(fragment: &str) -> String {
    let mut text: Cow<str> = Cow::Borrowed(fragment);
    // Removing a tag can expose another one (`<<b>>`), so run to a fixpoint.
    while TAG.is_match(&text) {
        text = Cow::Owned(TAG.replace_all(&text, " ").into_owned());
    }
    collapse(&text)
}

/// Paragraphs whose section heading contains any of `patterns`
/// (case-insensitive). An empty pattern list keeps everything.
pub fn filter_sections<P: AsRef<str>>(doc: &Document, patterns: &[P]) -> Vec<Paragraph> {
    doc.paragraphs
        .iter()
        .filter(|p| section_matches(&p.section, patterns))
        .cloned()
        .collect()
}

pub fn section_matches<P: AsRef<str>>(section: &str, patterns: &[P]) -> bool {
    if patterns.is_empty() {
        return true;
    }
    let section = section.to_lowercase();
    patterns.iter().any(|p| section.contains(&p.as_ref().to_lowercase()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    Section,
    Abstract,
    Heading,
    Paragraph,
    ArticleTitle,
    Metadata,
    MetaYear,
    MetaCountry,
    Other,
}

fn role(local: &str, in_metadata: bool) -> Role {
    match local.to_ascii_lowercase().as_str() {
        "section" | "sec" | "div" => Role::Section,
        "abstract" => Role::Abstract,
        "title" | "heading" | "h1" | "h2" | "h3" | "h4" | "h5" | "h6" => Role::Heading,
        "p" | "para" | "paragraph" => Role::Paragraph,
        "article-title" => Role::ArticleTitle,
        "metadata" | "meta" | "article-meta" => Role::Metadata,
        "year" if in_metadata => Role::MetaYear,
        "country" if in_metadata => Role::MetaCountry,
        _ => Role::Other,
    }
}

fn resolve_entity(name: &str) -> Option<&'static str> {
    Some(match name {
        "nbsp" => " ",
        "deg" => "°",
        "times" => "×",
        "plusmn" => "±",
        "minus" => "−",
        "ndash" => "–",
        "mdash" => "—",
        "micro" => "µ",
        "le" => "≤",
        "ge" => "≥",
        "thinsp" | "ensp" | "emsp" => " ",
        _ => return None,
    })
}

fn text_of<'a>(t: &'a BytesText<'a>) -> Cow<'a, str> {
    t.unescape_with(resolve_entity)
        .unwrap_or_else(|_| String::from_utf8_lossy(t.as_ref()))
}

struct Capture {
    role: Role,
    depth: usize,
    buf: String,
}

struct Frame {
    heading: Option<String>,
}

fn sections_of(frames: &[Frame]) -> (String, Option<String>) {
    let headings: Vec<&String> = frames.iter().filter_map(|f| f.heading.as_ref()).collect();
    match headings.as_slice() {
        [] => (String::new(), None),
        [only] => ((*only).clone(), None),
        [.., outer, inner] => ((*outer).clone(), Some((*inner).clone())),
    }
}

/// Parses one XML full text into a [`Document`].
pub fn parse_document(xml: &[u8], doc_id: &str) -> Result<Document> {
    let mut reader = Reader::from_reader(xml);
    let mut buf = Vec::new();
    let mut stack: Vec<Role> = Vec::new();
    // Root frame holds headings that appear outside any section element.
    let mut frames = vec![Frame { heading: None }];
    let mut capture: Option<Capture> = None;
    let mut doc = Document {
        doc_id: doc_id.to_string(),
        year: None,
        country: None,
        title: String::new(),
        paragraphs: Vec::new(),
    };

    loop {
        let event = reader.read_event_into(&mut buf).map_err(|e| Error::Xml {
            offset: reader.buffer_position(),
            message: e.to_string(),
        })?;
        match event {
            Event::Start(e) => {
                let in_meta = stack.contains(&Role::Metadata);
                let r = role(&String::from_utf8_lossy(e.local_name().as_ref()), in_meta);
                stack.push(r);
                if let Some(c) = capture.as_mut() {
                    c.buf.push(' ');
                    buf.clear();
                    continue;
                }
                match r {
                    Role::Section => frames.push(Frame { heading: None }),
                    Role::Abstract => frames.push(Frame {
                        heading: Some("Abstract".into()),
                    }),
                    Role::Heading | Role::Paragraph | Role::ArticleTitle | Role::MetaYear | Role::MetaCountry => {
                        capture = Some(Capture {
                            role: r,
                            depth: stack.len(),
                            buf: String::new(),
                        })
                    }
                    Role::Metadata | Role::Other => {}
                }
            }
            Event::End(_) => {
                let depth = stack.len();
                let r = stack.pop().ok_or_else(|| Error::Xml {
                    offset: reader.buffer_position(),
                    message: "unexpected closing tag".into(),
                })?;
                match capture.take() {
                    Some(c) if c.depth == depth => finish_capture(c, &mut frames, &mut doc),
                    Some(mut c) => {
                        c.buf.push(' ');
                        capture = Some(c);
                    }
                    None => {
                        if matches!(r, Role::Section | Role::Abstract) && frames.len() > 1 {
                            frames.pop();
                        }
                    }
                }
            }
            Event::Empty(_) => {
                if let Some(c) = capture.as_mut() {
                    c.buf.push_str("  ");
                }
            }
            Event::Text(t) => {
                if let Some(c) = capture.as_mut() {
                    c.buf.push_str(&text_of(&t));
                }
            }
            Event::CData(t) => {
                if let Some(c) = capture.as_mut() {
                    c.buf.push_str(&String::from_utf8_lossy(t.as_ref()));
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !stack.is_empty() {
        return Err(Error::Xml {
            offset: reader.buffer_position(),
            message: format!("{} element(s) left unclosed", stack.len()),
        });
    }
    if doc.paragraphs.is_empty() {
        log::warn!("document {doc_id} has no paragraph elements");
    }
    Ok(doc)
}

fn finish_capture(c: Capture, frames: &mut [Frame], doc: &mut Document) {
    let text = strip_markup(&c.buf);
    match c.role {
        Role::Paragraph => {
            if text.is_empty() {
                return;
            }
            let (section, subsection) = sections_of(frames);
            doc.paragraphs.push(Paragraph {
                section,
                subsection,
                text,
            });
        }
        Role::ArticleTitle => {
            if doc.title.is_empty() {
                doc.title = text;
            }
        }
        Role::Heading => {
            // A bare title before any section is the document title.
            if frames.len() == 1 && doc.title.is_empty() {
                doc.title = text;
            } else if let Some(frame) = frames.last_mut() {
                frame.heading = Some(text);
            }
        }
        Role::MetaYear => match text.parse() {
            Ok(y) => doc.year = Some(y),
            Err(_) => log::warn!("document {}: unparsable year {text:?}", doc.doc_id),
        },
        Role::MetaCountry if !text.is_empty() => doc.country = Some(text),
        _ => {}
    }
}
