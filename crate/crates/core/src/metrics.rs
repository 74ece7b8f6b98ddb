//! Entity-level evaluation: per-label counts, precision/recall/F1 and a
//! confusion matrix with a NONE row and column for misses and spurious
//! predictions.

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{check_non_overlapping, AnnotatedParagraph, EntitySpan, Label};
use crate::error::{Error, Result};

/// Index of the NONE row/column in [`MatchReport::confusion`].
pub const NONE: usize = Label::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MatchMode {
    /// Same label and identical offsets.
    #[default]
    Exact,
    /// Same label and any character overlap, matched greedily one-to-one.
    Overlap,
}

impl FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(MatchMode::Exact),
            "overlap" => Ok(MatchMode::Overlap),
            _ => Err(Error::Config(format!("unknown match mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }

    fn is_empty(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchReport {
    pub counts: [Counts; Label::COUNT],
    /// `confusion[gold][pred]`, labels in [`Label::ALL`] order, NONE last.
    pub confusion: [[u64; Label::COUNT + 1]; Label::COUNT + 1],
}

impl MatchReport {
    pub fn label(&self, label: Label) -> Counts {
        self.counts[label.index()]
    }

    pub fn total(&self) -> Counts {
        self.counts.iter().fold(Counts::default(), |acc, c| Counts {
            tp: acc.tp + c.tp,
            fp: acc.fp + c.fp,
            fn_: acc.fn_ + c.fn_,
        })
    }

    pub fn micro_precision(&self) -> f64 {
        self.total().precision()
    }

    pub fn micro_recall(&self) -> f64 {
        self.total().recall()
    }

    pub fn micro_f1(&self) -> f64 {
        self.total().f1()
    }

    /// Labels that occur in gold or prediction; macro averages run over these.
    pub fn active_labels(&self) -> Vec<Label> {
        Label::ALL.into_iter().filter(|l| !self.label(*l).is_empty()).collect()
    }

    fn macro_of(&self, metric: impl Fn(&Counts) -> f64) -> f64 {
        let active = self.active_labels();
        if active.is_empty() {
            return 0.0;
        }
        active.iter().map(|l| metric(&self.label(*l))).sum::<f64>() / active.len() as f64
    }

    pub fn macro_precision(&self) -> f64 {
        self.macro_of(Counts::precision)
    }

    pub fn macro_recall(&self) -> f64 {
        self.macro_of(Counts::recall)
    }

    pub fn macro_f1(&self) -> f64 {
        self.macro_of(Counts::f1)
    }

    pub fn merge(&mut self, other: &MatchReport) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            a.tp += b.tp;
            a.fp += b.fp;
            a.fn_ += b.fn_;
        }
        for (ra, rb) in self.confusion.iter_mut().zip(&other.confusion) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
    }

    pub fn to_json(&self) -> ReportJson {
        let row = |label: String, c: Counts| LabelRow {
            label,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
        };
        let mut names: Vec<String> = Label::ALL.iter().map(|l| l.to_string()).collect();
        names.push("NONE".into());
        ReportJson {
            labels: Label::ALL.iter().map(|l| row(l.to_string(), self.label(*l))).collect(),
            micro: row("micro".into(), self.total()),
            macro_precision: self.macro_precision(),
            macro_recall: self.macro_recall(),
            macro_f1: self.macro_f1(),
            matrix_labels: names,
            confusion: self.confusion.iter().map(|r| r.to_vec()).collect(),
        }
    }

    /// Confusion matrix as CSV: header `gold\pred,<labels...>,NONE`.
    pub fn write_confusion_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut names: Vec<&str> = Label::ALL.iter().map(|l| l.as_str()).collect();
        names.push("NONE");
        writeln!(out, "gold\\pred,{}", names.join(","))?;
        for (name, row) in names.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            writeln!(out, "{name},{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub label: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub labels: Vec<LabelRow>,
    pub micro: LabelRow,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub matrix_labels: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
}

fn boundary_match(mode: MatchMode, g: &EntitySpan, p: &EntitySpan) -> bool {
    match mode {
        MatchMode::Exact => g.start == p.start && g.end == p.end,
        MatchMode::Overlap => g.overlaps(p),
    }
}

/// Scores predicted spans against gold spans of one paragraph.
///
/// Matching walks gold spans by start offset and pairs each with the first
/// unused prediction (by start) that boundary-matches with the same label.
/// Leftover pairs that boundary-match with different labels are type errors
/// and land off the diagonal of the confusion matrix.
pub fn match_spans(gold: &[EntitySpan], pred: &[EntitySpan], mode: MatchMode) -> Result<MatchReport> {
    check_non_overlapping(gold)?;
    check_non_overlapping(pred)?;
    let mut g_order: Vec<usize> = (0..gold.len()).collect();
    g_order.sort_by_key(|&i| (gold[i].start, gold[i].end));
    let mut p_order: Vec<usize> = (0..pred.len()).collect();
    p_order.sort_by_key(|&i| (pred[i].start, pred[i].end));

    let mut report = MatchReport::default();
    let mut g_done = vec![false; gold.len()];
    let mut p_done = vec![false; pred.len()];

    for same_label in [true, false] {
        for &gi in &g_order {
            if g_done[gi] {
                continue;
            }
            let g = &gold[gi];
            let hit = p_order.iter().copied().find(|&pi| {
                !p_done[pi] && (pred[pi].label == g.label) == same_label && boundary_match(mode, g, &pred[pi])
            });
            if let Some(pi) = hit {
                g_done[gi] = true;
                p_done[pi] = true;
                let (gl, pl) = (g.label.index(), pred[pi].label.index());
                report.confusion[gl][pl] += 1;
                if same_label {
                    report.counts[gl].tp += 1;
                } else {
                    report.counts[gl].fn_ += 1;
                    report.counts[pl].fp += 1;
                }
            }
        }
    }
    for (gi, g) in gold.iter().enumerate() {
        if !g_done[gi] {
            report.counts[g.label.index()].fn_ += 1;
            report.confusion[g.label.index()][NONE] += 1;
        }
    }
    for (pi, p) in pred.iter().enumerate() {
        if !p_done[pi] {
            report.counts[p.label.index()].fp += 1;
            report.confusion[NONE][p.label.index()] += 1;
        }
    }
    Ok(report)
}

/// Scores a predicted corpus against a gold corpus paragraph by paragraph.
/// The two must cover the same texts in the same order.
pub fn match_corpus(gold: &[AnnotatedParagraph], pred: &[AnnotatedParagraph], mode: MatchMode) -> Result<MatchReport> {
    if gold.len() != pred.len() {
        return Err(Error::Alignment {
            index: gold.len().min(pred.len()),
        });
    }
    let mut report = MatchReport::default();
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.paragraph.text != p.paragraph.text {
            return Err(Error::Alignment { index: i });
        }
        report.merge(&match_spans(&g.spans, &p.spans, mode)?);
    }
    Ok(report)
}

/// Inter-annotator agreement with annotator A as gold and B as prediction,
/// using exact matching. The headline figure is [`MatchReport::macro_recall`].
pub fn iaa(annotator_a: &[AnnotatedParagraph], annotator_b: &[AnnotatedParagraph]) -> Result<MatchReport> {
    match_corpus(annotator_a, annotator_b, MatchMode::Exact)
}
