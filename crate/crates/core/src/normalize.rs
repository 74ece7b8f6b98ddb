//! Quantity-phrase normalization for temperature, time, conductivity and
//! activation energy.
//!
//! A phrase goes through four steps: lexical idioms are replaced by numbers,
//! the phrase is cut at every unit occurrence, each piece is parsed for a
//! numeric expression, and values are converted to the canonical unit.
//! Arithmetic is done on decimals so that printed values such as `0.00103`
//! come out exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::corpus::{EntitySpan, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantityKind {
    Temperature,
    Time,
    Conductivity,
    ActivationEnergy,
}

impl QuantityKind {
    pub const ALL: [QuantityKind; 4] = [
        QuantityKind::Temperature,
        QuantityKind::Time,
        QuantityKind::Conductivity,
        QuantityKind::ActivationEnergy,
    ];

    pub fn canonical_unit(self) -> &'static str {
        match self {
            QuantityKind::Temperature => "°C",
            QuantityKind::Time => "h",
            QuantityKind::Conductivity => "S/cm",
            QuantityKind::ActivationEnergy => "eV",
        }
    }

    /// The entity label whose spans carry this kind of quantity.
    pub fn from_label(label: Label) -> Option<QuantityKind> {
        match label {
            Label::PropTemp => Some(QuantityKind::Temperature),
            Label::PropTime => Some(QuantityKind::Time),
            Label::CharaCond => Some(QuantityKind::Conductivity),
            Label::CharaAct => Some(QuantityKind::ActivationEnergy),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            QuantityKind::Temperature => "temperature",
            QuantityKind::Time => "time",
            QuantityKind::Conductivity => "conductivity",
            QuantityKind::ActivationEnergy => "activation_energy",
        }
    }
}

impl fmt::Display for QuantityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuantityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QuantityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown quantity kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedQuantity {
    pub kind: QuantityKind,
    /// One value, or lower and upper bound in ascending order.
    pub values: Vec<f64>,
    pub unit: String,
    pub source: String,
}

impl NormalizedQuantity {
    pub fn upper(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A parsed numeric expression before unit conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NumericValue {
    Single(Decimal),
    Pair(Decimal, Decimal),
}

fn re(pattern: &str) -> Regex {
    Regex::new(pattern).unwrap()
}

const NUM: &str = r"(?:\d+(?:\.\d+)?|\.\d+)";
const TIMES: &str = r"(?:×|x|X|\*|·|⋅)";

static ROOM_TEMPERATURE: LazyLock<Regex> = LazyLock::new(|| re(r"(?i)\broom[\s-]*temperatures?\b|\bRT\b"));
static OVERNIGHT: LazyLock<Regex> = LazyLock::new(|| re(r"(?i)\bover[\s-]?night\b"));
static HALF_HOUR: LazyLock<Regex> = LazyLock::new(|| re(r"(?i)\bhalf\s+an\s+hour\b"));
static HALF_DAY: LazyLock<Regex> = LazyLock::new(|| re(r"(?i)\bhalf\s+a\s+day\b"));
static SPELLED: LazyLock<Regex> = LazyLock::new(|| {
    re(
        r"(?i)\b(one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve|thirteen|fourteen|fifteen|sixteen|seventeen|eighteen|nineteen|twenty)\b",
    )
});

const SPELLED_NUMBERS: [&str; 20] = [
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
    "twenty",
];

/// Replaces lexical measurement idioms ("room temperature", "overnight",
/// "two hours") with numeric forms. Temperature idioms only apply to
/// temperatures and time idioms only to times.
pub fn resolve_lexical(phrase: &str, kind: QuantityKind) -> String {
    let mut text = phrase.to_string();
    match kind {
        QuantityKind::Temperature => {
            text = ROOM_TEMPERATURE.replace_all(&text, "22 °C").into_owned();
        }
        QuantityKind::Time => {
            text = OVERNIGHT.replace_all(&text, "8 h").into_owned();
            text = HALF_HOUR.replace_all(&text, "0.5 h").into_owned();
            text = HALF_DAY.replace_all(&text, "12 h").into_owned();
        }
        _ => {}
    }
    SPELLED
        .replace_all(&text, |c: &Captures| {
            let word = c[1].to_lowercase();
            let n = SPELLED_NUMBERS.iter().position(|w| *w == word).unwrap_or(0) + 1;
            n.to_string()
        })
        .into_owned()
}

static TEMPERATURE_UNIT: LazyLock<Regex> =
    LazyLock::new(|| re(r"(?P<c>(?:°|º|˚)\s*C\b|℃|\bdeg(?:rees?)?\s*C(?:elsius)?\b)|(?P<k>\bK\b|\b[Kk]elvin\b)"));
static TIME_UNIT: LazyLock<Regex> = LazyLock::new(|| {
    re(r"(?i)\b(?:(?P<s>seconds?|secs?|s)|(?P<min>minutes?|mins?)|(?P<h>hours?|hrs?|h)|(?P<d>days?|d))\b")
});
static CONDUCTIVITY_UNIT: LazyLock<Regex> =
    LazyLock::new(|| re(r"(?P<p>m|µ|μ|u)?S\s*(?:/\s*cm\b|cm\s*(?:-|−|–|\^-)\s*1\b)"));
static ENERGY_UNIT: LazyLock<Regex> = LazyLock::new(|| re(r"(?P<m>m)?eV\b"));

struct UnitMatch {
    start: usize,
    end: usize,
    unit: &'static str,
}

fn find_units(text: &str, kind: QuantityKind) -> Vec<UnitMatch> {
    let (regex, classify): (&Regex, fn(&Captures) -> &'static str) = match kind {
        QuantityKind::Temperature => (&TEMPERATURE_UNIT, |c| if c.name("k").is_some() { "K" } else { "°C" }),
        QuantityKind::Time => (&TIME_UNIT, |c| {
            if c.name("s").is_some() {
                "s"
            } else if c.name("min").is_some() {
                "min"
            } else if c.name("h").is_some() {
                "h"
            } else {
                "days"
            }
        }),
        QuantityKind::Conductivity => (&CONDUCTIVITY_UNIT, |c| match c.name("p").map(|m| m.as_str()) {
            Some("m") => "mS/cm",
            Some(_) => "μS/cm",
            None => "S/cm",
        }),
        QuantityKind::ActivationEnergy => (&ENERGY_UNIT, |c| if c.name("m").is_some() { "meV" } else { "eV" }),
    };
    regex
        .captures_iter(text)
        .map(|c| {
            let m = c.get(0).unwrap();
            UnitMatch {
                start: m.start(),
                end: m.end(),
                unit: classify(&c),
            }
        })
        .collect()
}

fn pow10(exp: i64) -> Option<Decimal> {
    if exp >= 0 {
        let mut v = Decimal::ONE;
        for _ in 0..exp {
            v = v.checked_mul(Decimal::TEN)?;
        }
        Some(v)
    } else if exp >= -28 {
        Some(Decimal::new(1, (-exp) as u32))
    } else {
        None
    }
}

fn scale(value: Decimal, exp: i64) -> Option<Decimal> {
    value.checked_mul(pow10(exp)?)
}

fn normalize_sign(s: &str) -> String {
    s.replace(['−', '–', '—'], "-")
}

fn parse_decimal(s: &str) -> Option<Decimal> {
    let s = normalize_sign(s.trim());
    let s = if let Some(rest) = s.strip_prefix("-.") {
        format!("-0.{rest}")
    } else if s.starts_with('.') {
        format!("0{s}")
    } else {
        s
    };
    if s.contains('e') {
        Decimal::from_scientific(&s).ok()
    } else {
        Decimal::from_str_exact(&s).ok()
    }
}

fn exponent(c: &Captures) -> Option<i64> {
    match c.name("e") {
        None => Some(0),
        Some(e) => {
            let mag: i64 = e.as_str().parse().ok()?;
            let negative = c.name("es").is_some_and(|s| matches!(s.as_str(), "-" | "−" | "–"));
            Some(if negative { -mag } else { mag })
        }
    }
}

fn signed(c: &Captures, sign: &str, num: &str) -> Option<Decimal> {
    let v = parse_decimal(c.name(num)?.as_str())?;
    Some(if c.name(sign).is_some() { -v } else { v })
}

fn pair(a: Decimal, b: Decimal) -> NumericValue {
    if a <= b {
        NumericValue::Pair(a, b)
    } else {
        NumericValue::Pair(b, a)
    }
}

static PLUS_MINUS: LazyLock<Regex> = LazyLock::new(|| {
    re(&format!(
        r"\(?\s*(?P<sa>[-−])?(?P<a>{NUM})\s*(?:±|\+/-|\+-|∓)\s*(?P<b>{NUM})\s*\)?(?:\s*{TIMES}\s*10\s*\^?\s*(?P<es>[-−–+]?)\s*(?P<e>\d+))?"
    ))
});
static PAREN_UNCERTAINTY: LazyLock<Regex> = LazyLock::new(|| {
    re(&format!(
        r"(?P<sa>[-−])?(?P<a>\d+(?:\.(?P<frac>\d+))?)\((?P<k>\d+)\)(?:\s*{TIMES}\s*10\s*\^?\s*(?P<es>[-−–+]?)\s*(?P<e>\d+))?"
    ))
});
static SCIENTIFIC: LazyLock<Regex> = LazyLock::new(|| {
    re(&format!(
        r"(?P<sa>[-−])?(?P<a>{NUM})\s*{TIMES}\s*10\s*\^?\s*(?P<es>[-−–+]?)\s*(?P<e>\d+)"
    ))
});
// A bare exponent remnant such as `10 -3` (from `10<sup>-3</sup>`).
static BARE_POWER: LazyLock<Regex> = LazyLock::new(|| re(r"(?:^|\s)(?P<t>10\s+(?P<es>[-−–])(?P<e>\d+))\b"));

const SNUM: &str = r"(?P<sa>[-−])?(?P<a>\d+(?:\.\d+)?(?:e-?\d+)?|\.\d+(?:e-?\d+)?)";
const SNUM_B: &str = r"(?P<sb>[-−])?(?P<b>\d+(?:\.\d+)?(?:e-?\d+)?|\.\d+(?:e-?\d+)?)";

static INEQUALITY: LazyLock<Regex> = LazyLock::new(|| {
    re(&format!(
        r"{SNUM}\s*(?:<=|>=|<|>|≤|≥|⩽|⩾)[^<>≤≥⩽⩾\d]*?(?:<=|>=|<|>|≤|≥|⩽|⩾)\s*{SNUM_B}"
    ))
});
static RANGE: LazyLock<Regex> = LazyLock::new(|| re(&format!(r"{SNUM}\s*(?:-|−|–|—|~|\bto\b)\s*{SNUM_B}")));
static PLAIN: LazyLock<Regex> = LazyLock::new(|| re(SNUM));

/// Blanks a byte range with ASCII spaces so later passes keep offsets.
fn mask(text: &mut String, start: usize, end: usize, replacement: &str) {
    let pad = (end - start).saturating_sub(replacement.len());
    let filler = format!("{replacement}{}", " ".repeat(pad));
    text.replace_range(start..end, &filler);
}

/// Parses every numeric expression in a segment, in text order. Patterns
/// are tried in priority order: `a ± b [× 10 c]`, `a(k)`, bounded
/// inequalities, ranges, then plain (possibly scientific) numbers.
pub fn parse_numeric_expression(segment: &str) -> Vec<NumericValue> {
    let mut text = segment.to_string();
    let mut found: Vec<(usize, NumericValue)> = Vec::new();

    let pm: Vec<(usize, usize, Option<NumericValue>)> = PLUS_MINUS
        .captures_iter(&text)
        .map(|c| {
            let m = c.get(0).unwrap();
            let v = (|| {
                let a = signed(&c, "sa", "a")?;
                let b = parse_decimal(c.name("b")?.as_str())?;
                let e = exponent(&c)?;
                Some(pair(scale(a - b, e)?, scale(a + b, e)?))
            })();
            (m.start(), m.end(), v)
        })
        .collect();
    for (s, e, v) in pm {
        mask(&mut text, s, e, "");
        found.extend(v.map(|v| (s, v)));
    }

    let paren: Vec<(usize, usize, Option<NumericValue>)> = PAREN_UNCERTAINTY
        .captures_iter(&text)
        .map(|c| {
            let m = c.get(0).unwrap();
            let v = (|| {
                let a = signed(&c, "sa", "a")?;
                let decimals = c.name("frac").map_or(0, |f| f.as_str().len()) as u32;
                let k = Decimal::from_str_exact(c.name("k")?.as_str()).ok()?;
                let delta = k.checked_mul(Decimal::new(1, decimals))?;
                let e = exponent(&c)?;
                Some(pair(scale(a - delta, e)?, scale(a + delta, e)?))
            })();
            (m.start(), m.end(), v)
        })
        .collect();
    for (s, e, v) in paren {
        mask(&mut text, s, e, "");
        found.extend(v.map(|v| (s, v)));
    }

    // Rewrite scientific notation as `ae-b` in place, padded to the same
    // length so positions stay comparable.
    let sci: Vec<(usize, usize, Option<String>)> = SCIENTIFIC
        .captures_iter(&text)
        .map(|c| {
            let m = c.get(0).unwrap();
            let lit = (|| {
                let a = signed(&c, "sa", "a")?;
                Some(scale(a, exponent(&c)?)?.normalize().to_string())
            })();
            (m.start(), m.end(), lit)
        })
        .collect();
    for (s, e, lit) in sci {
        mask(&mut text, s, e, lit.as_deref().unwrap_or(""));
    }
    let bare: Vec<(usize, usize, Option<String>)> = BARE_POWER
        .captures_iter(&text)
        .map(|c| {
            let m = c.name("t").unwrap();
            let lit = exponent(&c).and_then(pow10).map(|v| v.normalize().to_string());
            (m.start(), m.end(), lit)
        })
        .collect();
    for (s, e, lit) in bare {
        mask(&mut text, s, e, lit.as_deref().unwrap_or(""));
    }

    for regex in [&*INEQUALITY, &*RANGE] {
        let hits: Vec<(usize, usize, Option<NumericValue>)> = regex
            .captures_iter(&text)
            .map(|c| {
                let m = c.get(0).unwrap();
                let v = (|| Some(pair(signed(&c, "sa", "a")?, signed(&c, "sb", "b")?)))();
                (m.start(), m.end(), v)
            })
            .collect();
        for (s, e, v) in hits {
            mask(&mut text, s, e, "");
            found.extend(v.map(|v| (s, v)));
        }
    }

    for c in PLAIN.captures_iter(&text) {
        let start = c.get(0).unwrap().start();
        // A hyphen glued to a preceding digit is not a sign.
        let glued = text[..start].chars().next_back().is_some_and(|ch| ch.is_ascii_digit());
        let v = if glued {
            parse_decimal(c.name("a").unwrap().as_str())
        } else {
            signed(&c, "sa", "a")
        };
        if let Some(v) = v {
            found.push((start, NumericValue::Single(v)));
        }
    }

    found.sort_by_key(|(s, _)| *s);
    found.into_iter().map(|(_, v)| v).collect()
}

fn convert_decimal(value: Decimal, unit: &str, kind: QuantityKind) -> Result<Decimal> {
    let unsupported = || Error::UnsupportedUnit {
        unit: unit.to_string(),
        kind: kind.to_string(),
    };
    let v = match (kind, unit) {
        (QuantityKind::Temperature, "°C" | "℃") => value,
        // Integer offset: 500 K reads as 227 °C.
        (QuantityKind::Temperature, "K") => value - Decimal::from(273),
        (QuantityKind::Time, "h") => value,
        (QuantityKind::Time, "s") => value / Decimal::from(3600),
        (QuantityKind::Time, "min") => value / Decimal::from(60),
        (QuantityKind::Time, "day" | "days" | "d") => value * Decimal::from(24),
        (QuantityKind::Conductivity, "S/cm") => value,
        (QuantityKind::Conductivity, "mS/cm") => value * Decimal::new(1, 3),
        (QuantityKind::Conductivity, "μS/cm" | "µS/cm" | "uS/cm") => value * Decimal::new(1, 6),
        (QuantityKind::ActivationEnergy, "eV") => value,
        (QuantityKind::ActivationEnergy, "meV") => value * Decimal::new(1, 3),
        _ => return Err(unsupported()),
    };
    Ok(v)
}

fn to_f64(d: Decimal) -> f64 {
    // Through the shortest decimal string so the result is the f64 nearest
    // to the printed value.
    d.normalize().to_string().parse().unwrap_or(f64::NAN)
}

/// Converts `value` in `unit` into the canonical unit of `kind`.
pub fn convert_unit(value: f64, unit: &str, kind: QuantityKind) -> Result<f64> {
    let d = Decimal::from_str(&value.to_string())
        .or_else(|_| Decimal::from_scientific(&format!("{value:e}")))
        .map_err(|_| Error::Config(format!("value {value} is out of decimal range")))?;
    convert_decimal(d, unit, kind).map(to_f64)
}

static CONNECTOR: LazyLock<Regex> = LazyLock::new(|| re(r"^\s*(?:to\b|~|–|—|-\s|−\s)"));

/// Normalizes one extracted phrase into zero or more quantities. Never
/// fails: unrecognized text yields an empty list.
pub fn normalize_mention(phrase: &str, kind: QuantityKind) -> Vec<NormalizedQuantity> {
    let text = resolve_lexical(phrase, kind);

    // Units written as a parenthesized label, as in `Ea(eV)`, name the unit
    // of the whole phrase rather than ending a segment.
    let mut text = text;
    let mut label_unit = None;
    for u in find_units(&text, kind).into_iter().rev() {
        let before = text[..u.start].trim_end();
        let after = text[u.end..].trim_start();
        if before.ends_with('(') && after.starts_with(')') {
            let open = before.len() - 1;
            let close = u.end + (text[u.end..].len() - after.len()) + 1;
            text.replace_range(open..close, " ");
            label_unit.get_or_insert(u.unit);
        }
    }

    let units = find_units(&text, kind);
    let mut segments: Vec<(&str, &str)> = Vec::new();
    if units.is_empty() {
        segments.push((&text, label_unit.unwrap_or(kind.canonical_unit())));
    } else {
        let mut prev = 0;
        for u in &units {
            segments.push((&text[prev..u.start], u.unit));
            prev = u.end;
        }
        let tail = &text[prev..];
        if tail.chars().any(|c| c.is_ascii_digit()) {
            segments.push((tail, units.last().unwrap().unit));
        }
    }

    let mut out: Vec<NormalizedQuantity> = Vec::new();
    for (i, (segment, unit)) in segments.into_iter().enumerate() {
        let (segment, continues) = match CONNECTOR.find(segment) {
            Some(m) if i > 0 => (&segment[m.end()..], true),
            _ => (segment, false),
        };
        let parsed = parse_numeric_expression(segment);
        let single_value = parsed.len() == 1;
        for value in parsed {
            let raw = match value {
                NumericValue::Single(v) => vec![v],
                NumericValue::Pair(a, b) => vec![a, b],
            };
            let converted: Result<Vec<f64>> = raw
                .into_iter()
                .map(|v| convert_decimal(v, unit, kind).map(to_f64))
                .collect();
            let Ok(mut values) = converted else {
                continue;
            };
            if values.iter().any(|v| !v.is_finite()) {
                continue;
            }
            if kind == QuantityKind::Time && values.iter().any(|v| *v < 0.0) {
                continue;
            }
            // "3 s to 8 min": the second piece closes a range opened by the
            // first.
            if let Some(prev) = out
                .last_mut()
                .filter(|p| continues && single_value && values.len() == 1 && p.values.len() == 1)
            {
                prev.values.push(values[0]);
                prev.values.sort_by(f64::total_cmp);
                continue;
            }
            values.sort_by(f64::total_cmp);
            out.push(NormalizedQuantity {
                kind,
                values,
                unit: kind.canonical_unit().to_string(),
                source: phrase.to_string(),
            });
        }
    }
    if out.is_empty() && !phrase.trim().is_empty() {
        log::info!("no {kind} pattern matched {phrase:?}");
    }
    out
}

/// One normalized quantity tied to the span it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityRecord {
    pub doc_id: String,
    pub paragraph_index: usize,
    pub span: EntitySpan,
    pub kind: QuantityKind,
    pub values: Vec<f64>,
    pub unit: String,
}

/// Normalizes every quantity-bearing span of a paragraph. Spans whose phrase
/// matched nothing are reported through `gaps`.
pub fn normalize_spans(
    doc_id: &str,
    paragraph_index: usize,
    spans: &[EntitySpan],
    gaps: &mut PatternGaps,
) -> Vec<QuantityRecord> {
    let mut out = Vec::new();
    for span in spans {
        let Some(kind) = QuantityKind::from_label(span.label) else {
            continue;
        };
        let quantities = normalize_mention(&span.surface, kind);
        if quantities.is_empty() {
            gaps.record(kind, &span.surface);
        }
        out.extend(quantities.into_iter().map(|q| QuantityRecord {
            doc_id: doc_id.to_string(),
            paragraph_index,
            span: span.clone(),
            kind: q.kind,
            values: q.values,
            unit: q.unit,
        }));
    }
    out
}

/// Counts of phrases no pattern recognized, for pattern-gap review.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatternGaps {
    counts: BTreeMap<(QuantityKind, String), usize>,
}

impl PatternGaps {
    pub fn record(&mut self, kind: QuantityKind, phrase: &str) {
        *self.counts.entry((kind, phrase.to_string())).or_default() += 1;
    }

    pub fn merge(&mut self, other: PatternGaps) {
        for (k, n) in other.counts {
            *self.counts.entry(k).or_default() += n;
        }
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Writes `count<TAB>kind<TAB>phrase` lines, most frequent first.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut rows: Vec<(&(QuantityKind, String), &usize)> = self.counts.iter().collect();
        rows.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        writeln!(out, "count\tkind\tphrase")?;
        for ((kind, phrase), n) in rows {
            writeln!(out, "{n}\t{kind}\t{phrase}")?;
        }
        Ok(())
    }
}
