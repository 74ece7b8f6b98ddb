//! Skip-gram word vectors with negative sampling, and material-type
//! classification by cosine similarity to a list of query terms.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;
use crate::error::{Error, Result};
use crate::tagger::matrix::{axpy, dot, Matrix};

pub const DEFAULT_QUERIES: [&str; 8] = [
    "CH₃NH₃PbI₃",
    "PEDOT:PSS",
    "TiO₂",
    "graphene",
    "ZnO",
    "MoS₂",
    "MOF",
    "CNT",
];

pub const UNKNOWN: &str = "UNKNOWN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WordVecConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub min_count: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for WordVecConfig {
    fn default() -> Self {
        WordVecConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            min_count: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

/// Maps sub- and superscript digits to ASCII digits, so `TiO₂` and `TiO2`
/// compare equal.
pub fn fold_script_digits(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            '₀'..='₉' => char::from(b'0' + (c as u32 - '₀' as u32) as u8),
            '⁰' => '0',
            '¹' => '1',
            '²' => '2',
            '³' => '3',
            '⁴'..='⁹' => char::from(b'4' + (c as u32 - '⁴' as u32) as u8),
            _ => c,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
    input: Matrix,
    output: Matrix,
    config: WordVecConfig,
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gradients of the negated pair objective.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Loss `−log σ(u·v) − Σ_k log σ(−u_k·v)` for center vector `v`, context
/// output vector `u` and negative output vectors `u_k`, with its gradients.
pub fn pair_loss_and_grad(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> (f64, PairGradient) {
    let s = dot(context, center);
    let mut loss = -log_sigmoid(s);
    let g = sigmoid(s) - 1.0;
    let mut d_center: Vec<f64> = context.iter().map(|u| g * u).collect();
    let d_context: Vec<f64> = center.iter().map(|v| g * v).collect();
    let mut d_negs = Vec::with_capacity(negatives.len());
    for u in negatives {
        let s = dot(u, center);
        loss -= log_sigmoid(-s);
        let g = sigmoid(s);
        axpy(g, u, &mut d_center);
        d_negs.push(center.iter().map(|v| g * v).collect());
    }
    (
        loss,
        PairGradient {
            center: d_center,
            context: d_context,
            negatives: d_negs,
        },
    )
}

struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseTable { cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap();
        let x = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= x)
            .min(self.cumulative.len() - 1)
    }
}

/// Trains skip-gram vectors. Each inner list is one sentence; context
/// windows never cross sentence boundaries. Tokens below `min_count` are
/// dropped before windowing.
pub fn train_embeddings<S: AsRef<str>>(sentences: &[Vec<S>], config: &WordVecConfig) -> Result<EmbeddingSpace> {
    if config.dim == 0 || config.epochs == 0 || config.learning_rate <= 0.0 || config.learning_rate.is_nan() {
        return Err(Error::Config("dim, epochs and learning_rate must be positive".into()));
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for s in sentences {
        for t in s {
            *freq.entry(t.as_ref()).or_default() += 1;
        }
    }
    let mut entries: Vec<(&str, u64)> = freq.into_iter().filter(|(_, c)| *c >= config.min_count).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if entries.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let vocab: Vec<String> = entries.iter().map(|e| e.0.to_string()).collect();
    let counts: Vec<u64> = entries.iter().map(|e| e.1).collect();
    let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    let ids: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| index.get(t.as_ref()).copied()).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.dim;
    let mut input = Matrix::uniform(vocab.len(), d, 0.5 / d as f64, &mut rng);
    let mut output = Matrix::zeros(vocab.len(), d);
    let noise = NoiseTable::new(&counts);

    let total = (ids.iter().map(Vec::len).sum::<usize>() * config.epochs).max(1) as f64;
    let mut seen = 0usize;
    let mut neg_ids = Vec::with_capacity(config.negatives);
    for _ in 0..config.epochs {
        for sentence in &ids {
            for (i, &center) in sentence.iter().enumerate() {
                let lr = config.learning_rate * (1.0 - seen as f64 / total).max(1e-4);
                seen += 1;
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window + 1).min(sentence.len());
                for (j, &ctx) in sentence.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    neg_ids.clear();
                    for _ in 0..config.negatives {
                        let n = noise.sample(&mut rng);
                        if n != ctx {
                            neg_ids.push(n);
                        }
                    }
                    let v = input.row(center).to_vec();
                    let negs: Vec<&[f64]> = neg_ids.iter().map(|&n| output.row(n)).collect();
                    let (_, g) = pair_loss_and_grad(&v, output.row(ctx), &negs);
                    axpy(-lr, &g.context, output.row_mut(ctx));
                    for (&n, gn) in neg_ids.iter().zip(&g.negatives) {
                        axpy(-lr, gn, output.row_mut(n));
                    }
                    axpy(-lr, &g.center, input.row_mut(center));
                }
            }
        }
    }
    Ok(EmbeddingSpace {
        vocab,
        index,
        counts,
        input,
        output,
        config: config.clone(),
    })
}

fn letter_digit_runs(token: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut prev: Option<bool> = None;
    for (i, c) in token.char_indices() {
        let digit = c.is_numeric();
        if prev.is_some_and(|p| p != digit) {
            out.push(&token[start..i]);
            start = i;
        }
        prev = Some(digit);
    }
    if start < token.len() {
        out.push(&token[start..]);
    }
    out
}

/// Cosine similarity; errors on a zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classification {
    Query { query: String, similarity: f64 },
    Unknown,
}

impl Classification {
    pub fn label(&self) -> &str {
        match self {
            Classification::Query { query, .. } => query,
            Classification::Unknown => UNKNOWN,
        }
    }

    pub fn similarity(&self) -> Option<f64> {
        match self {
            Classification::Query { similarity, .. } => Some(*similarity),
            Classification::Unknown => None,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl EmbeddingSpace {
    /// A space holding externally trained vectors as its input vectors.
    pub fn from_vectors(vectors: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let d = vectors.first().map(|v| v.1.len()).ok_or(Error::EmptyVocabulary)?;
        let mut vocab = Vec::with_capacity(vectors.len());
        let mut data = Vec::with_capacity(vectors.len() * d);
        for (t, v) in vectors {
            if v.len() != d {
                return Err(Error::Config(format!(
                    "vector for {t:?} has dimension {}, expected {d}",
                    v.len()
                )));
            }
            vocab.push(t);
            data.extend(v);
        }
        let n = vocab.len();
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(EmbeddingSpace {
            vocab,
            index,
            counts: vec![0; n],
            input: Matrix::from_vec(n, d, data),
            output: Matrix::zeros(n, d),
            config: WordVecConfig {
                dim: d,
                ..WordVecConfig::default()
            },
        })
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn dim(&self) -> usize {
        self.input.cols()
    }

    pub fn config(&self) -> &WordVecConfig {
        &self.config
    }

    pub fn input_vectors(&self) -> &Matrix {
        &self.input
    }

    pub fn output_vectors(&self) -> &Matrix {
        &self.output
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.input.row(i))
    }

    /// Mean of the in-vocabulary token vectors of `phrase`, or `None` when
    /// no token is known. An unknown token contributes its known letter and
    /// digit runs instead (`TiO2` → `TiO`, `2`).
    pub fn phrase_vector(&self, phrase: &str) -> Option<Vec<f64>> {
        let folded = fold_script_digits(phrase);
        let mut sum = vec![0.0; self.dim()];
        let mut n = 0;
        let mut add = |v: &[f64]| {
            axpy(1.0, v, &mut sum);
            n += 1;
        };
        for t in tokenize(&folded) {
            match self.vector(&t.text) {
                Some(v) => add(v),
                None => {
                    for piece in letter_digit_runs(&t.text) {
                        if let Some(v) = self.vector(piece) {
                            add(v);
                        }
                    }
                }
            }
        }
        (n > 0).then(|| sum.into_iter().map(|v| v / n as f64).collect())
    }

    /// Rescales every input vector by `factor`.
    pub fn scaled(&self, factor: f64) -> EmbeddingSpace {
        let mut out = self.clone();
        out.input.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn write_vectors<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, t) in self.vocab.iter().enumerate() {
            write!(out, "{t}")?;
            for v in self.input.row(i) {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// The query whose vector is closest in cosine to the term; the earliest
/// query wins a tie. Queries without known tokens are skipped.
pub fn classify_material<Q: AsRef<str>>(term: &str, queries: &[Q], space: &EmbeddingSpace) -> Classification {
    let Some(v) = space.phrase_vector(term) else {
        return Classification::Unknown;
    };
    let mut best = Classification::Unknown;
    for q in queries {
        let Some(u) = space.phrase_vector(q.as_ref()) else {
            continue;
        };
        let Ok(sim) = cosine(&v, &u) else {
            continue;
        };
        if best.similarity().is_none_or(|b| sim > b) {
            best = Classification::Query {
                query: q.as_ref().to_string(),
                similarity: sim,
            };
        }
    }
    best
}

/// Writes `term,best_query,similarity` rows; unknown terms have an empty
/// similarity.
pub fn write_classifications<W: Write>(out: W, rows: &[(String, Classification)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(["term", "best_query", "similarity"]).map_err(io)?;
    for (term, c) in rows {
        let sim = c.similarity().map(|s| format!("{s:.6}")).unwrap_or_default();
        w.write_record([term.as_str(), c.label(), &sim]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `token v1 ... vd` lines. A leading `count dim` header line, as
/// written by word2vec, is skipped.
pub fn read_vectors<R: BufRead>(input: R) -> Result<Vec<(String, Vec<f64>)>> {
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            continue;
        }
        let err = |message: String| Error::VectorFormat { line: i + 1, message };
        let values = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| err(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(err("no values".into()));
        }
        if let Some(first) = out.first() {
            if first.1.len() != values.len() {
                return Err(err(format!(
                    "expected {} values, found {}",
                    first.1.len(),
                    values.len()
                )));
            }
        }
        out.push((fields[0].to_string(), values));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Vec<Vec<&'static str>> {
        let mut s = Vec::new();
        for k in 0..60 {
            s.push(vec!["alpha", "beta"]);
            s.push(if k % 2 == 0 {
                vec!["gamma", "delta", "eps"]
            } else {
                vec!["eps", "gamma", "zeta"]
            });
        }
        s
    }

    fn small() -> WordVecConfig {
        WordVecConfig {
            dim: 16,
            window: 2,
            min_count: 1,
            epochs: 20,
            seed: 4,
            ..WordVecConfig::default()
        }
    }

    #[test]
    fn cosine_cases() {
        let v = [1.0, -2.0, 0.5];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert!((cosine(&v, &[2.0, -4.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn vocabulary_order_and_min_count() {
        let sp = train_embeddings(
            &corpus(),
            &WordVecConfig {
                min_count: 60,
                ..small()
            },
        )
        .unwrap();
        assert_eq!(sp.vocab(), ["alpha", "beta", "eps", "gamma"]);
        assert_eq!(sp.counts(), [60; 4]);
        assert!(matches!(
            train_embeddings(
                &corpus(),
                &WordVecConfig {
                    min_count: 1000,
                    ..small()
                }
            ),
            Err(Error::EmptyVocabulary)
        ));
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            train_embeddings(&corpus(), &small()).unwrap(),
            train_embeddings(&corpus(), &small()).unwrap()
        );
    }

    #[test]
    fn exclusive_pair_is_closest() {
        let sp = train_embeddings(&corpus(), &small()).unwrap();
        let a = sp.vector("alpha").unwrap();
        let ab = cosine(a, sp.vector("beta").unwrap()).unwrap();
        for c in ["gamma", "delta", "eps", "zeta"] {
            assert!(ab > cosine(a, sp.vector(c).unwrap()).unwrap(), "{c}");
        }
    }

    #[test]
    fn classification_rules() {
        let sp = train_embeddings(&corpus(), &small()).unwrap();
        let queries = ["gamma", "alpha"];
        assert_eq!(classify_material("alpha", &queries, &sp).label(), "alpha");
        assert_eq!(classify_material("beta", &queries, &sp).label(), "alpha");
        assert_eq!(classify_material("unseen", &queries, &sp), Classification::Unknown);
        for term in ["beta", "delta", "zeta eps"] {
            assert_eq!(
                classify_material(term, &queries, &sp).label(),
                classify_material(term, &queries, &sp.scaled(3.5)).label()
            );
        }
    }

    #[test]
    fn unknown_tokens_fall_back_to_runs() {
        assert_eq!(letter_digit_runs("CH3NH3PbI3"), ["CH", "3", "NH", "3", "PbI", "3"]);
        let sp =
            EmbeddingSpace::from_vectors(vec![("TiO".into(), vec![1.0, 0.0]), ("2".into(), vec![0.0, 1.0])]).unwrap();
        assert_eq!(sp.phrase_vector("TiO₂"), Some(vec![0.5, 0.5]));
        assert_eq!(sp.phrase_vector("TiO 2"), sp.phrase_vector("TiO2"));
        assert_eq!(sp.phrase_vector("ZnO"), None);
    }

    #[test]
    fn script_digits_fold() {
        assert_eq!(fold_script_digits("CH₃NH₃PbI₃"), "CH3NH3PbI3");
        assert_eq!(fold_script_digits("m²"), "m2");
    }

    #[test]
    fn vectors_round_trip() {
        let sp = train_embeddings(&corpus(), &small()).unwrap();
        let mut buf = Vec::new();
        sp.write_vectors(&mut buf).unwrap();
        let back = EmbeddingSpace::from_vectors(read_vectors(buf.as_slice()).unwrap()).unwrap();
        assert_eq!(back.vocab(), sp.vocab());
        assert_eq!(back.input_vectors(), sp.input_vectors());
        assert!(read_vectors(&b"a 1 2\nb 1\n"[..]).is_err());
        assert_eq!(read_vectors(&b"2 2\na 1 2\n"[..]).unwrap().len(), 1);
    }
}
