use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Tag, Token};
use crate::error::{Error, Result};
use crate::tagger::crf::{self, Transitions};
use crate::tagger::lstm::{self, LstmParams, LstmTrace};
use crate::tagger::matrix::{axpy, Matrix};

/// Training hyperparameters. Defaults are the best point of the reference
/// tuning run, with a lookup embedding of dimension 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaggerConfig {
    pub learning_rate: f64,
    pub dropout: f64,
    pub locked_dropout: f64,
    pub word_dropout: f64,
    pub hidden_size: usize,
    pub rnn_layers: usize,
    pub weight_decay: f64,
    pub embedding_dim: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            learning_rate: 0.15,
            dropout: 0.3,
            locked_dropout: 0.4,
            word_dropout: 0.1,
            hidden_size: 256,
            rnn_layers: 2,
            weight_decay: 0.0005,
            embedding_dim: 100,
            max_epochs: 100,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TaggerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, p) in [
            ("dropout", self.dropout),
            ("locked_dropout", self.locked_dropout),
            ("word_dropout", self.word_dropout),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        for (name, v) in [
            ("hidden_size", self.hidden_size),
            ("rnn_layers", self.rnn_layers),
            ("embedding_dim", self.embedding_dim),
            ("max_epochs", self.max_epochs),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Token to row index; row 0 is the unknown token.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub const UNKNOWN: &'static str = "<unk>";

    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let distinct: BTreeSet<&str> = tokens.into_iter().collect();
        let mut list = vec![Self::UNKNOWN.to_string()];
        list.extend(distinct.into_iter().filter(|t| *t != Self::UNKNOWN).map(str::to_string));
        Self::from_list(list)
    }

    /// Rebuilds a vocabulary from its stored order. The first entry must be
    /// the unknown token.
    pub fn from_list(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Everything except the embedding table: BiLSTM layers (forward and
/// backward direction each), emission projection and CRF transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub layers: Vec<[LstmParams; 2]>,
    pub emission_w: Matrix,
    pub emission_b: Vec<f64>,
    pub transitions: Transitions,
}

impl DenseParams {
    fn zeros(config: &TaggerConfig, num_tags: usize) -> Self {
        let h = config.hidden_size;
        let layers = (0..config.rnn_layers)
            .map(|l| {
                let input = if l == 0 { config.embedding_dim } else { 2 * h };
                [LstmParams::zeros(input, h), LstmParams::zeros(input, h)]
            })
            .collect();
        DenseParams {
            layers,
            emission_w: Matrix::zeros(num_tags, 2 * h),
            emission_b: vec![0.0; num_tags],
            transitions: Transitions::zeros(num_tags),
        }
    }

    fn init<R: Rng>(config: &TaggerConfig, num_tags: usize, rng: &mut R) -> Self {
        let h = config.hidden_size;
        let layers = (0..config.rnn_layers)
            .map(|l| {
                let input = if l == 0 { config.embedding_dim } else { 2 * h };
                [LstmParams::init(input, h, rng), LstmParams::init(input, h, rng)]
            })
            .collect();
        DenseParams {
            layers,
            emission_w: Matrix::uniform(num_tags, 2 * h, 1.0 / ((2 * h) as f64).sqrt(), rng),
            emission_b: vec![0.0; num_tags],
            transitions: Transitions::from_matrix(Matrix::uniform(num_tags + 2, num_tags + 2, 0.1, rng)),
        }
    }

    /// Parameter blocks in their fixed serialization order.
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (l, dirs) in self.layers.iter().enumerate() {
            for (d, p) in ["fwd", "bwd"].iter().zip(dirs) {
                out.push((format!("layer{l}.{d}.w_ih"), p.w_ih.as_slice()));
                out.push((format!("layer{l}.{d}.w_hh"), p.w_hh.as_slice()));
                out.push((format!("layer{l}.{d}.bias"), p.bias.as_slice()));
            }
        }
        out.push(("emission.w".into(), self.emission_w.as_slice()));
        out.push(("emission.b".into(), self.emission_b.as_slice()));
        out.push(("transitions".into(), self.transitions.matrix().as_slice()));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for dirs in &mut self.layers {
            for p in dirs.iter_mut() {
                out.push(p.w_ih.as_mut_slice());
                out.push(p.w_hh.as_mut_slice());
                out.push(p.bias.as_mut_slice());
            }
        }
        out.push(self.emission_w.as_mut_slice());
        out.push(self.emission_b.as_mut_slice());
        out.push(self.transitions.matrix_mut().as_mut_slice());
        out
    }

    fn add_scaled(&mut self, other: &DenseParams, scale: f64) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            axpy(scale, b.1, a);
        }
    }

    fn scale(&mut self, s: f64) {
        for block in self.blocks_mut() {
            block.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// BiLSTM-CRF tagger parameters together with vocabulary and tag inventory.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    pub config: TaggerConfig,
    pub vocab: Vocabulary,
    pub tags: Vec<Tag>,
    pub embeddings: Matrix,
    pub dense: DenseParams,
}

/// BiLSTM outputs `r` (forward and backward state concatenated per
/// position) and the emission scores computed from them.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    pub r: Vec<Vec<f64>>,
    pub emissions: Matrix,
}

/// Multipliers applied by word, plain and locked dropout.
struct Masks {
    input: Matrix,
    output: Matrix,
}

fn keep_mask<R: Rng>(rng: &mut R, len: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        return vec![1.0; len];
    }
    if p >= 1.0 {
        return vec![0.0; len];
    }
    let scale = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { scale })
        .collect()
}

fn feature_mask<R: Rng>(rng: &mut R, n: usize, dim: usize, dropout: f64, locked: f64) -> Matrix {
    let mut m = Matrix::zeros(n, dim);
    for t in 0..n {
        m.row_mut(t).copy_from_slice(&keep_mask(rng, dim, dropout));
    }
    let shared = keep_mask(rng, dim, locked);
    for t in 0..n {
        m.row_mut(t).iter_mut().zip(&shared).for_each(|(a, b)| *a *= b);
    }
    m
}

struct ForwardPass {
    ids: Vec<usize>,
    traces: Vec<(LstmTrace, LstmTrace)>,
    r: Vec<Vec<f64>>,
    r_used: Vec<Vec<f64>>,
    emissions: Matrix,
}

/// Data gradient of a batch. Embedding rows are sparse; the weight-decay
/// part of the gradient (`weight_decay · θ`) is left to the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embedding_rows: BTreeMap<usize, Vec<f64>>,
    pub dense: DenseParams,
}

impl Gradients {
    fn zeros(model: &TaggerModel) -> Self {
        Gradients {
            embedding_rows: BTreeMap::new(),
            dense: DenseParams::zeros(&model.config, model.tags.len()),
        }
    }

    fn add(&mut self, other: &Gradients) {
        for (row, g) in &other.embedding_rows {
            let dst = self.embedding_rows.entry(*row).or_insert_with(|| vec![0.0; g.len()]);
            axpy(1.0, g, dst);
        }
        self.dense.add_scaled(&other.dense, 1.0);
    }

    pub fn scale_by(&mut self, s: f64) {
        for g in self.embedding_rows.values_mut() {
            g.iter_mut().for_each(|v| *v *= s);
        }
        self.dense.scale(s);
    }

    pub fn norm(&self) -> f64 {
        let sparse: f64 = self.embedding_rows.values().flatten().map(|v| v * v).sum();
        let dense: f64 = self.dense.blocks().iter().flat_map(|b| b.1.iter()).map(|v| v * v).sum();
        (sparse + dense).sqrt()
    }

    /// The full gradient, weight decay included, as blocks aligned with
    /// [`TaggerModel::blocks`].
    pub fn to_blocks(&self, model: &TaggerModel) -> Vec<Vec<f64>> {
        let wd = model.config.weight_decay;
        let mut emb: Vec<f64> = model.embeddings.as_slice().iter().map(|v| wd * v).collect();
        let d = model.embeddings.cols();
        for (row, g) in &self.embedding_rows {
            axpy(1.0, g, &mut emb[row * d..(row + 1) * d]);
        }
        let mut out = vec![emb];
        for (g, p) in self.dense.blocks().into_iter().zip(model.dense.blocks()) {
            out.push(g.1.iter().zip(p.1).map(|(g, p)| g + wd * p).collect());
        }
        out
    }
}

/// One training sequence.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub tokens: &'a [Token],
    pub tags: &'a [Tag],
}

impl TaggerModel {
    pub fn new<R: Rng>(config: TaggerConfig, vocab: Vocabulary, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let tags = Tag::inventory();
        let embeddings = Matrix::uniform(vocab.len(), config.embedding_dim, 0.1, rng);
        let dense = DenseParams::init(&config, tags.len(), rng);
        Ok(TaggerModel {
            config,
            vocab,
            tags,
            embeddings,
            dense,
        })
    }

    /// All parameter blocks, embeddings first.
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out = vec![("embeddings".to_string(), self.embeddings.as_slice())];
        out.extend(self.dense.blocks());
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.embeddings.as_mut_slice()];
        out.extend(self.dense.blocks_mut());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, b)| b.iter().all(|v| v.is_finite()))
    }

    fn squared_norm(&self) -> f64 {
        self.blocks().iter().flat_map(|b| b.1.iter()).map(|v| v * v).sum()
    }

    pub fn token_ids(&self, tokens: &[Token]) -> Vec<usize> {
        tokens.iter().map(|t| self.vocab.id(&t.text)).collect()
    }

    fn sample_masks<R: Rng>(&self, n: usize, rng: &mut R) -> Masks {
        let c = &self.config;
        let word = keep_mask(rng, n, c.word_dropout);
        // Word dropout zeroes whole embeddings without rescaling.
        let word: Vec<f64> = word.iter().map(|&w| if w == 0.0 { 0.0 } else { 1.0 }).collect();
        let mut input = feature_mask(rng, n, c.embedding_dim, c.dropout, c.locked_dropout);
        for (t, w) in word.iter().enumerate() {
            input.row_mut(t).iter_mut().for_each(|v| *v *= w);
        }
        let output = feature_mask(rng, n, 2 * c.hidden_size, c.dropout, c.locked_dropout);
        Masks { input, output }
    }

    fn forward(&self, ids: Vec<usize>, masks: Option<&Masks>) -> ForwardPass {
        let n = ids.len();
        let mut inputs: Vec<Vec<f64>> = ids.iter().map(|&id| self.embeddings.row(id).to_vec()).collect();
        if let Some(m) = masks {
            for (t, x) in inputs.iter_mut().enumerate() {
                x.iter_mut().zip(m.input.row(t)).for_each(|(a, b)| *a *= b);
            }
        }
        let mut traces = Vec::with_capacity(self.dense.layers.len());
        let mut layer_in = inputs;
        for [fwd, bwd] in &self.dense.layers {
            let f = lstm::forward(fwd, &layer_in, false);
            let b = lstm::forward(bwd, &layer_in, true);
            layer_in = (0..n)
                .map(|t| f.outputs[t].iter().chain(&b.outputs[t]).copied().collect())
                .collect();
            traces.push((f, b));
        }
        let r = layer_in;
        let r_used: Vec<Vec<f64>> = match masks {
            Some(m) => r
                .iter()
                .enumerate()
                .map(|(t, v)| v.iter().zip(m.output.row(t)).map(|(a, b)| a * b).collect())
                .collect(),
            None => r.clone(),
        };
        let k = self.tags.len();
        let mut emissions = Matrix::zeros(n, k);
        for (t, v) in r_used.iter().enumerate() {
            let row = emissions.row_mut(t);
            row.copy_from_slice(&self.dense.emission_b);
            self.dense.emission_w.mul_vec_add(v, row);
        }
        ForwardPass {
            ids,
            traces,
            r,
            r_used,
            emissions,
        }
    }

    /// Runs the encoder. In train mode the dropout masks are drawn from
    /// `rng`; otherwise dropout is the identity and `rng` is untouched.
    pub fn encode_sequence<R: Rng>(&self, tokens: &[Token], train_mode: bool, rng: &mut R) -> Result<EncodedSequence> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        let masks = train_mode.then(|| self.sample_masks(tokens.len(), rng));
        let pass = self.forward(self.token_ids(tokens), masks.as_ref());
        Ok(EncodedSequence {
            r: pass.r,
            emissions: pass.emissions,
        })
    }

    fn sequence_gradient(&self, tokens: &[Token], tags: &[Tag], masks: Option<&Masks>) -> Result<(f64, Gradients)> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        if tokens.len() != tags.len() {
            return Err(Error::LengthMismatch {
                tokens: tokens.len(),
                tags: tags.len(),
            });
        }
        let pass = self.forward(self.token_ids(tokens), masks);
        let gold: Vec<usize> = tags.iter().map(|t| t.index()).collect();
        let (nll, d_emit, d_trans) = crf::nll_with_gradients(&pass.emissions, &self.dense.transitions, &gold);

        let mut g = Gradients::zeros(self);
        g.dense
            .transitions
            .matrix_mut()
            .as_mut_slice()
            .copy_from_slice(d_trans.as_slice());
        let n = pass.ids.len();
        let two_h = 2 * self.config.hidden_size;
        let mut d_layer: Vec<Vec<f64>> = vec![vec![0.0; two_h]; n];
        for (t, d_r) in d_layer.iter_mut().enumerate() {
            let de = d_emit.row(t);
            g.dense.emission_w.add_outer(de, &pass.r_used[t]);
            axpy(1.0, de, &mut g.dense.emission_b);
            self.dense.emission_w.mul_vec_t_add(de, d_r);
            if let Some(m) = masks {
                d_r.iter_mut().zip(m.output.row(t)).for_each(|(a, b)| *a *= b);
            }
        }
        let h = self.config.hidden_size;
        for (l, (f_trace, b_trace)) in pass.traces.iter().enumerate().rev() {
            let d_f: Vec<Vec<f64>> = d_layer.iter().map(|v| v[..h].to_vec()).collect();
            let d_b: Vec<Vec<f64>> = d_layer.iter().map(|v| v[h..].to_vec()).collect();
            let [pf, pb] = &self.dense.layers[l];
            let [gf, gb] = &mut g.dense.layers[l];
            let mut d_in = lstm::backward(pf, f_trace, &d_f, gf);
            let d_in_b = lstm::backward(pb, b_trace, &d_b, gb);
            for (a, b) in d_in.iter_mut().zip(&d_in_b) {
                axpy(1.0, b, a);
            }
            d_layer = d_in;
        }
        let d = self.config.embedding_dim;
        for (t, &id) in pass.ids.iter().enumerate() {
            let mut dx = d_layer[t].clone();
            if let Some(m) = masks {
                dx.iter_mut().zip(m.input.row(t)).for_each(|(a, b)| *a *= b);
            }
            let row = g.embedding_rows.entry(id).or_insert_with(|| vec![0.0; d]);
            axpy(1.0, &dx, row);
        }
        Ok((nll, g))
    }

    /// Mean CRF negative log-likelihood of the batch plus
    /// `weight_decay · ‖θ‖² / 2`, and the data gradient. Sequences are
    /// processed in parallel; each draws its dropout masks from a seed taken
    /// from `rng` in batch order, and gradients are summed in batch order.
    pub fn nll_loss_and_grad<R: Rng>(
        &self,
        batch: &[Example<'_>],
        train_mode: bool,
        rng: &mut R,
    ) -> Result<(f64, Gradients)> {
        let seeds: Vec<u64> = batch.iter().map(|_| if train_mode { rng.gen() } else { 0 }).collect();
        let results: Vec<Result<(f64, Gradients)>> = batch
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(ex, &seed)| {
                let masks =
                    train_mode.then(|| self.sample_masks(ex.tokens.len(), &mut ChaCha8Rng::seed_from_u64(seed)));
                self.sequence_gradient(ex.tokens, ex.tags, masks.as_ref())
            })
            .collect();
        let mut total = Gradients::zeros(self);
        let mut loss = 0.0;
        for (i, r) in results.into_iter().enumerate() {
            let (l, g) = r?;
            if !l.is_finite() {
                return Err(Error::NonFiniteLoss(i));
            }
            loss += l;
            total.add(&g);
        }
        let b = batch.len().max(1) as f64;
        total.scale_by(1.0 / b);
        let loss = loss / b + 0.5 * self.config.weight_decay * self.squared_norm();
        Ok((loss, total))
    }

    /// Best tag sequence for `tokens`. With `constrained`, IOB-invalid
    /// transitions are excluded from decoding.
    pub fn predict(&self, tokens: &[Token], constrained: bool) -> Result<Vec<Tag>> {
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let pass = self.forward(self.token_ids(tokens), None);
        let (path, _) = if constrained {
            crf::viterbi_decode(
                &pass.emissions,
                &self.dense.transitions.with_iob_constraints(&self.tags),
            )
        } else {
            crf::viterbi_decode(&pass.emissions, &self.dense.transitions)
        };
        Ok(path.into_iter().map(|i| self.tags[i]).collect())
    }

    /// Plain SGD step: `θ ← θ − lr · (g + weight_decay · θ)`.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        let wd = self.config.weight_decay;
        if wd > 0.0 {
            let shrink = 1.0 - learning_rate * wd;
            self.embeddings.as_mut_slice().iter_mut().for_each(|v| *v *= shrink);
            self.dense.scale(shrink);
        }
        let d = self.embeddings.cols();
        for (row, g) in &grads.embedding_rows {
            axpy(
                -learning_rate,
                g,
                &mut self.embeddings.as_mut_slice()[row * d..(row + 1) * d],
            );
        }
        self.dense.add_scaled(&grads.dense, -learning_rate);
    }

    /// Overwrites embedding rows of known tokens with external vectors.
    /// Returns how many rows were replaced.
    pub fn load_static_vectors(&mut self, vectors: &[(String, Vec<f64>)]) -> Result<usize> {
        let d = self.config.embedding_dim;
        let mut replaced = 0;
        for (token, v) in vectors {
            if v.len() != d {
                return Err(Error::Config(format!(
                    "vector for {token:?} has dimension {}, model expects {d}",
                    v.len()
                )));
            }
            if let Some(id) = self.vocab.get(token) {
                self.embeddings.row_mut(id).copy_from_slice(v);
                replaced += 1;
            }
        }
        Ok(replaced)
    }
}
