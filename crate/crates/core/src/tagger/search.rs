use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::AnnotatedParagraph;
use crate::error::{Error, Result};
use crate::tagger::model::TaggerConfig;
use crate::tagger::train::train;

/// Closed sampling ranges for the tuned hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub learning_rate: (f64, f64),
    pub dropout: (f64, f64),
    pub locked_dropout: (f64, f64),
    pub word_dropout: (f64, f64),
    pub hidden_size: (usize, usize),
    pub rnn_layers: (usize, usize),
    pub weight_decay: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            learning_rate: (0.05, 0.3),
            dropout: (0.3, 0.6),
            locked_dropout: (0.3, 0.6),
            word_dropout: (0.05, 0.15),
            hidden_size: (32, 256),
            rnn_layers: (1, 3),
            weight_decay: (0.0001, 0.0005),
        }
    }
}

fn within(v: f64, (lo, hi): (f64, f64)) -> bool {
    lo <= v && v <= hi
}

impl SearchSpace {
    pub fn contains(&self, c: &TaggerConfig) -> bool {
        within(c.learning_rate, self.learning_rate)
            && within(c.dropout, self.dropout)
            && within(c.locked_dropout, self.locked_dropout)
            && within(c.word_dropout, self.word_dropout)
            && (self.hidden_size.0..=self.hidden_size.1).contains(&c.hidden_size)
            && (self.rnn_layers.0..=self.rnn_layers.1).contains(&c.rnn_layers)
            && within(c.weight_decay, self.weight_decay)
    }

    /// Draws one config; fields outside the space are copied from `base`.
    pub fn sample<R: Rng>(&self, base: &TaggerConfig, rng: &mut R) -> TaggerConfig {
        let mut real = |(lo, hi): (f64, f64)| rng.gen_range(lo..=hi);
        let learning_rate = real(self.learning_rate);
        let dropout = real(self.dropout);
        let locked_dropout = real(self.locked_dropout);
        let word_dropout = real(self.word_dropout);
        let weight_decay = real(self.weight_decay);
        TaggerConfig {
            learning_rate,
            dropout,
            locked_dropout,
            word_dropout,
            weight_decay,
            hidden_size: rng.gen_range(self.hidden_size.0..=self.hidden_size.1),
            rnn_layers: rng.gen_range(self.rnn_layers.0..=self.rnn_layers.1),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub config: TaggerConfig,
    pub dev_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Trial,
    pub trials: Vec<Trial>,
}

/// Trains `budget` sampled configs and keeps the one with the best dev
/// micro-F1; the earliest wins a tie. Each trial trains with the seed drawn
/// for it, so the whole search is fixed by `seed`.
pub fn random_search(
    space: &SearchSpace,
    base: &TaggerConfig,
    budget: usize,
    seed: u64,
    train_set: &[AnnotatedParagraph],
    dev_set: &[AnnotatedParagraph],
) -> Result<SearchResult> {
    if budget == 0 {
        return Err(Error::Config("search budget must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials: Vec<Trial> = Vec::with_capacity(budget);
    for k in 0..budget {
        let mut config = space.sample(base, &mut rng);
        config.seed = rng.gen();
        let (_, report) = train(config.clone(), train_set, dev_set)?;
        let dev_f1 = report.best_f1();
        log::info!("trial {} dev micro-F1 {:.4}", k + 1, dev_f1);
        trials.push(Trial { config, dev_f1 });
    }
    let best = trials
        .iter()
        .fold(&trials[0], |b, t| if t.dev_f1 > b.dev_f1 { t } else { b })
        .clone();
    Ok(SearchResult { best, trials })
}
