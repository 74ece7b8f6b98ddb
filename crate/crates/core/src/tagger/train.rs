use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{decode_iob, tokenize, AnnotatedParagraph, EntitySpan};
use crate::error::{Error, Result};
use crate::ingest::Paragraph;
use crate::metrics::{match_spans, MatchMode, MatchReport};
use crate::tagger::model::{Example, TaggerConfig, TaggerModel, Vocabulary};

const CLIP_NORM: f64 = 5.0;
const PATIENCE: usize = 3;
const MIN_LEARNING_RATE: f64 = 1e-4;

/// Outcome of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    /// Dev micro-F1 after each epoch.
    pub dev_f1: Vec<f64>,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub final_learning_rate: f64,
}

impl TrainingReport {
    pub fn best_f1(&self) -> f64 {
        self.dev_f1.get(self.best_epoch).copied().unwrap_or(0.0)
    }
}

pub fn train(
    config: TaggerConfig,
    train_set: &[AnnotatedParagraph],
    dev_set: &[AnnotatedParagraph],
) -> Result<(TaggerModel, TrainingReport)> {
    train_with(config, train_set, dev_set, None)
}

/// Trains with SGD, halving the rate after three epochs without dev
/// improvement. An empty dev set falls back to scoring the train set.
/// `vectors` initializes embedding rows of matching tokens.
pub fn train_with(
    config: TaggerConfig,
    train_set: &[AnnotatedParagraph],
    dev_set: &[AnnotatedParagraph],
    vectors: Option<&[(String, Vec<f64>)]>,
) -> Result<(TaggerModel, TrainingReport)> {
    config.validate()?;
    let examples: Vec<Example<'_>> = train_set
        .iter()
        .filter(|p| !p.tokens.is_empty())
        .map(|p| Example {
            tokens: &p.tokens,
            tags: &p.tags,
        })
        .collect();
    if examples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let dev_set = if dev_set.is_empty() { train_set } else { dev_set };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab = Vocabulary::build(examples.iter().flat_map(|e| e.tokens.iter().map(|t| t.text.as_str())));
    let mut model = TaggerModel::new(config.clone(), vocab, &mut rng)?;
    if let Some(v) = vectors {
        let n = model.load_static_vectors(v)?;
        log::info!("initialized {n} embedding rows from external vectors");
    }

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut lr = config.learning_rate;
    let mut best: Option<(f64, usize, TaggerModel)> = None;
    let mut since_best = 0;
    let mut history = Vec::new();

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Example<'_>> = chunk.iter().map(|&i| examples[i]).collect();
            let (loss, mut grads) = model.nll_loss_and_grad(&batch, true, &mut rng).map_err(|e| match e {
                Error::NonFiniteLoss(i) => Error::NonFiniteLoss(chunk[i]),
                other => other,
            })?;
            epoch_loss += loss * batch.len() as f64;
            let norm = grads.norm();
            if norm > CLIP_NORM {
                grads.scale_by(CLIP_NORM / norm);
            }
            model.apply_gradients(&grads, lr);
        }
        let f1 = evaluate(&model, dev_set)?.micro_f1();
        history.push(f1);
        log::info!(
            "epoch {} loss {:.4} dev micro-F1 {:.4} lr {}",
            epoch + 1,
            epoch_loss / examples.len() as f64,
            f1,
            lr
        );
        if best.as_ref().is_none_or(|b| f1 > b.0) {
            best = Some((f1, epoch, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= PATIENCE {
                lr /= 2.0;
                since_best = 0;
                if lr < MIN_LEARNING_RATE {
                    break;
                }
            }
        }
    }
    let (_, best_epoch, best_model) = best.expect("at least one epoch");
    Ok((
        best_model,
        TrainingReport {
            dev_f1: history,
            best_epoch,
            final_learning_rate: lr,
        },
    ))
}

/// Entity-level exact-match report of constrained predictions against the
/// gold tags of `paragraphs`.
pub fn evaluate(model: &TaggerModel, paragraphs: &[AnnotatedParagraph]) -> Result<MatchReport> {
    let reports: Vec<Result<MatchReport>> = paragraphs
        .par_iter()
        .map(|p| {
            let predicted = model.predict(&p.tokens, true)?;
            let text = &p.paragraph.text;
            let gold = decode_iob(text, &p.tokens, &p.tags)?;
            let pred = decode_iob(text, &p.tokens, &predicted)?;
            match_spans(&gold, &pred, MatchMode::Exact)
        })
        .collect();
    let mut total = MatchReport::default();
    for r in reports {
        total.merge(&r?);
    }
    Ok(total)
}

/// Tags a paragraph with IOB-constrained decoding.
pub fn tag_paragraph(model: &TaggerModel, paragraph: &Paragraph) -> Result<Vec<EntitySpan>> {
    tag_paragraph_with(model, paragraph, true)
}

pub fn tag_paragraph_with(model: &TaggerModel, paragraph: &Paragraph, constrained: bool) -> Result<Vec<EntitySpan>> {
    let tokens = tokenize(&paragraph.text);
    if tokens.is_empty() {
        return Ok(Vec::new());
    }
    let tags = model.predict(&tokens, constrained)?;
    decode_iob(&paragraph.text, &tokens, &tags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_training_set() {
        assert!(matches!(
            train(TaggerConfig::default(), &[], &[]),
            Err(Error::EmptyTrainingSet)
        ));
    }
}
