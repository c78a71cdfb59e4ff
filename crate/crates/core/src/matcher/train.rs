use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{hinge_var, Model, Prepared, DEFAULT_BATCH, DEFAULT_DROPOUT, DEFAULT_MARGIN};
use crate::encoders::Dropout;
use crate::error::{Error, Result};
use crate::kb::TripleStore;
use crate::numcore::{derive_seed, AdamConfig, AdamState, Tape, Var};
use crate::pipeline::Example;
use crate::qgraph::{training_pairs, DEFAULT_N_NEG};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub margin: f64,
    pub dropout: f64,
    pub lr: f64,
    pub seed: u64,
    /// Hard negatives per positive.
    pub negatives: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch: DEFAULT_BATCH,
            margin: DEFAULT_MARGIN,
            dropout: DEFAULT_DROPOUT,
            lr: AdamConfig::default().lr,
            seed: 1,
            negatives: DEFAULT_N_NEG,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.margin.is_nan() || self.margin <= 0.0 {
            return Err(Error::invalid(format!("margin must be positive, got {}", self.margin)));
        }
        if self.batch == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    /// Mean hinge loss over the pairs of each epoch.
    pub epoch_loss: Vec<f64>,
    /// Questions without any positive candidate or without negatives.
    pub skipped: Vec<String>,
    pub pairs_per_epoch: usize,
}

/// `(question, positive, negative)`.
type Triple = (usize, usize, usize);

/// Mean hinge loss of `batch` on a fresh tape. Each question and each
/// candidate is encoded once per batch.
pub(crate) fn batch_loss(
    model: &Model,
    tape: &mut Tape<'_>,
    data: &[Prepared],
    batch: &[Triple],
    margin: f64,
    dropout: &mut Dropout<'_>,
) -> Result<Var> {
    let mut questions: HashMap<usize, Var> = HashMap::new();
    let mut scores: HashMap<(usize, usize), Var> = HashMap::new();
    let mut losses = Vec::with_capacity(batch.len());
    for &(qi, pos, neg) in batch {
        let q = match questions.get(&qi) {
            Some(&q) => q,
            None => {
                let q = model.encode_question(tape, &data[qi].question, dropout)?;
                questions.insert(qi, q);
                q
            }
        };
        let mut score_of = |tape: &mut Tape<'_>, gi: usize| -> Result<Var> {
            if let Some(&s) = scores.get(&(qi, gi)) {
                return Ok(s);
            }
            let g = &data[qi].graphs[gi];
            let p = model.encode_graph(tape, g)?;
            let s = model.score(tape, q, p, g.aux)?;
            scores.insert((qi, gi), s);
            Ok(s)
        };
        let sp = score_of(tape, pos)?;
        let sn = score_of(tape, neg)?;
        losses.push(hinge_var(tape, sp, sn, margin)?);
    }
    tape.mean(&losses)
}

/// Seeded mini-batch Adam on the hinge loss over all (positive, hard
/// negative) pairs, reshuffled every epoch.
pub fn train(mut model: Model, examples: &[Example], store: &TripleStore, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut data = Vec::new();
    let mut triples: Vec<Triple> = Vec::new();
    let mut skipped = Vec::new();
    for ex in examples {
        let pairs = training_pairs(&ex.candidates, cfg.negatives);
        if pairs.is_empty() {
            skipped.push(ex.question.id.clone());
            continue;
        }
        let qi = data.len();
        data.push(model.prepare(ex, store)?);
        triples.extend(pairs.into_iter().map(|(p, n)| (qi, p, n)));
    }
    if triples.is_empty() {
        return Err(Error::EmptyTraining(format!(
            "none of {} questions has both a positive and a negative candidate",
            examples.len()
        )));
    }
    for id in &skipped {
        log::warn!("question {id}: no (positive, negative) pair, skipped");
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "shuffle"));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "dropout"));
    let mut adam = AdamState::new(&model.params, AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        triples.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for (b, batch) in triples.chunks(cfg.batch).enumerate() {
            let grads = {
                let mut tape = Tape::new(&model.params);
                let mut dropout = if cfg.dropout > 0.0 {
                    Dropout::On { rate: cfg.dropout, rng: &mut dropout_rng }
                } else {
                    Dropout::Off
                };
                let loss = batch_loss(&model, &mut tape, &data, batch, cfg.margin, &mut dropout)?;
                let value = tape.value(loss).item();
                if !value.is_finite() {
                    return Err(Error::NonFinite {
                        what: "training loss".into(),
                        detail: format!("epoch {epoch}, batch {b}: {value}"),
                    });
                }
                total += value * batch.len() as f64;
                tape.backward(loss)?
            };
            adam.step(&mut model.params, &grads)?;
        }
        let mean = total / triples.len() as f64;
        log::info!("epoch {epoch}: mean loss {mean:.6}");
        epoch_loss.push(mean);
    }
    Ok(TrainOutcome { model, epoch_loss, skipped, pairs_per_epoch: triples.len() })
}
