use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EdgeEmbeddings, EdgeVocab};
use crate::error::{Error, Result};
use crate::numcore::{dot, sigmoid, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self { dim: 300, epochs: 5, negatives: 5, lr: 0.025, seed: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedEdges {
    pub embeddings: EdgeEmbeddings,
    /// Output (context) table.
    pub context: Tensor,
    /// Mean per-pair loss of each epoch.
    pub epoch_loss: Vec<f64>,
}

/// Negative-sampling noise distribution `count^0.75`, sampled by inverse CDF.
struct NoiseTable {
    cdf: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[u64]) -> Option<Self> {
        let mut acc = 0.0;
        let cdf: Vec<f64> = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        (acc > 0.0).then_some(Self { cdf })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().unwrap();
        let x = rng.gen::<f64>() * total;
        self.cdf.partition_point(|&c| c <= x).min(self.cdf.len() - 1)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// SGD on `log σ(u_c·v_e) + Σ_k log σ(-u_k·v_e)`.
///
/// Input vectors start uniform in `±0.5/dim`, context vectors at zero. The
/// pair order is reshuffled every epoch from a seeded generator, so a fixed
/// seed reproduces the result bit for bit.
pub fn train_skipgram(pairs: &[(usize, usize)], vocab: &EdgeVocab, cfg: &SkipGramConfig) -> Result<TrainedEdges> {
    if cfg.dim == 0 || cfg.negatives == 0 {
        return Err(Error::invalid("skip-gram needs dim > 0 and at least one negative"));
    }
    let v = vocab.len();
    if let Some(&(c, x)) = pairs.iter().find(|(c, x)| *c >= v || *x >= v) {
        return Err(Error::invalid(format!("pair ({c}, {x}) outside vocabulary of {v}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 0.5 / cfg.dim as f64;
    let input: Vec<f64> = (0..v * cfg.dim).map(|_| rng.gen_range(-bound..bound)).collect();
    let mut input = Tensor::matrix(v, cfg.dim, input)?;
    let mut output = Tensor::zeros(&[v, cfg.dim])?;

    let mut context_counts = vec![0u64; v];
    for &(_, c) in pairs {
        context_counts[c] += 1;
    }
    let noise = NoiseTable::new(&context_counts);

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut grad_in = vec![0.0; cfg.dim];
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (step, &pi) in order.iter().enumerate() {
            let (center, ctx) = pairs[pi];
            grad_in.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            let mut targets = Vec::with_capacity(cfg.negatives + 1);
            targets.push((ctx, 1.0));
            if let Some(noise) = &noise {
                for _ in 0..cfg.negatives {
                    let n = noise.sample(&mut rng);
                    if n != ctx {
                        targets.push((n, 0.0));
                    }
                }
            }
            for (target, label) in targets {
                let score = dot(input.row(center), output.row(target));
                loss -= if label > 0.0 { log_sigmoid(score) } else { log_sigmoid(-score) };
                // d(-loss)/d(score) scaled by the learning rate
                let g = cfg.lr * (label - sigmoid(score));
                let (vin, vout) = (input.row(center), output.row_mut(target));
                for k in 0..cfg.dim {
                    grad_in[k] += g * vout[k];
                    vout[k] += g * vin[k];
                }
            }
            for (w, g) in input.row_mut(center).iter_mut().zip(&grad_in) {
                *w += g;
            }
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    what: "skip-gram loss".into(),
                    detail: format!("epoch {epoch}, step {step}"),
                });
            }
            total += loss;
        }
        epoch_loss.push(if pairs.is_empty() { 0.0 } else { total / pairs.len() as f64 });
    }
    Ok(TrainedEdges {
        embeddings: EdgeEmbeddings { vocab: vocab.clone(), vectors: input },
        context: output,
        epoch_loss,
    })
}
