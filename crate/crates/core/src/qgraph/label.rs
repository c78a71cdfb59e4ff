use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::QueryGraph;
use crate::error::{Error, Result};
use crate::kb::TripleStore;

pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_N_NEG: usize = 20;

/// F1 of a predicted set against a nonempty gold set.
pub fn f1_score<T: Ord>(predicted: &BTreeSet<T>, gold: &BTreeSet<T>) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::invalid("gold answer set is empty"));
    }
    if predicted.is_empty() {
        return Ok(0.0);
    }
    let hit = predicted.intersection(gold).count() as f64;
    if hit == 0.0 {
        return Ok(0.0);
    }
    let p = hit / predicted.len() as f64;
    let r = hit / gold.len() as f64;
    Ok(2.0 * p * r / (p + r))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledCandidate {
    pub graph: QueryGraph,
    pub f1: f64,
    pub positive: bool,
    /// Executed answers, rendered.
    pub answers: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Labeling {
    pub candidates: Vec<LabeledCandidate>,
    /// Candidates whose execution failed.
    pub dropped: usize,
}

/// Executes and scores every candidate against rendered gold answers;
/// positive iff `f1 > tau`.
pub fn label_candidates(
    candidates: Vec<QueryGraph>,
    store: &TripleStore,
    gold: &BTreeSet<String>,
    tau: f64,
) -> Result<Labeling> {
    if gold.is_empty() {
        return Err(Error::invalid("gold answer set is empty"));
    }
    let mut out = Labeling::default();
    for graph in candidates {
        let answers = match store.execute(&graph) {
            Ok(a) => a,
            Err(e) => {
                log::warn!("dropping candidate: {e}");
                out.dropped += 1;
                continue;
            }
        };
        let rendered: BTreeSet<String> = answers.iter().map(|v| store.render(v)).collect();
        let f1 = f1_score(&rendered, gold)?;
        out.candidates.push(LabeledCandidate {
            graph,
            f1,
            positive: f1 > tau,
            answers: rendered.into_iter().collect(),
        });
    }
    Ok(out)
}

/// (positive, negative) index pairs: every positive against the `n_neg`
/// hardest negatives, i.e. highest f1 first, generation order on ties.
pub fn training_pairs(candidates: &[LabeledCandidate], n_neg: usize) -> Vec<(usize, usize)> {
    let mut negatives: Vec<usize> = (0..candidates.len()).filter(|&i| !candidates[i].positive).collect();
    negatives.sort_by(|&a, &b| candidates[b].f1.total_cmp(&candidates[a].f1).then(a.cmp(&b)));
    negatives.truncate(n_neg);
    let mut pairs = Vec::new();
    for p in (0..candidates.len()).filter(|&i| candidates[i].positive) {
        pairs.extend(negatives.iter().map(|&n| (p, n)));
    }
    pairs
}
