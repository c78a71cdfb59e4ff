//! Skip-gram pretraining of dependency-edge embeddings.
//!
//! An edge `a -e-> b` predicts its neighboring edges: the incoming edge of
//! `a` and every outgoing edge of `b`. Edges are keyed lexically as
//! `head|deprel|tail` (lowercased) with the bare deprel as backoff.

mod skipgram;

pub use skipgram::{train_skipgram, SkipGramConfig, TrainedEdges};

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::deptree::{DepTree, DirectedEdge};
use crate::error::{Error, Result};
use crate::numcore::Tensor;
use crate::vectors::{read_vectors, write_vectors};

pub const UNK_EDGE: &str = "<unk>";

pub fn lexical_key(edge: &DirectedEdge) -> String {
    format!("{}|{}|{}", edge.head_form.to_lowercase(), edge.deprel, edge.tail_form.to_lowercase())
}

/// Edge-key vocabulary. Id 0 is UNK, then backoff deprel keys, then
/// lexicalized keys, each tier sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeVocab {
    keys: Vec<String>,
    ids: HashMap<String, usize>,
    counts: Vec<u64>,
}

impl EdgeVocab {
    pub fn from_keys(keys: Vec<String>) -> Result<Self> {
        let mut ids = HashMap::with_capacity(keys.len());
        for (i, k) in keys.iter().enumerate() {
            if ids.insert(k.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate edge key {k}")));
            }
        }
        if !ids.contains_key(UNK_EDGE) {
            return Err(Error::invalid("edge vocabulary lacks <unk>"));
        }
        let counts = vec![0; keys.len()];
        Ok(Self { keys, ids, counts })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn key(&self, id: usize) -> &str {
        &self.keys[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn get(&self, key: &str) -> Option<usize> {
        self.ids.get(key).copied()
    }

    pub fn unk(&self) -> usize {
        self.ids[UNK_EDGE]
    }

    /// Number of lexicalized (`head|deprel|tail`) keys.
    pub fn lexicalized_len(&self) -> usize {
        self.keys.iter().filter(|k| k.contains('|')).count()
    }

    /// Lexicalized hit, else the deprel backoff, else UNK.
    pub fn lookup(&self, edge: &DirectedEdge) -> usize {
        self.get(&lexical_key(edge)).or_else(|| self.get(&edge.deprel)).unwrap_or_else(|| self.unk())
    }
}

pub fn build_edge_vocab(corpus: &[DepTree], min_count: u64) -> Result<EdgeVocab> {
    if corpus.is_empty() {
        return Err(Error::invalid("edge vocabulary needs a nonempty corpus"));
    }
    let mut lex: BTreeMap<String, u64> = BTreeMap::new();
    let mut rels: BTreeMap<String, u64> = BTreeMap::new();
    for tree in corpus {
        for tail in tree.edge_tails() {
            let e = tree.edge(tail).expect("non-root");
            *lex.entry(lexical_key(&e)).or_default() += 1;
            *rels.entry(e.deprel).or_default() += 1;
        }
    }
    let mut keys = vec![UNK_EDGE.to_string()];
    let mut counts = vec![0];
    for (k, c) in rels {
        keys.push(k);
        counts.push(c);
    }
    for (k, c) in lex {
        if c >= min_count {
            keys.push(k);
            counts.push(c);
        }
    }
    let mut vocab = EdgeVocab::from_keys(keys)?;
    vocab.counts = counts;
    Ok(vocab)
}

/// `(center, context)` id pairs: every edge against each of its neighbors.
pub fn training_pairs<'a>(corpus: &'a [DepTree], vocab: &'a EdgeVocab) -> impl Iterator<Item = (usize, usize)> + 'a {
    corpus.iter().flat_map(move |tree| {
        tree.edge_tails().flat_map(move |tail| {
            let center = vocab.lookup(&tree.edge(tail).expect("non-root"));
            tree.neighbor_tails(tail)
                .expect("non-root")
                .into_iter()
                .map(move |n| (center, vocab.lookup(&tree.edge(n).expect("non-root"))))
        })
    })
}

/// Pretrained edge table `E_e`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeEmbeddings {
    pub vocab: EdgeVocab,
    pub vectors: Tensor,
}

impl EdgeEmbeddings {
    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn vector(&self, edge: &DirectedEdge) -> &[f64] {
        self.vectors.row(self.vocab.lookup(edge))
    }

    pub fn to_text(&self) -> String {
        write_vectors(self.vocab.keys(), &self.vectors)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (keys, vectors) = read_vectors(text)?;
        Ok(Self { vocab: EdgeVocab::from_keys(keys)?, vectors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests;
