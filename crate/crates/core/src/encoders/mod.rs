//! Question encoders: the base BiGRU, shortest-dependency-path (SDP),
//! tree-position (TPF) and Tree-GRU encoders, and their combination.

mod gru;
mod tree;

pub use gru::{bigru_encode, gru_run, BiGru, GruParams};
pub use tree::{tree_gru_pass, TreeDirection, TreeGru, TreeGruParams};

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;

use crate::deptree::DepTree;
use crate::error::{Error, Result};
use crate::numcore::{derive_seed, xavier_init, ParamId, Params, Tape, Tensor, Var};
use crate::qgraph::{FocusLinks, Span};

pub const UNK: &str = "<unk>";
pub const ENTITY_TOKEN: &str = "<E>";
pub const TIME_TOKEN: &str = "<Tm>";
/// Depths above this share the overflow row.
pub const DEFAULT_MAX_DEPTH: usize = 15;

/// String-to-row map with the unknown key at row 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    keys: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// `keys` after the leading [`UNK`]; duplicates are dropped.
    pub fn new(keys: impl IntoIterator<Item = String>) -> Self {
        let mut v = Vocab { keys: vec![UNK.to_string()], index: HashMap::new() };
        v.index.insert(UNK.to_string(), 0);
        for k in keys {
            if !v.index.contains_key(&k) {
                v.index.insert(k.clone(), v.keys.len());
                v.keys.push(k);
            }
        }
        v
    }

    /// Rebuilds from a full key list that starts with [`UNK`].
    pub fn from_keys(keys: Vec<String>) -> Result<Self> {
        if keys.first().map(String::as_str) != Some(UNK) {
            return Err(Error::invalid("vocabulary must start with <unk>"));
        }
        let v = Vocab::new(keys.into_iter().skip(1));
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn get(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Exact key, then lowercased, else the unknown row.
    pub fn lookup(&self, key: &str) -> usize {
        self.get(key).or_else(|| self.get(&key.to_lowercase())).unwrap_or(0)
    }
}

/// Trainable word table `E_w` with its vocabulary.
#[derive(Clone, Debug)]
pub struct WordEmbeddings {
    pub vocab: Vocab,
    pub table: ParamId,
    pub dim: usize,
}

impl WordEmbeddings {
    /// Rows come from `pretrained` where available; `<unk>`, `<E>`, `<Tm>`
    /// and words without a pretrained vector get Xavier rows.
    pub fn register(
        params: &mut Params,
        name: &str,
        words: impl IntoIterator<Item = String>,
        pretrained: &crate::vectors::WordVectors,
        dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if pretrained.dim() != dim {
            return Err(Error::invalid(format!(
                "word vectors have dimension {}, model expects {dim}",
                pretrained.dim()
            )));
        }
        let specials = [ENTITY_TOKEN.to_string(), TIME_TOKEN.to_string()];
        let vocab = Vocab::new(specials.into_iter().chain(words.into_iter().map(|w| w.to_lowercase())));
        let mut table = xavier_init(&[vocab.len(), dim], derive_seed(seed, name))?;
        for (i, k) in vocab.keys().iter().enumerate() {
            if let Some(v) = pretrained.get(k) {
                table.row_mut(i).copy_from_slice(v);
            }
        }
        let table = params.insert(name, table)?;
        Ok(Self { vocab, table, dim })
    }

    pub fn lookup(&self, word: &str) -> usize {
        self.vocab.lookup(word)
    }
}

/// Depth embeddings: rows `0..=max_depth` plus one overflow row.
#[derive(Clone, Debug)]
pub struct PositionEmbeddings {
    pub table: ParamId,
    pub max_depth: usize,
    pub dim: usize,
}

impl PositionEmbeddings {
    pub fn register(params: &mut Params, name: &str, max_depth: usize, dim: usize, seed: u64) -> Result<Self> {
        let table = params.insert(name, xavier_init(&[max_depth + 2, dim], derive_seed(seed, name))?)?;
        Ok(Self { table, max_depth, dim })
    }

    pub fn row_for(&self, depth: usize) -> usize {
        depth.min(self.max_depth + 1)
    }
}

/// Dropout switch threaded through the encoders.
pub enum Dropout<'a> {
    Off,
    On { rate: f64, rng: &'a mut ChaCha8Rng },
}

impl Dropout<'_> {
    pub fn apply(&mut self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        match self {
            Dropout::Off => Ok(x),
            Dropout::On { rate, rng } => tape.dropout(x, *rate, *rng, true),
        }
    }
}

/// Entity spans (kept whole) and time spans, longest first on overlap.
fn anonymized_spans(links: &FocusLinks) -> Vec<(Span, &'static str)> {
    let mut spans: Vec<(Span, &'static str)> = links
        .entities
        .iter()
        .map(|l| (l.span, ENTITY_TOKEN))
        .chain(links.times.iter().map(|l| (l.span, TIME_TOKEN)))
        .collect();
    spans.sort_by_key(|(s, _)| (std::cmp::Reverse(s.len()), s.start));
    let mut kept: Vec<(Span, &'static str)> = Vec::new();
    for (s, tag) in spans {
        if kept.iter().all(|(k, _)| !k.overlaps(&s)) {
            kept.push((s, tag));
        }
    }
    kept.sort_by_key(|(s, _)| s.start);
    kept
}

/// Replaces each entity span by one `<E>` and each time span by one `<Tm>`.
pub fn anonymize(tokens: &[String], links: &FocusLinks) -> Vec<String> {
    let spans = anonymized_spans(links);
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        match spans.iter().find(|(s, _)| s.start == i) {
            Some((s, tag)) => {
                out.push(tag.to_string());
                i = s.end;
            }
            None => {
                out.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    out
}

/// Length-preserving variant: every token of an anonymized span becomes
/// the span's placeholder, so positions still align with the parse.
pub fn mask_tokens(tokens: &[String], links: &FocusLinks) -> Vec<String> {
    let spans = anonymized_spans(links);
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| match spans.iter().find(|(s, _)| s.contains(i)) {
            Some((_, tag)) => tag.to_string(),
            None => t.clone(),
        })
        .collect()
}

/// Focus token of each entity, time and ordinal link: the span token
/// closest to the root, leftmost on ties. Sorted and deduplicated.
pub fn focus_tokens(tree: &DepTree, links: &FocusLinks) -> Vec<usize> {
    let spans = links
        .entities
        .iter()
        .map(|l| l.span)
        .chain(links.times.iter().map(|l| l.span))
        .chain(links.ordinals.iter().map(|l| l.span));
    let depths = tree.depths();
    let mut out: Vec<usize> = spans
        .filter(|s| s.end <= tree.len())
        // spans are 0-based, tree indices 1-based
        .map(|s| (s.start + 1..=s.end).min_by_key(|&i| (depths[i - 1], i)).expect("nonempty span"))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// One SDP rendered as alternating word and label tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PathToken {
    Word(String),
    Label(String),
}

/// Token sequences of `sdp(answer, focus)` for each focus token, with
/// words taken from `forms` (already masked if desired).
pub fn sdp_sequences(tree: &DepTree, forms: &[String], focus: &[usize]) -> Result<Vec<Vec<PathToken>>> {
    if forms.len() != tree.len() {
        return Err(Error::invalid(format!("{} forms for a {}-token tree", forms.len(), tree.len())));
    }
    let answer = tree.answer_word();
    focus
        .iter()
        .map(|&f| {
            let path = tree.sdp(answer, f)?;
            let mut seq = Vec::with_capacity(path.nodes.len() * 2);
            for (k, &n) in path.nodes.iter().enumerate() {
                seq.push(PathToken::Word(forms[n - 1].clone()));
                if let Some((label, _)) = path.labels.get(k) {
                    seq.push(PathToken::Label(label.clone()));
                }
            }
            Ok(seq)
        })
        .collect()
}

/// x1: coordinatewise max of the BiGRU encodings of the given paths, each
/// path a sequence of already-embedded inputs. No path gives zeros.
pub fn encode_sdp(tape: &mut Tape<'_>, paths: &[Vec<Var>], bigru: &BiGru) -> Result<Var> {
    if paths.is_empty() {
        return Ok(tape.constant(Tensor::zeros(&[2 * bigru.hidden()])?));
    }
    let encoded = paths.iter().map(|p| bigru_encode(tape, bigru, p)).collect::<Result<Vec<_>>>()?;
    tape.maxpool(&encoded)
}

/// x2: BiGRU over `[w_i ; d_i]`.
pub fn encode_tpf(tape: &mut Tape<'_>, words: &[Var], depths: &[Var], bigru: &BiGru) -> Result<Var> {
    if words.len() != depths.len() {
        return Err(Error::invalid(format!("{} words but {} depth vectors", words.len(), depths.len())));
    }
    let inputs = words.iter().zip(depths).map(|(w, d)| tape.concat(&[*w, *d])).collect::<Result<Vec<_>>>()?;
    bigru_encode(tape, bigru, &inputs)
}

/// x3: BiGRU over `[w_i ; h↑_i ; h↓_i]`. `edges[i]` is token `i+1`'s edge
/// input (the root's is the ROOT vector).
pub fn encode_treegru(
    tape: &mut Tape<'_>,
    tree: &DepTree,
    words: &[Var],
    edges: &[Var],
    tree_gru: &TreeGru,
    bigru: &BiGru,
) -> Result<Var> {
    if words.len() != tree.len() {
        return Err(Error::invalid(format!("{} words for a {}-token tree", words.len(), tree.len())));
    }
    let up = tree_gru_pass(tape, tree, edges, &tree_gru.up, TreeDirection::BottomUp)?;
    let down = tree_gru_pass(tape, tree, edges, &tree_gru.down, TreeDirection::TopDown)?;
    let inputs = (0..tree.len()).map(|i| tape.concat(&[words[i], up[i], down[i]])).collect::<Result<Vec<_>>>()?;
    bigru_encode(tape, bigru, &inputs)
}

/// Elementwise sum of `q` and the enabled syntax vectors.
pub fn combine(tape: &mut Tape<'_>, q: Var, syntax: &[Var]) -> Result<Var> {
    let mut all = vec![q];
    all.extend_from_slice(syntax);
    tape.sum(&all)
}
