//! Graph-side encoding, scoring, and the trainable model tying the
//! question encoders to sub-path encodings.

mod checkpoint;
mod eval;
mod train;

pub use checkpoint::{load_checkpoint, manifest_path, save_checkpoint, Manifest};
pub use eval::{evaluate, length_bucket, select, wh_bucket, EvalReport, GroupStat, QuestionResult, LENGTH_BUCKETS};
pub use train::{train, TrainConfig, TrainOutcome};

use std::fmt;
use std::str::FromStr;

use crate::deptree::DepTree;
use crate::edgevec::{EdgeEmbeddings, EdgeVocab};
use crate::encoders::{
    anonymize, bigru_encode, combine, encode_sdp, encode_tpf, encode_treegru, focus_tokens, mask_tokens, sdp_sequences,
    BiGru, Dropout, PathToken, PositionEmbeddings, TreeGru, Vocab, ENTITY_TOKEN, TIME_TOKEN,
};
use crate::error::{Error, Result};
use crate::kb::TripleStore;
use crate::numcore::{derive_seed, xavier_init, ParamId, Params, Tape, Tensor, Var};
use crate::pipeline::{Example, Linker};
use crate::qgraph::{generate_candidates, FocusLinks, LabeledCandidate, QueryGraph};
use crate::vectors::WordVectors;

pub const DEFAULT_MARGIN: f64 = 0.5;
pub const DEFAULT_BATCH: usize = 32;
pub const DEFAULT_DROPOUT: f64 = 0.1;

pub const FEATURE_NAMES: [&str; 5] = ["semantic", "entity_link", "constraints", "path_len", "answer_size"];
/// Initial score weights: the semantic score alone.
pub const INITIAL_WEIGHTS: [f64; 5] = [1.0, 0.0, 0.0, 0.0, 0.0];

/// `max(0, margin - pos + neg)`.
pub fn hinge_loss(pos: f64, neg: f64, margin: f64) -> f64 {
    (margin - pos + neg).max(0.0)
}

pub fn hinge_var(tape: &mut Tape<'_>, pos: Var, neg: Var, margin: f64) -> Result<Var> {
    // same evaluation order as `hinge_loss`
    let m = tape.constant(Tensor::scalar(margin));
    let gap = tape.sub(m, pos)?;
    let shifted = tape.add(gap, neg)?;
    Ok(tape.relu(shifted))
}

/// Words of a relation string: split on anything that is not a letter or
/// digit, lowercased. `birth_date..cmp_eq` gives `birth date cmp eq`.
pub fn subpath_words(relation: &str) -> Vec<String> {
    relation.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

/// Graph features besides the semantic score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphFeatures {
    pub link_score: f64,
    pub constraints: usize,
    pub path_len: usize,
    pub answers: usize,
}

impl GraphFeatures {
    pub fn of(graph: &QueryGraph, links: &FocusLinks, answers: usize) -> Result<Self> {
        let link = links
            .entities
            .get(graph.entity_link)
            .ok_or_else(|| Error::invalid(format!("graph refers to missing entity link {}", graph.entity_link)))?;
        Ok(Self { link_score: link.score, constraints: graph.constraints.len(), path_len: graph.path.len(), answers })
    }

    /// `[link score, constraints/4, path length - 1, log10(1 + answers)]`.
    pub fn values(&self) -> [f64; 4] {
        [
            self.link_score,
            self.constraints as f64 / 4.0,
            self.path_len as f64 - 1.0,
            (1.0 + self.answers as f64).log10(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreBreakdown {
    pub features: [f64; 5],
    pub weights: [f64; 5],
    pub total: f64,
}

impl ScoreBreakdown {
    pub fn semantic(&self) -> f64 {
        self.features[0]
    }
}

/// `S = w · [S_rm, aux...]`; any non-finite feature is rejected by name.
pub fn total_score(semantic: f64, aux: [f64; 4], weights: [f64; 5]) -> Result<ScoreBreakdown> {
    let features = [semantic, aux[0], aux[1], aux[2], aux[3]];
    for (name, v) in FEATURE_NAMES.iter().zip(features) {
        if !v.is_finite() {
            return Err(Error::NonFinite { what: format!("feature {name}"), detail: v.to_string() });
        }
    }
    let total = features.iter().zip(weights).map(|(f, w)| f * w).sum();
    Ok(ScoreBreakdown { features, weights, total })
}

/// Which syntax encoders are added to the base question encoding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct SyntaxFlags {
    pub sdp: bool,
    pub tpf: bool,
    pub treegru: bool,
}

impl SyntaxFlags {
    pub const NONE: SyntaxFlags = SyntaxFlags { sdp: false, tpf: false, treegru: false };
}

impl FromStr for SyntaxFlags {
    type Err = Error;

    /// Comma-separated subset of `sdp,tpf,treegru`; empty or `none` is QUE.
    fn from_str(s: &str) -> Result<Self> {
        let mut f = SyntaxFlags::NONE;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "none" | "que" => {}
                "sdp" => f.sdp = true,
                "tpf" => f.tpf = true,
                "treegru" | "tree-gru" | "tree_gru" => f.treegru = true,
                other => return Err(Error::invalid(format!("unknown syntax flag {other:?}"))),
            }
        }
        Ok(f)
    }
}

impl fmt::Display for SyntaxFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let on: Vec<&str> = [(self.sdp, "sdp"), (self.tpf, "tpf"), (self.treegru, "treegru")]
            .iter()
            .filter(|(b, _)| *b)
            .map(|(_, n)| *n)
            .collect();
        if on.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&on.join(","))
        }
    }
}

/// Layer sizes. `word_dim` must equal `2 * hidden` so question and graph
/// vectors live in the same space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub hidden: usize,
    pub tree_hidden: usize,
    pub pos_dim: usize,
    pub max_depth: usize,
    pub flags: SyntaxFlags,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { word_dim: 300, hidden: 150, tree_hidden: 100, pos_dim: 50, max_depth: 15, flags: SyntaxFlags::NONE }
    }
}

impl ModelConfig {
    /// Small sizes for the toy fixture.
    pub fn toy(flags: SyntaxFlags) -> Self {
        Self { word_dim: 32, hidden: 16, tree_hidden: 8, pos_dim: 8, max_depth: 15, flags }
    }

    pub fn validate(&self) -> Result<()> {
        if self.word_dim != 2 * self.hidden {
            return Err(Error::invalid(format!(
                "word dimension {} must be twice the hidden size {}",
                self.word_dim, self.hidden
            )));
        }
        if self.hidden == 0 || self.tree_hidden == 0 || self.pos_dim == 0 {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        Ok(())
    }
}

/// Key lists behind every embedding table, saved with checkpoints.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModelVocabs {
    /// Word keys after `<unk>`.
    pub words: Vec<String>,
    /// Relation strings after `<unk>`.
    pub relations: Vec<String>,
    /// Dependency labels after `<unk>`.
    pub labels: Vec<String>,
    /// Full edge vocabulary (including its `<unk>`); empty without Tree-GRU.
    pub edges: Vec<String>,
    pub edge_dim: usize,
}

impl ModelVocabs {
    /// Words from the pretrained table, the training questions and the
    /// relation strings; relations from the training candidates; labels
    /// from the training parses; edges from the pretrained edge table.
    pub fn collect(
        examples: &[Example],
        store: &TripleStore,
        words: &WordVectors,
        edges: Option<&EdgeEmbeddings>,
    ) -> Self {
        let mut w: Vec<String> = words.keys().iter().map(|k| k.to_lowercase()).collect();
        let mut rel = Vec::new();
        let mut labels = Vec::new();
        for ex in examples {
            let tokens = ex.tokens();
            w.extend(anonymize(&tokens, &ex.links).iter().map(|t| t.to_lowercase()));
            w.extend(mask_tokens(&tokens, &ex.links).iter().map(|t| t.to_lowercase()));
            labels.extend(ex.tree.tokens().iter().map(|t| t.deprel.clone()));
            for c in &ex.candidates {
                for sp in c.graph.subpaths(store) {
                    w.extend(subpath_words(&sp));
                    rel.push(sp);
                }
            }
        }
        let tidy = |mut v: Vec<String>| {
            v.retain(|k| k != crate::encoders::UNK && k != ENTITY_TOKEN && k != TIME_TOKEN);
            v.sort();
            v.dedup();
            v
        };
        Self {
            words: tidy(w),
            relations: tidy(rel),
            labels: tidy(labels),
            edges: edges.map(|e| e.vocab.keys().to_vec()).unwrap_or_default(),
            edge_dim: edges.map_or(0, EdgeEmbeddings::dim),
        }
    }
}

#[derive(Clone, Debug)]
struct SdpEncoder {
    labels: Vocab,
    table: ParamId,
    bigru: BiGru,
}

#[derive(Clone, Debug)]
struct TpfEncoder {
    positions: PositionEmbeddings,
    bigru: BiGru,
}

#[derive(Clone, Debug)]
struct TreeEncoder {
    edges: EdgeVocab,
    table: ParamId,
    tree_gru: TreeGru,
    bigru: BiGru,
}

/// Parameters plus the vocabularies that index them.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub vocabs: ModelVocabs,
    pub params: Params,
    words: Vocab,
    word_table: ParamId,
    relations: Vocab,
    relation_table: ParamId,
    que: BiGru,
    sdp: Option<SdpEncoder>,
    tpf: Option<TpfEncoder>,
    tree: Option<TreeEncoder>,
    score_w: ParamId,
}

/// Row-index form of a question, independent of parameter values.
#[derive(Clone, Debug, PartialEq)]
pub struct QuestionInput {
    /// Anonymized tokens for the base encoder.
    pub que: Vec<usize>,
    /// Masked tokens aligned with the parse.
    pub tree_words: Vec<usize>,
    pub depth_rows: Vec<usize>,
    pub sdp: Vec<Vec<SdpRow>>,
    /// Edge row per token; `None` for the root.
    pub edge_rows: Vec<Option<usize>>,
    pub tree: DepTree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpRow {
    Word(usize),
    Label(usize),
}

/// Row-index form of a candidate graph.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphInput {
    /// `(E_sp row, E_w rows)` per sub-path.
    pub subpaths: Vec<(usize, Vec<usize>)>,
    pub aux: [f64; 4],
}

/// A question with all candidates in row form.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub id: String,
    pub question: QuestionInput,
    pub graphs: Vec<GraphInput>,
    pub f1: Vec<f64>,
    pub positive: Vec<bool>,
}

impl Model {
    /// Fresh Xavier-initialized model; only the enabled encoders get
    /// parameters. The score weights start at [`INITIAL_WEIGHTS`].
    pub fn new(config: ModelConfig, vocabs: ModelVocabs, seed: u64) -> Result<Self> {
        config.validate()?;
        let flags = config.flags;
        let d = config.word_dim;
        let h = config.hidden;
        let mut params = Params::new();
        let table = |params: &mut Params, name: &str, rows: usize, cols: usize| -> Result<ParamId> {
            params.insert(name, xavier_init(&[rows, cols], derive_seed(seed, name))?)
        };
        let specials = [ENTITY_TOKEN.to_string(), TIME_TOKEN.to_string()];
        let words = Vocab::new(specials.into_iter().chain(vocabs.words.iter().cloned()));
        let word_table = table(&mut params, "E_w", words.len(), d)?;
        let relations = Vocab::new(vocabs.relations.iter().cloned());
        let relation_table = table(&mut params, "E_sp", relations.len(), d)?;
        let que = BiGru::register(&mut params, "que", d, h, seed)?;
        let sdp = if flags.sdp {
            let labels = Vocab::new(vocabs.labels.iter().cloned());
            let t = table(&mut params, "E_label", labels.len(), d)?;
            let bigru = BiGru::register(&mut params, "sdp", d, h, seed)?;
            Some(SdpEncoder { labels, table: t, bigru })
        } else {
            None
        };
        let tpf = if flags.tpf {
            let positions = PositionEmbeddings::register(&mut params, "E_pos", config.max_depth, config.pos_dim, seed)?;
            let bigru = BiGru::register(&mut params, "tpf", d + config.pos_dim, h, seed)?;
            Some(TpfEncoder { positions, bigru })
        } else {
            None
        };
        let tree = if flags.treegru {
            if vocabs.edges.is_empty() || vocabs.edge_dim == 0 {
                return Err(Error::invalid("Tree-GRU needs edge embeddings"));
            }
            let edges = EdgeVocab::from_keys(vocabs.edges.clone())?;
            let t = table(&mut params, "E_e", edges.len(), vocabs.edge_dim)?;
            let tree_gru = TreeGru::register(&mut params, "tree", vocabs.edge_dim, config.tree_hidden, seed)?;
            let bigru = BiGru::register(&mut params, "treegru", d + 2 * config.tree_hidden, h, seed)?;
            Some(TreeEncoder { edges, table: t, tree_gru, bigru })
        } else {
            None
        };
        let score_w = params.insert("score_w", Tensor::vector(INITIAL_WEIGHTS.to_vec()))?;
        Ok(Self { config, vocabs, params, words, word_table, relations, relation_table, que, sdp, tpf, tree, score_w })
    }

    /// Copies pretrained rows into `E_w`; returns how many rows were found.
    pub fn load_word_vectors(&mut self, vectors: &WordVectors) -> Result<usize> {
        if vectors.dim() != self.config.word_dim {
            return Err(Error::invalid(format!(
                "word vectors have dimension {}, model expects {}",
                vectors.dim(),
                self.config.word_dim
            )));
        }
        let table = self.params.get_mut(self.word_table);
        let mut hits = 0;
        for (i, k) in self.words.keys().iter().enumerate() {
            if let Some(v) = vectors.get(k) {
                table.row_mut(i).copy_from_slice(v);
                hits += 1;
            }
        }
        Ok(hits)
    }

    /// Copies the pretrained edge table into `E_e`.
    pub fn load_edge_vectors(&mut self, edges: &EdgeEmbeddings) -> Result<()> {
        let Some(enc) = &self.tree else {
            return Ok(());
        };
        if edges.vocab.keys() != enc.edges.keys() || edges.dim() != self.vocabs.edge_dim {
            return Err(Error::invalid("edge embeddings do not match the model's edge vocabulary"));
        }
        self.params.get_mut(enc.table).data_mut().copy_from_slice(edges.vectors.data());
        Ok(())
    }

    pub fn flags(&self) -> SyntaxFlags {
        self.config.flags
    }

    pub fn score_weights(&self) -> [f64; 5] {
        let w = self.params.get(self.score_w).data();
        [w[0], w[1], w[2], w[3], w[4]]
    }

    pub fn word_row(&self, word: &str) -> usize {
        self.words.lookup(&word.to_lowercase())
    }

    pub fn relation_row(&self, relation: &str) -> usize {
        self.relations.lookup(relation)
    }

    pub fn prepare_question(&self, tree: &DepTree, links: &FocusLinks) -> Result<QuestionInput> {
        let tokens = crate::pipeline::tree_tokens(tree);
        let que = anonymize(&tokens, links).iter().map(|t| self.word_row(t)).collect();
        let masked = mask_tokens(&tokens, links);
        let tree_words = masked.iter().map(|t| self.word_row(t)).collect();
        let depth_rows = match &self.tpf {
            Some(t) => tree.depths().into_iter().map(|d| t.positions.row_for(d)).collect(),
            None => Vec::new(),
        };
        let sdp = match &self.sdp {
            Some(s) => sdp_sequences(tree, &masked, &focus_tokens(tree, links))?
                .into_iter()
                .map(|path| {
                    path.into_iter()
                        .map(|tok| match tok {
                            PathToken::Word(w) => SdpRow::Word(self.word_row(&w)),
                            PathToken::Label(l) => SdpRow::Label(s.labels.lookup(&l)),
                        })
                        .collect()
                })
                .collect(),
            None => Vec::new(),
        };
        let edge_rows = match &self.tree {
            Some(t) => (1..=tree.len()).map(|i| tree.edge(i).map(|e| t.edges.lookup(&e))).collect(),
            None => Vec::new(),
        };
        Ok(QuestionInput { que, tree_words, depth_rows, sdp, edge_rows, tree: tree.clone() })
    }

    pub fn prepare_graph(&self, subpaths: &[String], aux: [f64; 4]) -> GraphInput {
        let subpaths = subpaths
            .iter()
            .map(|sp| {
                let mut words: Vec<usize> = subpath_words(sp).iter().map(|w| self.word_row(w)).collect();
                if words.is_empty() {
                    words.push(0);
                }
                (self.relation_row(sp), words)
            })
            .collect();
        GraphInput { subpaths, aux }
    }

    pub fn prepare_candidate(
        &self,
        c: &LabeledCandidate,
        links: &FocusLinks,
        store: &TripleStore,
    ) -> Result<GraphInput> {
        let features = GraphFeatures::of(&c.graph, links, c.answers.len())?;
        Ok(self.prepare_graph(&c.graph.subpaths(store), features.values()))
    }

    pub fn prepare(&self, example: &Example, store: &TripleStore) -> Result<Prepared> {
        Ok(Prepared {
            id: example.question.id.clone(),
            question: self.prepare_question(&example.tree, &example.links)?,
            graphs: example
                .candidates
                .iter()
                .map(|c| self.prepare_candidate(c, &example.links, store))
                .collect::<Result<_>>()?,
            f1: example.candidates.iter().map(|c| c.f1).collect(),
            positive: example.candidates.iter().map(|c| c.positive).collect(),
        })
    }

    /// Combined question vector `q + x1 + x2 + x3` over the enabled encoders.
    pub fn encode_question(&self, tape: &mut Tape<'_>, q: &QuestionInput, dropout: &mut Dropout<'_>) -> Result<Var> {
        let mut que_words = Vec::with_capacity(q.que.len());
        for &r in &q.que {
            let v = tape.row(self.word_table, r)?;
            que_words.push(dropout.apply(tape, v)?);
        }
        let base = bigru_encode(tape, &self.que, &que_words)?;
        let mut syntax = Vec::new();
        if let Some(s) = &self.sdp {
            let mut paths = Vec::with_capacity(q.sdp.len());
            for path in &q.sdp {
                let p = path
                    .iter()
                    .map(|r| match *r {
                        SdpRow::Word(i) => tape.row(self.word_table, i),
                        SdpRow::Label(i) => tape.row(s.table, i),
                    })
                    .collect::<Result<Vec<_>>>()?;
                paths.push(p);
            }
            syntax.push(encode_sdp(tape, &paths, &s.bigru)?);
        }
        if self.tpf.is_some() || self.tree.is_some() {
            let mut words = Vec::with_capacity(q.tree_words.len());
            for &r in &q.tree_words {
                let v = tape.row(self.word_table, r)?;
                words.push(dropout.apply(tape, v)?);
            }
            if let Some(t) = &self.tpf {
                let depths =
                    q.depth_rows.iter().map(|&r| tape.row(t.positions.table, r)).collect::<Result<Vec<_>>>()?;
                syntax.push(encode_tpf(tape, &words, &depths, &t.bigru)?);
            }
            if let Some(t) = &self.tree {
                let mut edges = Vec::with_capacity(q.edge_rows.len());
                for r in &q.edge_rows {
                    let e = match r {
                        Some(r) => tape.row(t.table, *r)?,
                        None => tape.param(t.tree_gru.root_edge),
                    };
                    edges.push(dropout.apply(tape, e)?);
                }
                syntax.push(encode_treegru(tape, &q.tree, &words, &edges, &t.tree_gru, &t.bigru)?);
            }
        }
        combine(tape, base, &syntax)
    }

    /// `sp = E_sp[relation] + mean(E_w[words])`.
    pub fn encode_subpath(&self, tape: &mut Tape<'_>, relation: usize, words: &[usize]) -> Result<Var> {
        let id = tape.row(self.relation_table, relation)?;
        let rows = words.iter().map(|&w| tape.row(self.word_table, w)).collect::<Result<Vec<_>>>()?;
        let mean = tape.mean(&rows)?;
        tape.add(id, mean)
    }

    /// Coordinatewise max over the sub-path vectors.
    pub fn encode_graph(&self, tape: &mut Tape<'_>, g: &GraphInput) -> Result<Var> {
        if g.subpaths.is_empty() {
            return Err(Error::invalid("graph has no sub-paths"));
        }
        let sps = g.subpaths.iter().map(|(r, w)| self.encode_subpath(tape, *r, w)).collect::<Result<Vec<_>>>()?;
        tape.maxpool(&sps)
    }

    /// `S = w · [cos(q, p), aux...]` as a tape scalar.
    pub fn score(&self, tape: &mut Tape<'_>, q: Var, p: Var, aux: [f64; 4]) -> Result<Var> {
        let s_rm = tape.cosine(q, p)?;
        let a = tape.constant(Tensor::vector(aux.to_vec()));
        let feats = tape.concat(&[s_rm, a])?;
        let w = tape.param(self.score_w);
        tape.dot(w, feats)
    }

    /// Inference-mode breakdown of every candidate's score.
    pub fn score_all(&self, p: &Prepared) -> Result<Vec<ScoreBreakdown>> {
        let mut tape = Tape::new(&self.params);
        let q = self.encode_question(&mut tape, &p.question, &mut Dropout::Off)?;
        let weights = self.score_weights();
        p.graphs
            .iter()
            .map(|g| {
                let gv = self.encode_graph(&mut tape, g)?;
                let s = tape.cosine(q, gv)?;
                total_score(tape.value(s).item(), g.aux, weights)
            })
            .collect()
    }
}

/// Top-scoring graph for a parsed question and its rendered, sorted
/// answers; `None` when no candidate graph exists.
pub fn answer_tree(model: &Model, linker: &Linker<'_>, tree: &DepTree) -> Result<Option<(QueryGraph, Vec<String>)>> {
    let store = linker.store;
    let links = linker.links(&crate::pipeline::tree_tokens(tree));
    let mut graphs = generate_candidates(&links, store, linker.gen)?;
    if graphs.is_empty() {
        return Ok(None);
    }
    let mut inputs = Vec::with_capacity(graphs.len());
    let mut answers = Vec::with_capacity(graphs.len());
    for g in &graphs {
        let a = store.execute(g)?;
        let feats = GraphFeatures::of(g, &links, a.len())?;
        inputs.push(model.prepare_graph(&g.subpaths(store), feats.values()));
        answers.push(a);
    }
    let n = graphs.len();
    let prepared = Prepared {
        id: String::new(),
        question: model.prepare_question(tree, &links)?,
        graphs: inputs,
        f1: vec![0.0; n],
        positive: vec![false; n],
    };
    let scores: Vec<f64> = model.score_all(&prepared)?.into_iter().map(|b| b.total).collect();
    let best = select(&scores).expect("nonempty candidate list");
    let mut rendered: Vec<String> = answers[best].iter().map(|v| store.render(v)).collect();
    rendered.sort();
    Ok(Some((graphs.swap_remove(best), rendered)))
}

#[cfg(test)]
mod tests;
