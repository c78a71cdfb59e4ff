//! Question preprocessing shared by training, evaluation and the CLI:
//! linking, candidate generation and labeling, with an on-disk cache.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Question;
use crate::deptree::DepTree;
use crate::error::{Error, Result};
use crate::kb::TripleStore;
use crate::qgraph::{
    generate_candidates, label_candidates, link_all, AliasIndex, FocusLinks, GenConfig, LabeledCandidate,
};
use crate::vectors::WordVectors;

/// One question with its parse, focus links and labeled candidates.
#[derive(Clone, Debug)]
pub struct Example {
    pub question: Question,
    pub tree: DepTree,
    pub links: FocusLinks,
    pub candidates: Vec<LabeledCandidate>,
    /// Candidates dropped because execution failed.
    pub dropped: usize,
}

impl Example {
    pub fn tokens(&self) -> Vec<String> {
        tree_tokens(&self.tree)
    }

    pub fn has_positive(&self) -> bool {
        self.candidates.iter().any(|c| c.positive)
    }

    /// Best f1 any candidate reaches.
    pub fn oracle_f1(&self) -> f64 {
        self.candidates.iter().map(|c| c.f1).fold(0.0, f64::max)
    }
}

pub fn tree_tokens(tree: &DepTree) -> Vec<String> {
    tree.forms().into_iter().map(str::to_string).collect()
}

/// Everything needed to link and generate for a batch of questions.
pub struct Linker<'a> {
    pub store: &'a TripleStore,
    pub aliases: AliasIndex,
    pub words: &'a WordVectors,
    pub gen: GenConfig,
    pub tau: f64,
}

impl<'a> Linker<'a> {
    pub fn new(store: &'a TripleStore, words: &'a WordVectors) -> Self {
        Self {
            store,
            aliases: AliasIndex::new(store),
            words,
            gen: GenConfig::default(),
            tau: crate::qgraph::DEFAULT_TAU,
        }
    }

    pub fn links(&self, tokens: &[String]) -> FocusLinks {
        link_all(tokens, &self.aliases, self.store, self.words)
    }

    pub fn example(&self, question: &Question, tree: &DepTree) -> Result<Example> {
        let links = self.links(&tree_tokens(tree));
        let graphs = generate_candidates(&links, self.store, self.gen)?;
        let labeling = label_candidates(graphs, self.store, &question.answers, self.tau)?;
        Ok(Example {
            question: question.clone(),
            tree: tree.clone(),
            links,
            candidates: labeling.candidates,
            dropped: labeling.dropped,
        })
    }

    pub fn examples(&self, questions: &[Question], trees: &[DepTree]) -> Result<Vec<Example>> {
        if questions.len() != trees.len() {
            return Err(Error::invalid(format!("{} questions but {} parses", questions.len(), trees.len())));
        }
        questions.iter().zip(trees).map(|(q, t)| self.example(q, t)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    id: String,
    links: FocusLinks,
    candidates: Vec<LabeledCandidate>,
    dropped: usize,
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    key: String,
    entries: Vec<CacheEntry>,
}

/// Content hash of everything candidate generation depends on.
pub fn cache_key(inputs: &[&[u8]], linker: &Linker<'_>) -> String {
    let mut h = Sha256::new();
    for input in inputs {
        h.update((input.len() as u64).to_le_bytes());
        h.update(input);
    }
    h.update(format!("{:?}|{}", linker.gen, linker.tau).as_bytes());
    hex::encode(h.finalize())
}

pub fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("candidates-{}.json", &key[..16]))
}

/// Loads cached examples when `dir` holds an entry for `key`, otherwise
/// builds them and writes the cache.
pub fn cached_examples(
    dir: Option<&Path>,
    key: &str,
    linker: &Linker<'_>,
    questions: &[Question],
    trees: &[DepTree],
) -> Result<Vec<Example>> {
    let Some(dir) = dir else {
        return linker.examples(questions, trees);
    };
    let path = cache_path(dir, key);
    if let Ok(text) = std::fs::read_to_string(&path) {
        match serde_json::from_str::<CacheFile>(&text) {
            Ok(file) if file.key == key && file.entries.len() == questions.len() => {
                log::info!("using candidate cache {}", path.display());
                return Ok(questions
                    .iter()
                    .zip(trees)
                    .zip(file.entries)
                    .map(|((q, t), e)| Example {
                        question: q.clone(),
                        tree: t.clone(),
                        links: e.links,
                        candidates: e.candidates,
                        dropped: e.dropped,
                    })
                    .collect());
            }
            _ => log::warn!("ignoring stale candidate cache {}", path.display()),
        }
    }
    let examples = linker.examples(questions, trees)?;
    let file = CacheFile {
        key: key.to_string(),
        entries: examples
            .iter()
            .map(|e| CacheEntry {
                id: e.question.id.clone(),
                links: e.links.clone(),
                candidates: e.candidates.clone(),
                dropped: e.dropped,
            })
            .collect(),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let text = serde_json::to_string(&file).map_err(|e| Error::invalid(format!("cache encoding: {e}")))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(examples)
}
