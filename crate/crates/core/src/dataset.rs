//! Question datasets: `id<TAB>question<TAB>parse_ref<TAB>answer|answer...`.
//!
//! `parse_ref` names a CoNLL-U sentence by its `# sent_id`, or by 1-based
//! position in the corpus when it is a plain number no sentence claims.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::deptree::{parse_conllu, DepTree};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub parse_ref: String,
    pub answers: BTreeSet<String>,
}

pub fn parse_dataset(text: &str) -> Result<Vec<Question>> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        let [id, question, parse_ref, answers] = cols.as_slice() else {
            return Err(Error::parse(line, format!("expected 4 tab-separated columns, got {}", cols.len())));
        };
        let answers: BTreeSet<String> =
            answers.split('|').map(str::trim).filter(|a| !a.is_empty()).map(String::from).collect();
        if answers.is_empty() {
            return Err(Error::parse(line, "no gold answers"));
        }
        if !ids.insert(id.to_string()) {
            return Err(Error::parse(line, format!("duplicate question id {id:?}")));
        }
        out.push(Question {
            id: id.to_string(),
            text: question.to_string(),
            parse_ref: parse_ref.to_string(),
            answers,
        });
    }
    Ok(out)
}

pub fn write_dataset(questions: &[Question]) -> String {
    let mut out = String::new();
    for q in questions {
        let answers: Vec<&str> = q.answers.iter().map(String::as_str).collect();
        out.push_str(&format!("{}\t{}\t{}\t{}\n", q.id, q.text, q.parse_ref, answers.join("|")));
    }
    out
}

pub fn load_dataset(path: &Path) -> Result<Vec<Question>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

/// Parses a whole CoNLL-U corpus, failing on the first bad sentence.
pub fn load_corpus(path: &Path) -> Result<Vec<DepTree>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conllu(&text).into_iter().collect()
}

/// The parse in `text` whose forms spell `question`; a single-sentence
/// file must match it.
pub fn parse_conllu_one(text: &str, question: &str) -> Result<DepTree> {
    let trees: Vec<DepTree> = parse_conllu(text).into_iter().collect::<Result<_>>()?;
    let words: Vec<&str> = question.split_whitespace().collect();
    trees
        .into_iter()
        .find(|t| t.forms() == words)
        .ok_or_else(|| Error::invalid(format!("no parse spells {question:?}")))
}

/// Finds each question's tree and checks that its forms spell the question.
pub fn resolve_parses(questions: &[Question], corpus: &[DepTree]) -> Result<Vec<DepTree>> {
    let by_id: HashMap<&str, &DepTree> = corpus.iter().filter_map(|t| t.sent_id().map(|s| (s, t))).collect();
    questions
        .iter()
        .map(|q| {
            let tree = by_id
                .get(q.parse_ref.as_str())
                .copied()
                .or_else(|| {
                    let n: usize = q.parse_ref.parse().ok()?;
                    corpus.get(n.checked_sub(1)?)
                })
                .ok_or_else(|| Error::invalid(format!("question {}: no parse {:?}", q.id, q.parse_ref)))?;
            let words: Vec<&str> = q.text.split_whitespace().collect();
            if words != tree.forms() {
                return Err(Error::invalid(format!(
                    "question {}: parse tokens {:?} do not match the question text",
                    q.id,
                    tree.forms()
                )));
            }
            Ok(tree.clone())
        })
        .collect()
}
