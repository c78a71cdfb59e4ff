use super::{DepTree, Token};
use crate::error::{Error, Result};

/// Parses CoNLL-U text into one result per sentence.
///
/// Only ID, FORM, HEAD and DEPREL are read. Multiword ranges (`1-2`) and
/// empty nodes (`1.1`) are skipped. A malformed sentence yields an error
/// carrying the offending line number; the remaining sentences are still
/// returned. `# sent_id = ...` comments are kept on the tree.
pub fn parse_conllu(text: &str) -> Vec<Result<DepTree>> {
    let mut out = Vec::new();
    let mut sentence: Option<Sentence> = None;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if let Some(s) = sentence.take() {
                out.push(s.finish());
            }
            continue;
        }
        let s = sentence.get_or_insert_with(|| Sentence::new(lineno));
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    s.sent_id = Some(value.trim().to_string());
                }
            }
            continue;
        }
        if s.error.is_some() {
            continue;
        }
        if let Err(e) = s.push_line(line, lineno) {
            s.error = Some(e);
        }
    }
    if let Some(s) = sentence.take() {
        out.push(s.finish());
    }
    out
}

struct Sentence {
    first_line: usize,
    sent_id: Option<String>,
    tokens: Vec<Token>,
    error: Option<Error>,
}

impl Sentence {
    fn new(first_line: usize) -> Self {
        Self { first_line, sent_id: None, tokens: Vec::new(), error: None }
    }

    fn push_line(&mut self, line: &str, lineno: usize) -> Result<()> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(lineno, format!("expected 10 columns, found {}", cols.len())));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            return Ok(());
        }
        let index: usize = cols[0].parse().map_err(|_| Error::parse(lineno, format!("bad token id {:?}", cols[0])))?;
        let head: usize =
            cols[6].parse().map_err(|_| Error::parse(lineno, format!("non-integer HEAD {:?}", cols[6])))?;
        if index != self.tokens.len() + 1 {
            return Err(Error::parse(lineno, format!("token id {index} out of sequence")));
        }
        if head == index {
            return Err(Error::parse(lineno, format!("cycle: token {index} is its own head")));
        }
        if cols[7].is_empty() || cols[7] == "_" {
            return Err(Error::parse(lineno, "missing DEPREL"));
        }
        self.tokens.push(Token { index, form: cols[1].to_string(), head, deprel: cols[7].to_string() });
        Ok(())
    }

    fn finish(self) -> Result<DepTree> {
        if let Some(e) = self.error {
            return Err(e);
        }
        let first = self.first_line;
        DepTree::new(self.tokens)
            .map(|t| t.with_sent_id(self.sent_id))
            .map_err(|e| Error::parse(first, format!("sentence starting here: {e}")))
    }
}

/// Renders trees as CoNLL-U, with `_` in the unused columns.
pub fn write_conllu(trees: &[DepTree]) -> String {
    let mut out = String::new();
    for tree in trees {
        if let Some(id) = tree.sent_id() {
            out.push_str(&format!("# sent_id = {id}\n"));
        }
        for t in tree.tokens() {
            out.push_str(&format!("{}\t{}\t_\t_\t_\t_\t{}\t{}\t_\t_\n", t.index, t.form, t.head, t.deprel));
        }
        out.push('\n');
    }
    out
}
