//! Dependency trees: CoNLL-U ingestion, validation, and the structural
//! features consumed by the encoders (shortest dependency paths, depths,
//! edge neighborhoods, the answer word).

mod conllu;
mod path;

pub use conllu::{parse_conllu, write_conllu};
pub use path::{Direction, SdpPath};

use crate::error::{Error, Result};

/// Question words that mark the answer position.
pub const WH_WORDS: [&str; 9] = ["what", "who", "whom", "whose", "which", "where", "when", "why", "how"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    /// 1-based position.
    pub index: usize,
    pub form: String,
    /// Parent index, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

impl Token {
    pub fn is_punct(&self) -> bool {
        self.deprel == "punct" || !self.form.chars().any(char::is_alphanumeric)
    }
}

/// One head link `head -deprel-> tail`, rendered with surface forms.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DirectedEdge {
    pub head_form: String,
    pub deprel: String,
    pub tail_form: String,
}

/// A validated dependency tree. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct DepTree {
    tokens: Vec<Token>,
    sent_id: Option<String>,
    root: usize,
    // indexed by token index; slot 0 unused
    left: Vec<Vec<usize>>,
    right: Vec<Vec<usize>>,
    depth: Vec<usize>,
}

impl DepTree {
    /// Validates head links: one root, no self-loops, no cycles.
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        let n = tokens.len();
        if n == 0 {
            return Err(Error::invalid("empty tree"));
        }
        for (pos, t) in tokens.iter().enumerate() {
            if t.index != pos + 1 {
                return Err(Error::invalid(format!("token {} out of order (expected id {})", t.index, pos + 1)));
            }
            if t.head > n {
                return Err(Error::invalid(format!("token {} has head {} beyond sentence", t.index, t.head)));
            }
            if t.head == t.index {
                return Err(Error::invalid(format!("cycle: token {} is its own head", t.index)));
            }
            if t.deprel.is_empty() {
                return Err(Error::invalid(format!("token {} has an empty deprel", t.index)));
            }
        }
        let roots: Vec<usize> = tokens.iter().filter(|t| t.head == 0).map(|t| t.index).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(Error::invalid("no root token")),
            _ => return Err(Error::invalid(format!("multiple roots: {roots:?}"))),
        };
        let mut depth = vec![usize::MAX; n + 1];
        depth[root] = 0;
        for start in 1..=n {
            // walk up until a node of known depth; more than n steps means a cycle
            let mut chain = Vec::new();
            let mut cur = start;
            while depth[cur] == usize::MAX {
                chain.push(cur);
                if chain.len() > n {
                    return Err(Error::invalid(format!("cycle through token {start}")));
                }
                cur = tokens[cur - 1].head;
            }
            let mut d = depth[cur];
            for &c in chain.iter().rev() {
                d += 1;
                depth[c] = d;
            }
        }
        let mut left = vec![Vec::new(); n + 1];
        let mut right = vec![Vec::new(); n + 1];
        for t in &tokens {
            if t.head == 0 {
                continue;
            }
            if t.index < t.head {
                left[t.head].push(t.index);
            } else {
                right[t.head].push(t.index);
            }
        }
        Ok(Self { tokens, sent_id: None, root, left, right, depth })
    }

    /// Convenience constructor from parallel form/head/deprel columns.
    pub fn from_columns(forms: &[&str], heads: &[usize], deprels: &[&str]) -> Result<Self> {
        if forms.len() != heads.len() || forms.len() != deprels.len() {
            return Err(Error::invalid("column lengths differ"));
        }
        let tokens = forms
            .iter()
            .zip(heads)
            .zip(deprels)
            .enumerate()
            .map(|(i, ((f, h), r))| Token { index: i + 1, form: (*f).to_string(), head: *h, deprel: (*r).to_string() })
            .collect();
        Self::new(tokens)
    }

    pub fn with_sent_id(mut self, id: Option<String>) -> Self {
        self.sent_id = id;
        self
    }

    pub fn sent_id(&self) -> Option<&str> {
        self.sent_id.as_deref()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn forms(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.form.as_str()).collect()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    fn check(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.len() {
            return Err(Error::invalid(format!("token index {i} out of range 1..={}", self.len())));
        }
        Ok(())
    }

    /// Token at 1-based index `i`. Panics when out of range.
    pub fn token(&self, i: usize) -> &Token {
        &self.tokens[i - 1]
    }

    pub fn head(&self, i: usize) -> usize {
        self.tokens[i - 1].head
    }

    pub fn left_children(&self, i: usize) -> &[usize] {
        &self.left[i]
    }

    pub fn right_children(&self, i: usize) -> &[usize] {
        &self.right[i]
    }

    /// All children in surface order.
    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.left[i].iter().chain(&self.right[i]).copied()
    }

    /// Number of head links from `i` up to the root.
    pub fn depth(&self, i: usize) -> Result<usize> {
        self.check(i)?;
        Ok(self.depth[i])
    }

    /// Depths of all tokens in surface order.
    pub fn depths(&self) -> Vec<usize> {
        self.depth[1..].to_vec()
    }

    /// Nodes ordered so every child precedes its parent (leaves first).
    pub fn bottom_up_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (1..=self.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(self.depth[i]));
        order
    }

    pub fn lca(&self, a: usize, b: usize) -> Result<usize> {
        self.check(a)?;
        self.check(b)?;
        let (mut a, mut b) = (a, b);
        while self.depth[a] > self.depth[b] {
            a = self.head(a);
        }
        while self.depth[b] > self.depth[a] {
            b = self.head(b);
        }
        while a != b {
            a = self.head(a);
            b = self.head(b);
        }
        Ok(a)
    }

    /// Shortest dependency path from `source` to `target`.
    pub fn sdp(&self, source: usize, target: usize) -> Result<SdpPath> {
        let lca = self.lca(source, target)?;
        let mut nodes = Vec::new();
        let mut labels = Vec::new();
        let mut cur = source;
        while cur != lca {
            nodes.push(cur);
            labels.push((self.token(cur).deprel.clone(), Direction::Up));
            cur = self.head(cur);
        }
        nodes.push(lca);
        let mut down = Vec::new();
        let mut cur = target;
        while cur != lca {
            down.push(cur);
            cur = self.head(cur);
        }
        for &n in down.iter().rev() {
            nodes.push(n);
            labels.push((self.token(n).deprel.clone(), Direction::Down));
        }
        let forms = nodes.iter().map(|&i| self.token(i).form.clone()).collect();
        Ok(SdpPath { nodes, forms, labels })
    }

    /// First wh-word in surface order (case-folded); falls back to token 1.
    pub fn answer_word(&self) -> usize {
        self.tokens.iter().find(|t| WH_WORDS.contains(&t.form.to_lowercase().as_str())).map_or(1, |t| t.index)
    }

    pub fn edge(&self, tail: usize) -> Option<DirectedEdge> {
        let t = self.tokens.get(tail.checked_sub(1)?)?;
        if t.head == 0 {
            return None;
        }
        Some(DirectedEdge {
            head_form: self.token(t.head).form.clone(),
            deprel: t.deprel.clone(),
            tail_form: t.form.clone(),
        })
    }

    /// Every head link, identified by its tail index, in surface order.
    pub fn edge_tails(&self) -> impl Iterator<Item = usize> + '_ {
        self.tokens.iter().filter(|t| t.head != 0).map(|t| t.index)
    }

    /// Tails of the neighboring edges of the link `head(tail) -> tail`: the
    /// incoming edge of the head (absent at the root), then every outgoing
    /// edge of the tail in surface order.
    pub fn neighbor_tails(&self, tail: usize) -> Result<Vec<usize>> {
        self.check(tail)?;
        let head = self.head(tail);
        if head == 0 {
            return Err(Error::invalid(format!("token {tail} is the root and has no incoming edge")));
        }
        let mut out = Vec::new();
        if self.head(head) != 0 {
            out.push(head);
        }
        out.extend(self.children(tail));
        Ok(out)
    }

    /// Neighborhood of the edge `head -> tail`, which must be a link of this tree.
    pub fn edge_neighborhood(&self, head: usize, tail: usize) -> Result<Vec<DirectedEdge>> {
        if tail == 0 || tail > self.len() || self.head(tail) != head || head == 0 {
            return Err(Error::invalid(format!("edge {head}->{tail} is not in the tree")));
        }
        Ok(self.neighbor_tails(tail)?.into_iter().map(|t| self.edge(t).expect("non-root")).collect())
    }
}

#[cfg(test)]
mod tests;
