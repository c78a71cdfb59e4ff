use std::fmt;

/// Traversal direction of one path edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// From a child to its head.
    Up,
    /// From a head to its child.
    Down,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }
}

/// Alternating word/edge path between two tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SdpPath {
    /// Token indices, source first.
    pub nodes: Vec<usize>,
    pub forms: Vec<String>,
    /// `labels[k]` connects `nodes[k]` and `nodes[k + 1]`.
    pub labels: Vec<(String, Direction)>,
}

impl SdpPath {
    pub fn edge_count(&self) -> usize {
        self.labels.len()
    }

    /// Words and labels interleaved: `[w0, l0, w1, l1, ..., wn]`.
    pub fn token_sequence(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.forms.len() * 2);
        for (i, f) in self.forms.iter().enumerate() {
            if i > 0 {
                out.push(self.labels[i - 1].0.clone());
            }
            out.push(f.clone());
        }
        out
    }

    pub fn reversed(&self) -> Self {
        Self {
            nodes: self.nodes.iter().rev().copied().collect(),
            forms: self.forms.iter().rev().cloned().collect(),
            labels: self.labels.iter().rev().map(|(l, d)| (l.clone(), d.flip())).collect(),
        }
    }
}

impl fmt::Display for SdpPath {
    /// `what -det-> movies -dobj-> play -nsubj-> Diana`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, form) in self.forms.iter().enumerate() {
            if i > 0 {
                write!(f, " -{}-> ", self.labels[i - 1].0)?;
            }
            f.write_str(form)?;
        }
        Ok(())
    }
}
