//! Focus linking, candidate query-graph generation and F1 labeling.

mod generate;
mod label;
mod links;

pub use generate::{generate_candidates, GenConfig, MAX_CONSTRAINTS};
pub use label::{f1_score, label_candidates, training_pairs, LabeledCandidate, Labeling, DEFAULT_N_NEG, DEFAULT_TAU};
pub use links::{
    link_all, link_entities, link_ordinal, link_time, link_types, AliasIndex, EntityLink, FocusLinks, OrdinalLink,
    Span, TimeLink, TypeLink, MAX_TYPE_LINKS, ORDINAL_WORDS, STOPWORDS, SUPERLATIVES,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kb::{CompareOp, EntityId, Hop, SortDirection, TripleStore, Value, VirtualPredicate};

/// A main-path node that a constraint can hang off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Node {
    /// Intermediate node of a two-hop path.
    Mid,
    Answer,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Constraint {
    Entity {
        node: Node,
        hop: Hop,
        entity: EntityId,
    },
    /// Always on the answer node.
    Type {
        label: String,
    },
    Time {
        node: Node,
        hop: Hop,
        op: CompareOp,
        value: Value,
    },
    Ordinal {
        node: Node,
        hop: Hop,
        direction: SortDirection,
        rank: u32,
    },
}

impl Constraint {
    pub fn node(&self) -> Option<Node> {
        match self {
            Constraint::Entity { node, .. } | Constraint::Time { node, .. } | Constraint::Ordinal { node, .. } => {
                Some(*node)
            }
            Constraint::Type { .. } => None,
        }
    }

    pub fn is_ordinal(&self) -> bool {
        matches!(self, Constraint::Ordinal { .. })
    }

    pub fn is_type(&self) -> bool {
        matches!(self, Constraint::Type { .. })
    }
}

/// Which focus link produced a graph element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LinkRef {
    Entity(usize),
    Type(usize),
    Time(usize),
    Ordinal(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryGraph {
    pub entity: EntityId,
    pub path: Vec<Hop>,
    pub constraints: Vec<Constraint>,
    /// Link of the grounded entity.
    pub entity_link: usize,
    /// Parallel to `constraints`.
    pub provenance: Vec<LinkRef>,
}

impl QueryGraph {
    pub fn new(entity: EntityId, path: Vec<Hop>, entity_link: usize) -> Self {
        Self { entity, path, constraints: Vec::new(), entity_link, provenance: Vec::new() }
    }

    pub fn with_constraint(mut self, c: Constraint, link: LinkRef) -> Self {
        self.constraints.push(c);
        self.provenance.push(link);
        self
    }

    /// Identity of the executable structure, ignoring provenance and
    /// constraint order.
    pub fn structure_key(&self) -> (EntityId, Vec<Hop>, Vec<Constraint>) {
        let mut cs = self.constraints.clone();
        cs.sort();
        (self.entity, self.path.clone(), cs)
    }

    /// Relation strings of the sub-paths from the answer node to every
    /// focus: the main-path entity first, then each constraint.
    pub fn subpaths(&self, store: &TripleStore) -> Vec<String> {
        let hop = |h: Hop| store.render_hop(h);
        let mut main: Vec<String> = self.path.iter().map(|h| hop(*h)).collect();
        let mut out = vec![main.join("..")];
        // Chain from the answer node to the mid node.
        let to_mid = match self.path.len() {
            2 => {
                main.remove(0);
                Some(main.join(".."))
            }
            _ => None,
        };
        let prefix = |node: Node| match (node, &to_mid) {
            (Node::Mid, Some(m)) => format!("{m}.."),
            _ => String::new(),
        };
        for c in &self.constraints {
            out.push(match c {
                Constraint::Entity { node, hop: h, .. } => format!("{}{}", prefix(*node), hop(*h)),
                Constraint::Type { label } => format!("type_{label}"),
                Constraint::Time { node, hop: h, op, .. } => {
                    format!("{}{}..{}", prefix(*node), hop(*h), VirtualPredicate::Compare(*op).relation_name())
                }
                Constraint::Ordinal { node, hop: h, direction, rank } => format!(
                    "{}{}..{}",
                    prefix(*node),
                    hop(*h),
                    VirtualPredicate::Ordinal { direction: *direction, rank: *rank }.relation_name()
                ),
            });
        }
        out
    }

    pub fn display<'a>(&'a self, store: &'a TripleStore) -> GraphDisplay<'a> {
        GraphDisplay { graph: self, store }
    }
}

pub struct GraphDisplay<'a> {
    graph: &'a QueryGraph,
    store: &'a TripleStore,
}

impl fmt::Display for GraphDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.store;
        let g = self.graph;
        write!(f, "{}", s.entity_name(g.entity))?;
        for (i, h) in g.path.iter().enumerate() {
            let node = if i + 1 == g.path.len() { "?ans" } else { "?mid" };
            write!(f, " -{}-> {node}", s.render_hop(*h))?;
        }
        for c in &g.constraints {
            let node = |n: &Node| match n {
                Node::Mid => "?mid",
                Node::Answer => "?ans",
            };
            match c {
                Constraint::Entity { node: n, hop, entity } => {
                    write!(f, " ; {} -{}-> {}", node(n), s.render_hop(*hop), s.entity_name(*entity))?
                }
                Constraint::Type { label } => write!(f, " ; ?ans type {label}")?,
                Constraint::Time { node: n, hop, op, value } => {
                    write!(f, " ; {} -{}-> {} {value}", node(n), s.render_hop(*hop), op.symbol())?
                }
                Constraint::Ordinal { node: n, hop, direction, rank } => {
                    let d = match direction {
                        SortDirection::Ascending => "asc",
                        SortDirection::Descending => "desc",
                    };
                    write!(f, " ; {} -{}-> {d} #{rank}", node(n), s.render_hop(*hop))?
                }
            }
        }
        Ok(())
    }
}
