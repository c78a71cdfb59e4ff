use std::collections::{BTreeSet, HashSet};

use super::{Constraint, FocusLinks, LinkRef, Node, QueryGraph, Span};
use crate::error::Result;
use crate::kb::{EntityId, Hop, TripleStore, Value};

pub const MAX_CONSTRAINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenConfig {
    pub max_constraints: usize,
    pub two_hop: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self { max_constraints: MAX_CONSTRAINTS, two_hop: true }
    }
}

#[derive(Clone, Debug)]
struct Attach {
    constraint: Constraint,
    link: LinkRef,
}

/// Distinct one-hop paths, then distinct two-hop paths, each sorted.
fn main_paths(store: &TripleStore, e: EntityId, two_hop: bool) -> Result<Vec<Vec<Hop>>> {
    let one: BTreeSet<Hop> = store.one_hop(e)?.into_iter().map(|(h, _)| h).collect();
    let mut paths: Vec<Vec<Hop>> = one.into_iter().map(|h| vec![h]).collect();
    if two_hop {
        let two: BTreeSet<(Hop, Hop)> = store.two_hop(e)?.into_iter().map(|t| (t.first, t.second)).collect();
        paths.extend(two.into_iter().map(|(a, b)| vec![a, b]));
    }
    Ok(paths)
}

#[derive(Default)]
struct NodeFacts {
    entity_facts: BTreeSet<(Hop, EntityId)>,
    time_hops: BTreeSet<Hop>,
    sort_hops: BTreeSet<Hop>,
}

fn node_facts(store: &TripleStore, entities: &BTreeSet<EntityId>) -> Result<NodeFacts> {
    let mut f = NodeFacts::default();
    for e in entities {
        for (hop, v) in store.one_hop(*e)? {
            if let Value::Entity(o) = v {
                f.entity_facts.insert((hop, o));
            }
            if v.is_time() {
                f.time_hops.insert(hop);
            }
            if v.sort_key().is_some() {
                f.sort_hops.insert(hop);
            }
        }
    }
    Ok(f)
}

fn attachments(store: &TripleStore, links: &FocusLinks, base: &QueryGraph, main_span: Span) -> Result<Vec<Attach>> {
    let mut nodes = Vec::new();
    if base.path.len() == 2 {
        let mids: BTreeSet<EntityId> =
            store.follow(base.entity, base.path[0]).iter().filter_map(Value::as_entity).collect();
        nodes.push((Node::Mid, node_facts(store, &mids)?));
    }
    let answers: BTreeSet<EntityId> = store.execute(base)?.iter().filter_map(Value::as_entity).collect();
    nodes.push((Node::Answer, node_facts(store, &answers)?));

    let free = |s: &Span| !s.overlaps(&main_span);
    let mut out = Vec::new();
    for (i, l) in links.entities.iter().enumerate() {
        if i == base.entity_link || !free(&l.span) {
            continue;
        }
        for (node, facts) in &nodes {
            for (hop, _) in facts.entity_facts.iter().filter(|(_, o)| *o == l.entity) {
                out.push(Attach {
                    constraint: Constraint::Entity { node: *node, hop: *hop, entity: l.entity },
                    link: LinkRef::Entity(i),
                });
            }
        }
    }
    for (i, l) in links.types.iter().enumerate().filter(|(_, l)| free(&l.span)) {
        out.push(Attach { constraint: Constraint::Type { label: l.label.clone() }, link: LinkRef::Type(i) });
    }
    for (i, l) in links.times.iter().enumerate().filter(|(_, l)| free(&l.span)) {
        for (node, facts) in &nodes {
            for hop in &facts.time_hops {
                out.push(Attach {
                    constraint: Constraint::Time { node: *node, hop: *hop, op: l.op, value: l.value.clone() },
                    link: LinkRef::Time(i),
                });
            }
        }
    }
    for (i, l) in links.ordinals.iter().enumerate().filter(|(_, l)| free(&l.span)) {
        for (node, facts) in &nodes {
            for hop in &facts.sort_hops {
                out.push(Attach {
                    constraint: Constraint::Ordinal { node: *node, hop: *hop, direction: l.direction, rank: l.rank },
                    link: LinkRef::Ordinal(i),
                });
            }
        }
    }
    Ok(out)
}

struct Search<'a> {
    store: &'a TripleStore,
    options: Vec<Attach>,
    max: usize,
    seen: &'a mut HashSet<(EntityId, Vec<Hop>, Vec<Constraint>)>,
    out: &'a mut Vec<QueryGraph>,
}

impl Search<'_> {
    fn admissible(graph: &QueryGraph, a: &Attach) -> bool {
        !graph.provenance.contains(&a.link)
            && !(a.constraint.is_type() && graph.constraints.iter().any(Constraint::is_type))
            && !(a.constraint.is_ordinal() && graph.constraints.iter().any(Constraint::is_ordinal))
    }

    /// Depth-first over option subsets in index order. Adding a constraint
    /// never turns an empty answer set nonempty, so empty graphs prune.
    fn extend(&mut self, graph: &QueryGraph, from: usize) -> Result<()> {
        if graph.constraints.len() == self.max {
            return Ok(());
        }
        for i in from..self.options.len() {
            let a = &self.options[i];
            if !Self::admissible(graph, a) {
                continue;
            }
            let next = graph.clone().with_constraint(a.constraint.clone(), a.link);
            if self.store.execute(&next)?.is_empty() {
                continue;
            }
            if self.seen.insert(next.structure_key()) {
                self.out.push(next.clone());
            }
            self.extend(&next, i + 1)?;
        }
        Ok(())
    }
}

/// Every main path of every entity link, each with every admissible
/// subset of attachable constraints that keeps the answer set nonempty.
///
/// A subset is admissible when it uses each link at most once, holds at
/// most `max_constraints` constraints, at most one type constraint and at
/// most one ordinal. Structurally identical graphs are kept once, at their
/// first occurrence.
pub fn generate_candidates(links: &FocusLinks, store: &TripleStore, cfg: GenConfig) -> Result<Vec<QueryGraph>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (li, link) in links.entities.iter().enumerate() {
        for path in main_paths(store, link.entity, cfg.two_hop)? {
            let base = QueryGraph::new(link.entity, path, li);
            if store.execute(&base)?.is_empty() {
                continue;
            }
            if seen.insert(base.structure_key()) {
                out.push(base.clone());
            }
            let options = attachments(store, links, &base, link.span)?;
            let mut search = Search { store, options, max: cfg.max_constraints, seen: &mut seen, out: &mut out };
            search.extend(&base, 0)?;
        }
    }
    Ok(out)
}
