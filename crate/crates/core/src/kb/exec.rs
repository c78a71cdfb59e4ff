use std::collections::BTreeSet;

use super::{EntityId, TripleStore, Value, VirtualPredicate};
use crate::error::{Error, Result};
use crate::qgraph::{Constraint, Node, QueryGraph};

/// One instantiation of a main path.
#[derive(Clone, Debug)]
struct Binding {
    mid: Option<EntityId>,
    answer: Value,
}

impl TripleStore {
    fn validate(&self, graph: &QueryGraph) -> Result<()> {
        if !self.is_registered(graph.entity) {
            return Err(Error::invalid(format!("entity id {} is not registered", graph.entity.0)));
        }
        if graph.path.is_empty() || graph.path.len() > 2 {
            return Err(Error::invalid(format!("main path must have 1 or 2 hops, got {}", graph.path.len())));
        }
        for hop in &graph.path {
            self.check_hop(*hop)?;
        }
        for c in &graph.constraints {
            if c.node() == Some(Node::Mid) && graph.path.len() != 2 {
                return Err(Error::invalid("mid-node constraint on a one-hop path"));
            }
            match c {
                Constraint::Entity { hop, entity, .. } => {
                    self.check_hop(*hop)?;
                    if !self.is_registered(*entity) {
                        return Err(Error::invalid(format!("entity id {} is not registered", entity.0)));
                    }
                }
                Constraint::Type { label } => {
                    if !self.type_labels().contains(label) {
                        return Err(Error::invalid(format!("unknown type label {label:?}")));
                    }
                }
                Constraint::Time { hop, .. } | Constraint::Ordinal { hop, .. } => self.check_hop(*hop)?,
            }
            if let Constraint::Ordinal { rank: 0, .. } = c {
                return Err(Error::invalid("ordinal rank must be at least 1"));
            }
        }
        Ok(())
    }

    fn bindings(&self, graph: &QueryGraph) -> Vec<Binding> {
        let first = self.follow(graph.entity, graph.path[0]);
        match graph.path.get(1) {
            None => first.into_iter().map(|answer| Binding { mid: None, answer }).collect(),
            Some(second) => {
                let start = Value::Entity(graph.entity);
                let mut out = Vec::new();
                for mid in first.iter().filter_map(Value::as_entity) {
                    for answer in self.follow(mid, *second) {
                        if answer != start {
                            out.push(Binding { mid: Some(mid), answer });
                        }
                    }
                }
                out
            }
        }
    }

    fn node_entity(b: &Binding, node: Node) -> Option<EntityId> {
        match node {
            Node::Mid => b.mid,
            Node::Answer => b.answer.as_entity(),
        }
    }

    fn node_value(b: &Binding, node: Node) -> Option<Value> {
        match node {
            Node::Mid => b.mid.map(Value::Entity),
            Node::Answer => Some(b.answer.clone()),
        }
    }

    fn satisfies(&self, b: &Binding, c: &Constraint) -> bool {
        match c {
            Constraint::Entity { node, hop, entity } => {
                Self::node_entity(b, *node).is_some_and(|e| self.follow(e, *hop).contains(&Value::Entity(*entity)))
            }
            Constraint::Type { label } => b.answer.as_entity().is_some_and(|e| self.has_type(e, label)),
            Constraint::Time { node, hop, op, value } => Self::node_entity(b, *node).is_some_and(|e| {
                self.follow(e, *hop).iter().any(|o| o.is_time() && VirtualPredicate::compare(*op, o, value))
            }),
            Constraint::Ordinal { .. } => true,
        }
    }

    /// Ordinal selection: sort the distinct node values by their sort key
    /// in `direction`, ties by value ascending, and keep the `rank`-th.
    fn apply_ordinal(&self, bindings: Vec<Binding>, c: &Constraint) -> Vec<Binding> {
        let Constraint::Ordinal { node, hop, direction, rank } = c else {
            return bindings;
        };
        let descending = matches!(direction, super::SortDirection::Descending);
        let mut keyed: Vec<((i64, i64), Value)> = Vec::new();
        let mut seen = BTreeSet::new();
        for b in &bindings {
            let (Some(v), Some(e)) = (Self::node_value(b, *node), Self::node_entity(b, *node)) else {
                continue;
            };
            if !seen.insert(v.clone()) {
                continue;
            }
            let keys = self.follow(e, *hop);
            let key = keys.iter().filter_map(Value::sort_key);
            let key = if descending { key.max() } else { key.min() };
            if let Some(k) = key {
                keyed.push((k, v));
            }
        }
        keyed.sort_by(|(ka, va), (kb, vb)| {
            let primary = if descending { kb.cmp(ka) } else { ka.cmp(kb) };
            primary.then_with(|| va.cmp(vb))
        });
        let Some((_, chosen)) = keyed.into_iter().nth(*rank as usize - 1) else {
            return Vec::new();
        };
        bindings.into_iter().filter(|b| Self::node_value(b, *node).as_ref() == Some(&chosen)).collect()
    }

    /// Executes a query graph: main-path traversal, then every filtering
    /// constraint, then ordinal selection.
    pub fn execute(&self, graph: &QueryGraph) -> Result<BTreeSet<Value>> {
        self.validate(graph)?;
        let mut bindings = self.bindings(graph);
        for c in graph.constraints.iter().filter(|c| !c.is_ordinal()) {
            bindings.retain(|b| self.satisfies(b, c));
        }
        for c in graph.constraints.iter().filter(|c| c.is_ordinal()) {
            bindings = self.apply_ordinal(bindings, c);
        }
        Ok(bindings.into_iter().map(|b| b.answer).collect())
    }
}
