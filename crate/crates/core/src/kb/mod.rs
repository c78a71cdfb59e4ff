//! In-memory triple store with typed objects and the virtual predicates
//! (comparison, ordinal) used to execute query graphs.

mod exec;
mod load;

pub use load::{parse_triples, TripleStoreBuilder};

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredId(pub u32);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Value {
    Entity(EntityId),
    Text(String),
    Integer(i64),
    /// Always within `1000..=2999`.
    Year(i32),
    Date {
        year: i32,
        month: u8,
        day: u8,
    },
}

impl Value {
    pub fn as_entity(&self) -> Option<EntityId> {
        match self {
            Value::Entity(e) => Some(*e),
            _ => None,
        }
    }

    pub fn is_time(&self) -> bool {
        matches!(self, Value::Year(_) | Value::Date { .. })
    }

    /// Key for ordinal sorting; `None` for non-orderable values.
    pub fn sort_key(&self) -> Option<(i64, i64)> {
        match self {
            Value::Integer(n) => Some((*n, 0)),
            Value::Year(y) => Some((i64::from(*y), 0)),
            Value::Date { year, month, day } => Some((i64::from(*year), i64::from(*month) * 100 + i64::from(*day))),
            _ => None,
        }
    }
}

/// One directed traversal of a predicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Hop {
    pub pred: PredId,
    /// Traverse object -> subject.
    pub inverse: bool,
}

impl Hop {
    pub fn forward(pred: PredId) -> Self {
        Self { pred, inverse: false }
    }

    pub fn backward(pred: PredId) -> Self {
        Self { pred, inverse: true }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: EntityId,
    pub predicate: PredId,
    pub object: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CompareOp {
    Eq,
    Gt,
    Lt,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "==",
            CompareOp::Gt => ">",
            CompareOp::Lt => "<",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "==" => Some(CompareOp::Eq),
            ">" => Some(CompareOp::Gt),
            "<" => Some(CompareOp::Lt),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SortDirection {
    Ascending,
    Descending,
}

/// Predicates with computed rather than stored semantics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VirtualPredicate {
    Compare(CompareOp),
    /// `rank` is 1-based.
    Ordinal {
        direction: SortDirection,
        rank: u32,
    },
}

impl VirtualPredicate {
    /// Relation string used when encoding a constraint's sub-path.
    pub fn relation_name(self) -> &'static str {
        match self {
            VirtualPredicate::Compare(CompareOp::Eq) => "cmp_eq",
            VirtualPredicate::Compare(CompareOp::Lt) => "cmp_lt",
            VirtualPredicate::Compare(CompareOp::Gt) => "cmp_gt",
            VirtualPredicate::Ordinal { direction: SortDirection::Ascending, .. } => "ord_asc",
            VirtualPredicate::Ordinal { direction: SortDirection::Descending, .. } => "ord_desc",
        }
    }

    /// Time comparison. A `Year` on either side compares at year precision.
    pub fn compare(op: CompareOp, lhs: &Value, rhs: &Value) -> bool {
        let key = |v: &Value, year_only: bool| match v {
            Value::Year(y) => Some((*y, 0, 0)),
            Value::Date { year, .. } if year_only => Some((*year, 0, 0)),
            Value::Date { year, month, day } => Some((*year, *month, *day)),
            _ => None,
        };
        let year_only = matches!(lhs, Value::Year(_)) || matches!(rhs, Value::Year(_));
        let (Some(a), Some(b)) = (key(lhs, year_only), key(rhs, year_only)) else {
            return false;
        };
        match op {
            CompareOp::Eq => a == b,
            CompareOp::Gt => a > b,
            CompareOp::Lt => a < b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntityInfo {
    pub name: String,
    pub aliases: Vec<String>,
    pub types: BTreeSet<String>,
}

/// One two-hop chain `start -first-> mid -second-> value`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TwoHop {
    pub first: Hop,
    pub mid: EntityId,
    pub second: Hop,
    pub value: Value,
}

pub const DEFAULT_TWO_HOP_LIMIT: usize = 10_000;

/// Immutable, fully indexed triple store.
///
/// Symbol ids follow the sorted order of names, so every enumeration is
/// independent of the order in which triples were loaded.
#[derive(Clone, Debug)]
pub struct TripleStore {
    entities: Vec<EntityInfo>,
    entity_ids: HashMap<String, EntityId>,
    predicates: Vec<String>,
    pred_ids: HashMap<String, PredId>,
    triples: Vec<Triple>,
    by_subject: Vec<Vec<(PredId, Value)>>,
    by_object: Vec<Vec<(PredId, EntityId)>>,
    type_labels: BTreeSet<String>,
    two_hop_limit: usize,
}

impl TripleStore {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_triples(&text)
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn predicate_count(&self) -> usize {
        self.predicates.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn entity(&self, name: &str) -> Option<EntityId> {
        self.entity_ids.get(name).copied()
    }

    pub fn predicate(&self, name: &str) -> Option<PredId> {
        self.pred_ids.get(name).copied()
    }

    pub fn entity_info(&self, id: EntityId) -> &EntityInfo {
        &self.entities[id.0 as usize]
    }

    pub fn entities(&self) -> impl Iterator<Item = (EntityId, &EntityInfo)> {
        self.entities.iter().enumerate().map(|(i, e)| (EntityId(i as u32), e))
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entities[id.0 as usize].name
    }

    pub fn predicate_name(&self, id: PredId) -> &str {
        &self.predicates[id.0 as usize]
    }

    pub fn type_labels(&self) -> &BTreeSet<String> {
        &self.type_labels
    }

    pub fn has_type(&self, id: EntityId, label: &str) -> bool {
        self.entities[id.0 as usize].types.contains(label)
    }

    pub fn two_hop_limit(&self) -> usize {
        self.two_hop_limit
    }

    pub fn set_two_hop_limit(&mut self, limit: usize) {
        self.two_hop_limit = limit;
    }

    pub fn is_registered(&self, id: EntityId) -> bool {
        (id.0 as usize) < self.entities.len()
    }

    fn check_entity(&self, id: EntityId) -> Result<()> {
        if !self.is_registered(id) {
            return Err(Error::invalid(format!("entity id {} is not registered", id.0)));
        }
        Ok(())
    }

    pub(crate) fn check_hop(&self, hop: Hop) -> Result<()> {
        if (hop.pred.0 as usize) >= self.predicates.len() {
            return Err(Error::invalid(format!("predicate id {} is not registered", hop.pred.0)));
        }
        Ok(())
    }

    /// Objects reached from `e` over `hop`, in value order.
    pub fn follow(&self, e: EntityId, hop: Hop) -> Vec<Value> {
        let i = e.0 as usize;
        if hop.inverse {
            let facts = &self.by_object[i];
            let lo = facts.partition_point(|(p, _)| *p < hop.pred);
            facts[lo..].iter().take_while(|(p, _)| *p == hop.pred).map(|(_, s)| Value::Entity(*s)).collect()
        } else {
            let facts = &self.by_subject[i];
            let lo = facts.partition_point(|(p, _)| *p < hop.pred);
            facts[lo..].iter().take_while(|(p, _)| *p == hop.pred).map(|(_, v)| v.clone()).collect()
        }
    }

    /// Every fact touching `e`: forward `(p, o)` and inverse `(p⁻¹, s)`,
    /// ordered by predicate, then direction, then value.
    pub fn one_hop(&self, e: EntityId) -> Result<Vec<(Hop, Value)>> {
        self.check_entity(e)?;
        let i = e.0 as usize;
        let mut out: Vec<(Hop, Value)> = self.by_subject[i]
            .iter()
            .map(|(p, v)| (Hop::forward(*p), v.clone()))
            .chain(self.by_object[i].iter().map(|(p, s)| (Hop::backward(*p), Value::Entity(*s))))
            .collect();
        out.sort();
        Ok(out)
    }

    /// Length-2 chains through entity midpoints that do not lead back to
    /// `e`, truncated at the store's two-hop limit in enumeration order.
    pub fn two_hop(&self, e: EntityId) -> Result<Vec<TwoHop>> {
        let first = self.one_hop(e)?;
        let mut out = Vec::new();
        for (h1, v1) in first {
            let Some(mid) = v1.as_entity() else { continue };
            for (h2, v2) in self.one_hop(mid)? {
                if v2 == Value::Entity(e) {
                    continue;
                }
                if out.len() == self.two_hop_limit {
                    return Ok(out);
                }
                out.push(TwoHop { first: h1, mid, second: h2, value: v2 });
            }
        }
        Ok(out)
    }

    /// Display string for a value; entities render as their names.
    pub fn render(&self, v: &Value) -> String {
        match v {
            Value::Entity(e) => self.entity_name(*e).to_string(),
            other => other.to_string(),
        }
    }

    pub fn render_hop(&self, hop: Hop) -> String {
        let name = self.predicate_name(hop.pred);
        if hop.inverse {
            format!("^{name}")
        } else {
            name.to_string()
        }
    }

    pub fn parse_hop(&self, s: &str) -> Option<Hop> {
        match s.strip_prefix('^') {
            Some(name) => self.predicate(name).map(Hop::backward),
            None => self.predicate(s).map(Hop::forward),
        }
    }
}

impl fmt::Display for Value {
    /// Entities print as `#id`; use [`TripleStore::render`] for names.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Entity(e) => write!(f, "#{}", e.0),
            Value::Text(s) => f.write_str(s),
            Value::Integer(n) => write!(f, "{n}"),
            Value::Year(y) => write!(f, "{y}"),
            Value::Date { year, month, day } => write!(f, "{year:04}-{month:02}-{day:02}"),
        }
    }
}

#[cfg(test)]
pub(crate) mod tests;
