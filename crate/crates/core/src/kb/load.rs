use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{EntityId, EntityInfo, PredId, Triple, TripleStore, Value, DEFAULT_TWO_HOP_LIMIT};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum RawValue {
    Entity(String),
    Other(Value),
}

/// Collects named facts, then assigns ids in sorted-name order.
#[derive(Clone, Debug, Default)]
pub struct TripleStoreBuilder {
    facts: BTreeSet<(String, String, RawValue)>,
    aliases: BTreeMap<String, Vec<String>>,
    types: BTreeMap<String, BTreeSet<String>>,
    entities: BTreeSet<String>,
}

impl TripleStoreBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity(&mut self, name: &str) -> &mut Self {
        self.entities.insert(name.to_string());
        self
    }

    pub fn fact_entity(&mut self, subject: &str, predicate: &str, object: &str) -> &mut Self {
        self.entities.insert(subject.to_string());
        self.entities.insert(object.to_string());
        self.facts.insert((subject.into(), predicate.into(), RawValue::Entity(object.into())));
        self
    }

    /// Non-entity object. Passing `Value::Entity` here is a logic error.
    pub fn fact_value(&mut self, subject: &str, predicate: &str, object: Value) -> &mut Self {
        debug_assert!(object.as_entity().is_none());
        self.entities.insert(subject.to_string());
        self.facts.insert((subject.into(), predicate.into(), RawValue::Other(object)));
        self
    }

    pub fn alias(&mut self, entity: &str, surface: &str) -> &mut Self {
        self.entities.insert(entity.to_string());
        let list = self.aliases.entry(entity.to_string()).or_default();
        if !list.iter().any(|a| a == surface) {
            list.push(surface.to_string());
        }
        self
    }

    pub fn type_label(&mut self, entity: &str, label: &str) -> &mut Self {
        self.entities.insert(entity.to_string());
        self.types.entry(entity.to_string()).or_default().insert(label.to_string());
        self
    }

    pub fn build(&self) -> TripleStore {
        let names: Vec<String> = self.entities.iter().cloned().collect();
        let entity_ids: HashMap<String, EntityId> =
            names.iter().enumerate().map(|(i, n)| (n.clone(), EntityId(i as u32))).collect();
        let preds: BTreeSet<&String> = self.facts.iter().map(|(_, p, _)| p).collect();
        let predicates: Vec<String> = preds.into_iter().cloned().collect();
        let pred_ids: HashMap<String, PredId> =
            predicates.iter().enumerate().map(|(i, n)| (n.clone(), PredId(i as u32))).collect();
        let entities: Vec<EntityInfo> = names
            .iter()
            .map(|n| {
                let aliases = match self.aliases.get(n) {
                    Some(a) if !a.is_empty() => a.clone(),
                    _ => vec![n.replace('_', " ")],
                };
                EntityInfo { name: n.clone(), aliases, types: self.types.get(n).cloned().unwrap_or_default() }
            })
            .collect();
        let mut triples: Vec<Triple> = self
            .facts
            .iter()
            .map(|(s, p, o)| Triple {
                subject: entity_ids[s],
                predicate: pred_ids[p],
                object: match o {
                    RawValue::Entity(e) => Value::Entity(entity_ids[e]),
                    RawValue::Other(v) => v.clone(),
                },
            })
            .collect();
        triples.sort();
        let mut by_subject = vec![Vec::new(); names.len()];
        let mut by_object = vec![Vec::new(); names.len()];
        for t in &triples {
            by_subject[t.subject.0 as usize].push((t.predicate, t.object.clone()));
            if let Value::Entity(o) = t.object {
                by_object[o.0 as usize].push((t.predicate, t.subject));
            }
        }
        for list in &mut by_subject {
            list.sort();
        }
        for list in &mut by_object {
            list.sort();
        }
        let type_labels = entities.iter().flat_map(|e| e.types.iter().cloned()).collect();
        TripleStore {
            entities,
            entity_ids,
            predicates,
            pred_ids,
            triples,
            by_subject,
            by_object,
            type_labels,
            two_hop_limit: DEFAULT_TWO_HOP_LIMIT,
        }
    }
}

fn parse_object(raw: &str, objtype: &str, line: usize) -> Result<RawValue> {
    let bad = |what: &str| Error::parse(line, format!("malformed {what} {raw:?}"));
    Ok(match objtype {
        "entity" => RawValue::Entity(raw.to_string()),
        "text" => RawValue::Other(Value::Text(raw.to_string())),
        "int" => RawValue::Other(Value::Integer(raw.parse().map_err(|_| bad("int"))?)),
        "year" => {
            let y: i32 = raw.parse().map_err(|_| bad("year"))?;
            if !(1000..=2999).contains(&y) {
                return Err(bad("year"));
            }
            RawValue::Other(Value::Year(y))
        }
        "date" => RawValue::Other(parse_date(raw).ok_or_else(|| bad("date"))?),
        other => return Err(Error::parse(line, format!("unknown object type {other:?}"))),
    })
}

/// `YYYY-MM-DD` with a real calendar day.
pub(crate) fn parse_date(raw: &str) -> Option<Value> {
    let mut parts = raw.split('-');
    let (y, m, d) = (parts.next()?, parts.next()?, parts.next()?);
    if parts.next().is_some() || y.len() != 4 || m.len() != 2 || d.len() != 2 {
        return None;
    }
    let (year, month, day): (i32, u8, u8) = (y.parse().ok()?, m.parse().ok()?, d.parse().ok()?);
    let leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    let days = match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if leap => 29,
        2 => 28,
        _ => return None,
    };
    if !(1000..=2999).contains(&year) || day == 0 || day > days {
        return None;
    }
    Some(Value::Date { year, month, day })
}

/// Parses the tab-separated triple format:
///
/// ```text
/// subject<TAB>predicate<TAB>object<TAB>objtype   (entity|text|int|year|date)
/// @alias<TAB>entity<TAB>surface
/// @type<TAB>entity<TAB>label
/// ```
///
/// Blank lines and `#` comments are ignored; duplicate facts collapse.
pub fn parse_triples(text: &str) -> Result<TripleStore> {
    let mut b = TripleStoreBuilder::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        match cols.as_slice() {
            ["@alias", entity, surface] => {
                b.alias(entity, surface);
            }
            ["@type", entity, label] => {
                b.type_label(entity, label);
            }
            [s, p, o, t] if !s.starts_with('@') => {
                if s.is_empty() || p.is_empty() {
                    return Err(Error::parse(line, "empty subject or predicate"));
                }
                if p.starts_with('^') || p.contains("..") {
                    return Err(Error::parse(line, format!("reserved predicate name {p:?}")));
                }
                match parse_object(o, t, line)? {
                    RawValue::Entity(e) => b.fact_entity(s, p, &e),
                    RawValue::Other(v) => b.fact_value(s, p, v),
                };
            }
            _ => return Err(Error::parse(line, "expected 4 tab-separated columns or an @alias/@type line")),
        }
    }
    Ok(b.build())
}
