use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::kb::{CompareOp, EntityId, SortDirection, TripleStore, Value};
use crate::numcore::cosine;
use crate::vectors::WordVectors;

pub const MAX_TYPE_LINKS: usize = 10;
const MAX_TYPE_SPAN: usize = 3;

/// Words that cannot carry a partial alias match on their own.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "and", "at", "by", "did", "do", "does", "for", "from", "in", "is", "of", "on", "the", "to", "was",
    "were", "with", "what", "who", "which", "where", "when",
];

/// Superlatives and the sort direction they select.
pub const SUPERLATIVES: &[(&str, SortDirection)] = &[
    ("largest", SortDirection::Descending),
    ("smallest", SortDirection::Ascending),
    ("highest", SortDirection::Descending),
    ("lowest", SortDirection::Ascending),
    ("latest", SortDirection::Descending),
    ("earliest", SortDirection::Ascending),
    ("first", SortDirection::Ascending),
    ("last", SortDirection::Descending),
    ("most", SortDirection::Descending),
    ("least", SortDirection::Ascending),
    ("biggest", SortDirection::Descending),
    ("oldest", SortDirection::Ascending),
    ("youngest", SortDirection::Descending),
    ("newest", SortDirection::Descending),
    ("longest", SortDirection::Descending),
    ("shortest", SortDirection::Ascending),
    ("best", SortDirection::Descending),
    ("worst", SortDirection::Ascending),
    ("fastest", SortDirection::Descending),
    ("slowest", SortDirection::Ascending),
];

pub const ORDINAL_WORDS: &[(&str, u32)] = &[
    ("second", 2),
    ("third", 3),
    ("fourth", 4),
    ("fifth", 5),
    ("sixth", 6),
    ("seventh", 7),
    ("eighth", 8),
    ("ninth", 9),
    ("tenth", 10),
];

/// Half-open token range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityLink {
    pub span: Span,
    pub entity: EntityId,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeLink {
    pub span: Span,
    pub label: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeLink {
    pub span: Span,
    pub op: CompareOp,
    pub value: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrdinalLink {
    pub span: Span,
    pub direction: SortDirection,
    pub rank: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FocusLinks {
    pub entities: Vec<EntityLink>,
    pub types: Vec<TypeLink>,
    pub times: Vec<TimeLink>,
    pub ordinals: Vec<OrdinalLink>,
}

impl FocusLinks {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.types.is_empty() && self.times.is_empty() && self.ordinals.is_empty()
    }

    /// Every linked span, in entity, type, time, ordinal order.
    pub fn spans(&self) -> Vec<Span> {
        self.entities
            .iter()
            .map(|l| l.span)
            .chain(self.types.iter().map(|l| l.span))
            .chain(self.times.iter().map(|l| l.span))
            .chain(self.ordinals.iter().map(|l| l.span))
            .collect()
    }
}

fn is_punct(token: &str) -> bool {
    !token.chars().any(char::is_alphanumeric)
}

fn normalize(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_lowercase).collect()
}

/// Every contiguous token run of every alias, mapped to the entities whose
/// aliases contain it.
#[derive(Clone, Debug, Default)]
pub struct AliasIndex {
    /// n-gram -> (entity, best score = n / alias length)
    grams: HashMap<Vec<String>, BTreeMap<EntityId, f64>>,
    max_len: usize,
}

impl AliasIndex {
    pub fn new(store: &TripleStore) -> Self {
        let mut index = AliasIndex::default();
        for (id, info) in store.entities() {
            for alias in &info.aliases {
                let toks = normalize(alias);
                let n = toks.len();
                index.max_len = index.max_len.max(n);
                for i in 0..n {
                    for j in i + 1..=n {
                        let gram = &toks[i..j];
                        let full = j - i == n;
                        if !full && gram.iter().all(|t| STOPWORDS.contains(&t.as_str()) || is_punct(t)) {
                            continue;
                        }
                        let score = (j - i) as f64 / n as f64;
                        let slot = index.grams.entry(gram.to_vec()).or_default().entry(id).or_insert(0.0);
                        if score > *slot {
                            *slot = score;
                        }
                    }
                }
            }
        }
        index
    }

    /// Longest-match linking: spans are taken longest first (then leftmost)
    /// and shorter overlapping matches are dropped. All entities matching a
    /// kept span are linked.
    pub fn link(&self, tokens: &[String]) -> Vec<EntityLink> {
        let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
        let mut matches: Vec<(Span, &BTreeMap<EntityId, f64>)> = Vec::new();
        for start in 0..lower.len() {
            for end in start + 1..=(start + self.max_len).min(lower.len()) {
                if is_punct(&lower[end - 1]) {
                    break;
                }
                if let Some(hit) = self.grams.get(&lower[start..end]) {
                    matches.push((Span::new(start, end), hit));
                }
            }
        }
        matches.sort_by_key(|(s, _)| (std::cmp::Reverse(s.len()), s.start));
        let mut kept: Vec<(Span, &BTreeMap<EntityId, f64>)> = Vec::new();
        for (span, hit) in matches {
            if kept.iter().all(|(k, _)| !k.overlaps(&span)) {
                kept.push((span, hit));
            }
        }
        kept.sort_by_key(|(s, _)| s.start);
        kept.into_iter()
            .flat_map(|(span, hit)| hit.iter().map(move |(e, score)| EntityLink { span, entity: *e, score: *score }))
            .collect()
    }
}

pub fn link_entities(tokens: &[String], store: &TripleStore) -> Vec<EntityLink> {
    AliasIndex::new(store).link(tokens)
}

/// Top type links by cosine between a span's mean word vector and a type
/// label's mean word vector. Spans of one to three non-punctuation tokens;
/// ties broken by span start, then label, then span end.
pub fn link_types<'a>(
    tokens: &[String],
    labels: impl IntoIterator<Item = &'a String>,
    words: &WordVectors,
) -> Vec<TypeLink> {
    let label_vecs: Vec<(&String, Vec<f64>)> = labels
        .into_iter()
        .filter_map(|l| words.mean(label_words(l).iter().map(String::as_str)).map(|v| (l, v)))
        .collect();
    let mut scored = Vec::new();
    for start in 0..tokens.len() {
        for end in start + 1..=(start + MAX_TYPE_SPAN).min(tokens.len()) {
            if is_punct(&tokens[end - 1]) {
                break;
            }
            let Some(v) = words.mean(tokens[start..end].iter().map(String::as_str)) else {
                continue;
            };
            for (label, lv) in &label_vecs {
                let score = cosine(&v, lv);
                if score.is_finite() {
                    scored.push(TypeLink { span: Span::new(start, end), label: (*label).clone(), score });
                }
            }
        }
    }
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.span.start.cmp(&b.span.start))
            .then_with(|| a.label.cmp(&b.label))
            .then(a.span.end.cmp(&b.span.end))
    });
    scored.truncate(MAX_TYPE_LINKS);
    scored
}

/// Words of a type label such as `tv_show` or `film.actor`.
pub(crate) fn label_words(label: &str) -> Vec<String> {
    label
        .split(|c: char| c == '_' || c == '.' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn parse_year(token: &str) -> Option<i32> {
    if token.len() != 4 || !token.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let y: i32 = token.parse().ok()?;
    (1000..=2999).contains(&y).then_some(y)
}

fn parse_range(token: &str) -> Option<(i32, i32)> {
    let (a, b) = token.split_once(['-', '–'])?;
    Some((parse_year(a)?, parse_year(b)?))
}

/// Years, `in/before/after YYYY` and year ranges. A range yields two links,
/// `> start-1` and `< end+1`, sharing the range span.
pub fn link_time(tokens: &[String]) -> Vec<TimeLink> {
    let mut out = Vec::new();
    let range_links = |out: &mut Vec<TimeLink>, span: Span, a: i32, b: i32| {
        if a > 1000 {
            out.push(TimeLink { span, op: CompareOp::Gt, value: Value::Year(a - 1) });
        }
        if b < 2999 {
            out.push(TimeLink { span, op: CompareOp::Lt, value: Value::Year(b + 1) });
        }
    };
    let mut i = 0;
    while i < tokens.len() {
        let t = tokens[i].as_str();
        if let Some((a, b)) = parse_range(t) {
            range_links(&mut out, Span::new(i, i + 1), a, b);
        } else if let Some(y) = parse_year(t) {
            let dash = tokens.get(i + 1).is_some_and(|d| d == "-" || d == "–");
            if let Some(b) = tokens.get(i + 2).filter(|_| dash).and_then(|t| parse_year(t)) {
                range_links(&mut out, Span::new(i, i + 3), y, b);
                i += 3;
                continue;
            }
            let prev = i.checked_sub(1).map(|p| tokens[p].to_lowercase());
            let op = match prev.as_deref() {
                Some("before") => CompareOp::Lt,
                Some("after") => CompareOp::Gt,
                _ => CompareOp::Eq,
            };
            out.push(TimeLink { span: Span::new(i, i + 1), op, value: Value::Year(y) });
        }
        i += 1;
    }
    out
}

fn ordinal_rank(token: &str) -> Option<u32> {
    if let Some((_, r)) = ORDINAL_WORDS.iter().find(|(w, _)| *w == token) {
        return Some(*r);
    }
    let digits = token
        .strip_suffix("st")
        .or_else(|| token.strip_suffix("nd"))
        .or_else(|| token.strip_suffix("rd"))
        .or_else(|| token.strip_suffix("th"))?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().filter(|r| *r >= 1)
}

/// Superlatives give rank 1; an ordinal word right before a superlative
/// sets the rank and joins the span.
pub fn link_ordinal(tokens: &[String]) -> Vec<OrdinalLink> {
    let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    let mut out = Vec::new();
    for (i, t) in lower.iter().enumerate() {
        let Some((_, direction)) = SUPERLATIVES.iter().find(|(w, _)| w == t) else {
            continue;
        };
        let prev = i.checked_sub(1).and_then(|p| ordinal_rank(&lower[p]).map(|r| (p, r)));
        let (start, rank) = prev.unwrap_or((i, 1));
        out.push(OrdinalLink { span: Span::new(start, i + 1), direction: *direction, rank });
    }
    out
}

/// Runs all four linkers.
pub fn link_all(tokens: &[String], aliases: &AliasIndex, store: &TripleStore, words: &WordVectors) -> FocusLinks {
    FocusLinks {
        entities: aliases.link(tokens),
        types: link_types(tokens, store.type_labels(), words),
        times: link_time(tokens),
        ordinals: link_ordinal(tokens),
    }
}
