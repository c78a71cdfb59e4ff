use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::qgraph::{Constraint, LinkRef, Node, QueryGraph};

pub(crate) const SMALL: &str = "\
Diana\tacted_in\tBlue_Harbor\tentity
Diana\tacted_in\tRed_Canyon\tentity
Marco\tacted_in\tBlue_Harbor\tentity
Blue_Harbor\trelease_year\t2005\tyear
Red_Canyon\trelease_year\t1999\tyear
Blue_Harbor\tdirected_by\tHugo\tentity
Red_Canyon\tdirected_by\tMira\tentity
Diana\tbirth_date\t1980-05-01\tdate
Marco\tbirth_date\t1975-02-11\tdate
Diana\tborn_in\tAvalon\tentity
Marco\tborn_in\tBrixby\tentity
Avalon\tpopulation\t500000\tint
Brixby\tpopulation\t90000\tint
@alias\tDiana\tDiana
@alias\tDiana\tDi
@type\tDiana\tactor
@type\tMarco\tactor
@type\tBlue_Harbor\tfilm
@type\tRed_Canyon\tfilm
";

pub(crate) fn small() -> TripleStore {
    parse_triples(SMALL).unwrap()
}

fn names(store: &TripleStore, values: &BTreeSet<Value>) -> Vec<String> {
    values.iter().map(|v| store.render(v)).collect()
}

fn hop(store: &TripleStore, s: &str) -> Hop {
    store.parse_hop(s).unwrap()
}

#[test]
fn ids_follow_sorted_names() {
    let s = small();
    let names: Vec<&str> = s.entities().map(|(_, i)| i.name.as_str()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert_eq!(s.entity_count(), 8);
    assert_eq!(s.predicate_count(), 6);
}

#[test]
fn aliases_and_default_alias() {
    let s = small();
    let diana = s.entity_info(s.entity("Diana").unwrap());
    assert_eq!(diana.aliases, vec!["Diana".to_string(), "Di".to_string()]);
    let bh = s.entity_info(s.entity("Blue_Harbor").unwrap());
    assert_eq!(bh.aliases, vec!["Blue Harbor".to_string()]);
    assert!(s.has_type(s.entity("Diana").unwrap(), "actor"));
    assert!(!s.has_type(s.entity("Diana").unwrap(), "film"));
}

#[test]
fn one_hop_lists_both_directions() {
    let s = small();
    let bh = s.entity("Blue_Harbor").unwrap();
    let facts: Vec<(String, String)> =
        s.one_hop(bh).unwrap().into_iter().map(|(h, v)| (s.render_hop(h), s.render(&v))).collect();
    assert!(facts.contains(&("^acted_in".into(), "Diana".into())));
    assert!(facts.contains(&("^acted_in".into(), "Marco".into())));
    assert!(facts.contains(&("directed_by".into(), "Hugo".into())));
    assert!(facts.contains(&("release_year".into(), "2005".into())));
    assert_eq!(facts.len(), 4);
}

#[test]
fn unregistered_entity_is_rejected() {
    let s = small();
    assert!(s.one_hop(EntityId(999)).is_err());
    assert!(s.two_hop(EntityId(999)).is_err());
}

#[test]
fn parse_errors_carry_line_numbers() {
    let err = parse_triples("a\tp\tb\tentity\nbad line\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    let err = parse_triples("a\tp\t3000\tyear\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }));
    let err = parse_triples("a\tp\t2001-02-29\tdate\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }));
    assert!(parse_triples("a\t^p\tb\tentity\n").is_err());
}

#[test]
fn compare_at_year_precision() {
    let d = Value::Date { year: 2000, month: 5, day: 1 };
    let y = Value::Year(2000);
    assert!(VirtualPredicate::compare(CompareOp::Eq, &d, &y));
    assert!(!VirtualPredicate::compare(CompareOp::Gt, &d, &y));
    assert!(VirtualPredicate::compare(CompareOp::Lt, &Value::Year(1999), &y));
    let d2 = Value::Date { year: 2000, month: 6, day: 1 };
    assert!(VirtualPredicate::compare(CompareOp::Gt, &d2, &d));
    assert!(!VirtualPredicate::compare(CompareOp::Eq, &Value::Integer(2000), &y));
}

#[test]
fn execute_main_path() {
    let s = small();
    let g = QueryGraph::new(s.entity("Diana").unwrap(), vec![hop(&s, "acted_in")], 0);
    assert_eq!(names(&s, &s.execute(&g).unwrap()), ["Blue_Harbor", "Red_Canyon"]);
    let g = QueryGraph::new(s.entity("Diana").unwrap(), vec![hop(&s, "acted_in"), hop(&s, "^acted_in")], 0);
    // co-stars, never the start entity
    assert_eq!(names(&s, &s.execute(&g).unwrap()), ["Marco"]);
}

#[test]
fn execute_constraints() {
    let s = small();
    let diana = s.entity("Diana").unwrap();
    let base = QueryGraph::new(diana, vec![hop(&s, "acted_in")], 0);
    let time = base.clone().with_constraint(
        Constraint::Time {
            node: Node::Answer,
            hop: hop(&s, "release_year"),
            op: CompareOp::Gt,
            value: Value::Year(2000),
        },
        LinkRef::Time(0),
    );
    assert_eq!(names(&s, &s.execute(&time).unwrap()), ["Blue_Harbor"]);
    let ent = base.clone().with_constraint(
        Constraint::Entity { node: Node::Answer, hop: hop(&s, "directed_by"), entity: s.entity("Mira").unwrap() },
        LinkRef::Entity(1),
    );
    assert_eq!(names(&s, &s.execute(&ent).unwrap()), ["Red_Canyon"]);
    let latest = base.clone().with_constraint(
        Constraint::Ordinal {
            node: Node::Answer,
            hop: hop(&s, "release_year"),
            direction: SortDirection::Descending,
            rank: 1,
        },
        LinkRef::Ordinal(0),
    );
    assert_eq!(names(&s, &s.execute(&latest).unwrap()), ["Blue_Harbor"]);
    let mut third = latest.clone();
    third.constraints[0] = Constraint::Ordinal {
        node: Node::Answer,
        hop: hop(&s, "release_year"),
        direction: SortDirection::Descending,
        rank: 3,
    };
    assert!(s.execute(&third).unwrap().is_empty());
    let typed = base.with_constraint(Constraint::Type { label: "actor".into() }, LinkRef::Type(0));
    assert!(s.execute(&typed).unwrap().is_empty());
}

#[test]
fn ordinal_on_mid_node_selects_one_mid() {
    let s = small();
    // Diana -acted_in-> film -directed_by-> director, earliest film only
    let g = QueryGraph::new(s.entity("Diana").unwrap(), vec![hop(&s, "acted_in"), hop(&s, "directed_by")], 0)
        .with_constraint(
            Constraint::Ordinal {
                node: Node::Mid,
                hop: hop(&s, "release_year"),
                direction: SortDirection::Ascending,
                rank: 1,
            },
            LinkRef::Ordinal(0),
        );
    assert_eq!(names(&s, &s.execute(&g).unwrap()), ["Mira"]);
}

#[test]
fn execute_rejects_bad_graphs() {
    let s = small();
    let diana = s.entity("Diana").unwrap();
    let acted = hop(&s, "acted_in");
    let mid = QueryGraph::new(diana, vec![acted], 0)
        .with_constraint(Constraint::Entity { node: Node::Mid, hop: acted, entity: diana }, LinkRef::Entity(0));
    assert!(s.execute(&mid).is_err());
    assert!(s.execute(&QueryGraph::new(EntityId(99), vec![acted], 0)).is_err());
    assert!(s.execute(&QueryGraph::new(diana, vec![], 0)).is_err());
    assert!(s.execute(&QueryGraph::new(diana, vec![acted; 3], 0)).is_err());
    assert!(s.execute(&QueryGraph::new(diana, vec![Hop::forward(PredId(77))], 0)).is_err());
    let unknown_type = QueryGraph::new(diana, vec![acted], 0)
        .with_constraint(Constraint::Type { label: "planet".into() }, LinkRef::Type(0));
    assert!(s.execute(&unknown_type).is_err());
}

/// Random store over `n` entities and `p` predicates with about `m` facts.
pub(crate) fn random_store_text(seed: u64, n: usize, p: usize, m: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    for _ in 0..m {
        let s = rng.gen_range(0..n);
        let pred = rng.gen_range(0..p);
        if rng.gen_bool(0.8) {
            lines.push(format!("e{s:02}\tp{pred}\te{:02}\tentity", rng.gen_range(0..n)));
        } else {
            lines.push(format!("e{s:02}\tp{pred}\t{}\tyear", rng.gen_range(1990..2010)));
        }
    }
    for e in 0..n {
        if rng.gen_bool(0.5) {
            lines.push(format!("@type\te{e:02}\tt{}", rng.gen_range(0..3)));
        }
    }
    lines.join("\n")
}

/// Naive two-hop enumeration straight from the triple list.
fn two_hop_oracle(store: &TripleStore, e: EntityId) -> BTreeSet<(Hop, EntityId, Hop, Value)> {
    let edges: Vec<(EntityId, Hop, Value)> = store
        .triples()
        .iter()
        .flat_map(|t| {
            let mut v = vec![(t.subject, Hop::forward(t.predicate), t.object.clone())];
            if let Value::Entity(o) = t.object {
                v.push((o, Hop::backward(t.predicate), Value::Entity(t.subject)));
            }
            v
        })
        .collect();
    let mut out = BTreeSet::new();
    for (s1, h1, v1) in &edges {
        if *s1 != e {
            continue;
        }
        let Some(mid) = v1.as_entity() else { continue };
        for (s2, h2, v2) in &edges {
            if *s2 == mid && *v2 != Value::Entity(e) {
                out.insert((*h1, mid, *h2, v2.clone()));
            }
        }
    }
    out
}

#[test]
fn two_hop_matches_naive_enumeration() {
    let store = parse_triples(&random_store_text(3, 60, 8, 200)).unwrap();
    for (e, _) in store.entities() {
        let got: BTreeSet<_> =
            store.two_hop(e).unwrap().into_iter().map(|t| (t.first, t.mid, t.second, t.value)).collect();
        assert_eq!(got, two_hop_oracle(&store, e), "entity {}", store.entity_name(e));
    }
}

#[test]
fn two_hop_truncates_at_limit() {
    let mut store = parse_triples(&random_store_text(4, 20, 3, 200)).unwrap();
    let (e, full) = store.entities().map(|(e, _)| (e, store.two_hop(e).unwrap())).max_by_key(|(_, v)| v.len()).unwrap();
    assert!(full.len() > 5);
    store.set_two_hop_limit(5);
    assert_eq!(store.two_hop(e).unwrap(), full[..5].to_vec());
}

#[test]
fn insertion_order_does_not_matter() {
    let text = random_store_text(5, 40, 5, 150);
    let a = parse_triples(&text).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
    let b = parse_triples(&lines.join("\n")).unwrap();
    assert_eq!(a.triples(), b.triples());
    for (e, _) in a.entities() {
        assert_eq!(a.entity_name(e), b.entity_name(e));
        assert_eq!(a.one_hop(e).unwrap(), b.one_hop(e).unwrap());
        assert_eq!(a.two_hop(e).unwrap(), b.two_hop(e).unwrap());
    }
}

fn arb_filter(store: &TripleStore, rng: &mut ChaCha8Rng) -> Constraint {
    let hops: Vec<Hop> =
        (0..store.predicate_count() as u32).flat_map(|p| [Hop::forward(PredId(p)), Hop::backward(PredId(p))]).collect();
    let h = hops[rng.gen_range(0..hops.len())];
    match rng.gen_range(0..3) {
        0 => Constraint::Entity {
            node: Node::Answer,
            hop: h,
            entity: EntityId(rng.gen_range(0..store.entity_count() as u32)),
        },
        1 => Constraint::Type { label: format!("t{}", rng.gen_range(0..3)) },
        _ => Constraint::Time {
            node: Node::Answer,
            hop: h,
            op: [CompareOp::Eq, CompareOp::Gt, CompareOp::Lt][rng.gen_range(0..3)],
            value: Value::Year(rng.gen_range(1990..2010)),
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Adding a filtering constraint never grows the answer set; with an
    /// ordinal present it never grows the cardinality.
    #[test]
    fn constraints_are_monotone(seed in 0u64..10_000, with_ordinal in any::<bool>()) {
        let store = parse_triples(&random_store_text(seed % 7, 25, 4, 120)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = EntityId(rng.gen_range(0..store.entity_count() as u32));
        let first = store.one_hop(e).unwrap();
        prop_assume!(!first.is_empty());
        let mut g = QueryGraph::new(e, vec![first[rng.gen_range(0..first.len())].0], 0);
        if with_ordinal {
            g = g.with_constraint(
                Constraint::Ordinal {
                    node: Node::Answer,
                    hop: Hop::forward(PredId(rng.gen_range(0..store.predicate_count() as u32))),
                    direction: SortDirection::Descending,
                    rank: rng.gen_range(1..3),
                },
                LinkRef::Ordinal(0),
            );
        }
        let mut prev = store.execute(&g).unwrap();
        for i in 0..3 {
            g = g.with_constraint(arb_filter(&store, &mut rng), LinkRef::Entity(i + 1));
            let next = store.execute(&g).unwrap();
            if with_ordinal {
                prop_assert!(next.len() <= prev.len());
            } else {
                prop_assert!(next.is_subset(&prev));
            }
            prev = next;
        }
    }
}
