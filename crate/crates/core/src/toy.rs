//! Generator for the small movie-domain fixture used by tests and demos:
//! a triple store, 80 template questions with dependency parses and gold
//! answers, and clustered random word vectors.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{write_dataset, Question};
use crate::deptree::{write_conllu, DepTree};
use crate::error::{Error, Result};
use crate::kb::{parse_triples, CompareOp, Hop, SortDirection, TripleStore, Value};
use crate::numcore::Tensor;
use crate::qgraph::{Constraint, LinkRef, Node, QueryGraph};
use crate::vectors::write_vectors;

pub const TOY_SEED: u64 = 7;
pub const TOY_WORD_DIM: usize = 32;
pub const TOY_QUESTIONS: usize = 80;
pub const TOY_TRAIN: usize = 60;

const ACTORS: [&str; 12] =
    ["Diana", "Marco", "Lena", "Omar", "Priya", "Tomas", "Keiko", "Rafael", "Sofia", "Yusuf", "Ingrid", "Felix"];
const DIRECTORS: [&str; 6] = ["Hugo", "Mira", "Anton", "Clara", "Viktor", "Nadia"];
const FILMS: [&str; 16] = [
    "Blue_Harbor",
    "Silent_River",
    "Iron_Garden",
    "Paper_Moon",
    "Golden_Field",
    "Broken_Clock",
    "Winter_Road",
    "Glass_Tower",
    "Red_Canyon",
    "Quiet_Storm",
    "Hidden_Shore",
    "Velvet_Night",
    "Crimson_Sky",
    "Lost_Valley",
    "Bright_Lantern",
    "Stone_Bridge",
];
const CITIES: [&str; 12] = [
    "Avalon",
    "Brixby",
    "Corvel",
    "Dunmore",
    "Elsworth",
    "Fairholm",
    "Glenrock",
    "Harrow",
    "Ivybridge",
    "Quillon",
    "Kestrel",
    "Lindell",
];
const COUNTRIES: [&str; 4] = ["Norland", "Estavia", "Morvania", "Sudria"];
const GENRES: [&str; 4] = ["Drama", "Comedy", "Thriller", "Western"];

/// Word groups sharing a base vector.
const CLUSTERS: &[&[&str]] = &[
    &["film", "films", "movie", "movies"],
    &["actor", "actors", "starred", "play", "acted"],
    &["directed", "direct", "director"],
    &["born", "birth", "where"],
    &["country", "located", "nationality"],
    &["city", "cities", "capital"],
    &["released", "release", "year", "when"],
    &["largest", "population", "biggest"],
    &["youngest", "date", "oldest"],
    &["genre", "kind"],
];

const EXTRA_WORDS: &[&str] = &["in", "by", "of", "type", "cmp", "eq", "lt", "gt", "ord", "asc", "desc", "person"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Actor,
    Director,
    Person,
    Film,
    City,
    Country,
    Year,
}

impl Slot {
    fn parse(s: &str) -> Option<Slot> {
        Some(match s {
            "{actor}" => Slot::Actor,
            "{director}" => Slot::Director,
            "{person}" => Slot::Person,
            "{film}" => Slot::Film,
            "{city}" => Slot::City,
            "{country}" => Slot::Country,
            "{year}" => Slot::Year,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug)]
enum Extra {
    None,
    TimeEq,
    Ordinal(&'static str, SortDirection, u32),
    EntityAnswer(&'static str),
}

struct Template {
    words: &'static [(&'static str, usize, &'static str)],
    path: &'static [&'static str],
    extra: Extra,
}

const TEMPLATES: &[Template] = &[
    Template {
        words: &[
            ("what", 2, "det"),
            ("movies", 5, "dobj"),
            ("did", 5, "aux"),
            ("{actor}", 5, "nsubj"),
            ("play", 0, "root"),
            ("in", 5, "prt"),
        ],
        path: &["acted_in"],
        extra: Extra::None,
    },
    Template {
        words: &[("who", 2, "nsubj"), ("directed", 0, "root"), ("{film}", 2, "dobj")],
        path: &["directed_by"],
        extra: Extra::None,
    },
    Template {
        words: &[("where", 4, "advmod"), ("was", 4, "auxpass"), ("{person}", 4, "nsubjpass"), ("born", 0, "root")],
        path: &["born_in"],
        extra: Extra::None,
    },
    Template {
        words: &[
            ("what", 2, "det"),
            ("country", 0, "root"),
            ("is", 2, "cop"),
            ("{city}", 2, "nsubj"),
            ("in", 2, "case"),
        ],
        path: &["located_in"],
        extra: Extra::None,
    },
    Template {
        words: &[("when", 4, "advmod"), ("was", 4, "auxpass"), ("{film}", 4, "nsubjpass"), ("released", 0, "root")],
        path: &["release_year"],
        extra: Extra::None,
    },
    Template {
        words: &[("who", 2, "nsubj"), ("starred", 0, "root"), ("in", 4, "case"), ("{film}", 2, "obl")],
        path: &["^acted_in"],
        extra: Extra::None,
    },
    Template {
        words: &[
            ("which", 2, "det"),
            ("country", 5, "obl"),
            ("was", 5, "auxpass"),
            ("{person}", 5, "nsubjpass"),
            ("born", 0, "root"),
            ("in", 2, "case"),
        ],
        path: &["born_in", "located_in"],
        extra: Extra::None,
    },
    Template {
        words: &[
            ("what", 2, "det"),
            ("films", 5, "dobj"),
            ("did", 5, "aux"),
            ("{director}", 5, "nsubj"),
            ("direct", 0, "root"),
        ],
        path: &["^directed_by"],
        extra: Extra::None,
    },
    Template {
        words: &[
            ("what", 2, "det"),
            ("movies", 5, "dobj"),
            ("did", 5, "aux"),
            ("{actor}", 5, "nsubj"),
            ("play", 0, "root"),
            ("in", 7, "case"),
            ("{year}", 5, "obl"),
        ],
        path: &["acted_in"],
        extra: Extra::TimeEq,
    },
    Template {
        words: &[
            ("what", 5, "nsubj"),
            ("is", 5, "cop"),
            ("the", 5, "det"),
            ("largest", 5, "amod"),
            ("city", 0, "root"),
            ("in", 7, "case"),
            ("{country}", 5, "nmod"),
        ],
        path: &["^located_in"],
        extra: Extra::Ordinal("population", SortDirection::Descending, 1),
    },
    Template {
        words: &[
            ("what", 6, "nsubj"),
            ("is", 6, "cop"),
            ("the", 6, "det"),
            ("second", 5, "advmod"),
            ("largest", 6, "amod"),
            ("city", 0, "root"),
            ("in", 8, "case"),
            ("{country}", 6, "nmod"),
        ],
        path: &["^located_in"],
        extra: Extra::Ordinal("population", SortDirection::Descending, 2),
    },
    Template {
        words: &[
            ("which", 2, "det"),
            ("actor", 6, "nsubjpass"),
            ("in", 4, "case"),
            ("{film}", 2, "nmod"),
            ("was", 6, "auxpass"),
            ("born", 0, "root"),
            ("in", 8, "case"),
            ("{city}", 6, "obl"),
        ],
        path: &["^acted_in"],
        extra: Extra::EntityAnswer("born_in"),
    },
    Template {
        words: &[
            ("what", 0, "root"),
            ("was", 1, "cop"),
            ("the", 5, "det"),
            ("latest", 5, "amod"),
            ("movie", 1, "nsubj"),
            ("of", 7, "case"),
            ("{actor}", 5, "nmod"),
        ],
        path: &["acted_in"],
        extra: Extra::Ordinal("release_year", SortDirection::Descending, 1),
    },
    Template {
        words: &[
            ("who", 5, "nsubj"),
            ("is", 5, "cop"),
            ("the", 5, "det"),
            ("youngest", 5, "amod"),
            ("actor", 0, "root"),
            ("in", 7, "case"),
            ("{film}", 5, "nmod"),
        ],
        path: &["^acted_in"],
        extra: Extra::Ordinal("birth_date", SortDirection::Descending, 1),
    },
    Template {
        words: &[
            ("who", 2, "nsubj"),
            ("directed", 0, "root"),
            ("the", 4, "det"),
            ("movies", 2, "dobj"),
            ("{actor}", 6, "nsubj"),
            ("starred", 4, "acl:relcl"),
            ("in", 6, "prt"),
        ],
        path: &["acted_in", "directed_by"],
        extra: Extra::None,
    },
    Template {
        words: &[("what", 2, "det"), ("genre", 0, "root"), ("is", 2, "cop"), ("{film}", 2, "nsubj")],
        path: &["genre"],
        extra: Extra::None,
    },
];

/// Text artifacts of the toy fixture.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToyFixture {
    pub triples: String,
    pub conllu: String,
    pub train: String,
    pub test: String,
    pub words: String,
}

pub const FIXTURE_FILES: [&str; 5] = ["triples.tsv", "questions.conllu", "train.tsv", "test.tsv", "words.vec"];

impl ToyFixture {
    pub fn store(&self) -> Result<TripleStore> {
        parse_triples(&self.triples)
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let texts = [&self.triples, &self.conllu, &self.train, &self.test, &self.words];
        for (name, text) in FIXTURE_FILES.iter().zip(texts) {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn triples_text(rng: &mut ChaCha8Rng) -> String {
    let mut lines = Vec::new();
    let mut fact = |s: &str, p: &str, o: String, t: &str| lines.push(format!("{s}\t{p}\t{o}\t{t}"));
    let mut years: Vec<i32> = (1980..=2020).collect();
    years.shuffle(rng);
    for (i, film) in FILMS.iter().enumerate() {
        let mut cast = vec![ACTORS[i % ACTORS.len()]];
        while cast.len() < 3 {
            let a = ACTORS[rng.gen_range(0..ACTORS.len())];
            if !cast.contains(&a) {
                cast.push(a);
            }
        }
        for a in cast {
            fact(a, "acted_in", film.to_string(), "entity");
        }
        let director = if i < DIRECTORS.len() { DIRECTORS[i] } else { DIRECTORS[rng.gen_range(0..DIRECTORS.len())] };
        fact(film, "directed_by", director.to_string(), "entity");
        fact(film, "release_year", years[i].to_string(), "year");
        fact(film, "genre", GENRES[rng.gen_range(0..GENRES.len())].to_string(), "entity");
    }
    let mut birth_years: Vec<i32> = (1940..=1999).collect();
    birth_years.shuffle(rng);
    for (i, p) in ACTORS.iter().chain(DIRECTORS.iter()).enumerate() {
        fact(p, "born_in", CITIES[rng.gen_range(0..CITIES.len())].to_string(), "entity");
        let (m, d) = (rng.gen_range(1..=12), rng.gen_range(1..=28));
        fact(p, "birth_date", format!("{:04}-{m:02}-{d:02}", birth_years[i]), "date");
        fact(p, "nationality", COUNTRIES[rng.gen_range(0..COUNTRIES.len())].to_string(), "entity");
    }
    let mut pops: BTreeSet<i64> = BTreeSet::new();
    while pops.len() < CITIES.len() {
        pops.insert(rng.gen_range(10_000..2_000_000));
    }
    let mut pops: Vec<i64> = pops.into_iter().collect();
    pops.shuffle(rng);
    for (i, c) in CITIES.iter().enumerate() {
        fact(c, "located_in", COUNTRIES[i % COUNTRIES.len()].to_string(), "entity");
        fact(c, "population", pops[i].to_string(), "int");
    }
    for (k, country) in COUNTRIES.iter().enumerate() {
        fact(country, "capital", CITIES[k].to_string(), "entity");
    }
    let typed: [(&[&str], &str); 6] = [
        (&ACTORS, "actor"),
        (&DIRECTORS, "director"),
        (&FILMS, "film"),
        (&CITIES, "city"),
        (&COUNTRIES, "country"),
        (&GENRES, "genre"),
    ];
    for (names, label) in typed {
        for n in names {
            lines.push(format!("@type\t{n}\t{label}"));
        }
    }
    let mut out = String::from("# toy movie knowledge base\n");
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

/// Expands slots into (possibly multiword) names. Leading name tokens
/// attach to the last one as `compound`.
fn expand(words: &[(&str, usize, &str)], fills: &[Vec<String>]) -> Result<DepTree> {
    let mut spans = Vec::with_capacity(words.len());
    let mut next = 1;
    let mut slot = 0;
    for (form, _, _) in words {
        let n = if Slot::parse(form).is_some() {
            slot += 1;
            fills[slot - 1].len()
        } else {
            1
        };
        spans.push((next, next + n - 1));
        next += n;
    }
    let (mut forms, mut heads, mut rels) = (Vec::new(), Vec::new(), Vec::new());
    let mut slot = 0;
    for (i, (form, head, rel)) in words.iter().enumerate() {
        let main_head = if *head == 0 { 0 } else { spans[head - 1].1 };
        let toks: Vec<String> = if Slot::parse(form).is_some() {
            slot += 1;
            fills[slot - 1].clone()
        } else {
            vec![form.to_string()]
        };
        let last = spans[i].1;
        for (k, t) in toks.iter().enumerate() {
            forms.push(t.clone());
            if k + 1 == toks.len() {
                heads.push(main_head);
                rels.push(rel.to_string());
            } else {
                heads.push(last);
                rels.push("compound".to_string());
            }
        }
    }
    let f: Vec<&str> = forms.iter().map(String::as_str).collect();
    let r: Vec<&str> = rels.iter().map(String::as_str).collect();
    DepTree::from_columns(&f, &heads, &r)
}

fn pick(slot: Slot, rng: &mut ChaCha8Rng, store: &TripleStore) -> String {
    let from = |names: &[&str], rng: &mut ChaCha8Rng| names[rng.gen_range(0..names.len())].to_string();
    match slot {
        Slot::Actor => from(&ACTORS, rng),
        Slot::Director => from(&DIRECTORS, rng),
        Slot::Person => {
            let all: Vec<&str> = ACTORS.iter().chain(DIRECTORS.iter()).copied().collect();
            from(&all, rng)
        }
        Slot::Film => from(&FILMS, rng),
        Slot::City => from(&CITIES, rng),
        Slot::Country => from(&COUNTRIES, rng),
        Slot::Year => {
            let p = store.predicate("release_year").expect("toy store has release_year");
            let years: BTreeSet<String> =
                store.triples().iter().filter(|t| t.predicate == p).map(|t| t.object.to_string()).collect();
            let years: Vec<String> = years.into_iter().collect();
            years[rng.gen_range(0..years.len())].clone()
        }
    }
}

fn intended(t: &Template, fills: &[(Slot, String)], store: &TripleStore) -> Result<QueryGraph> {
    let hop = |s: &str| store.parse_hop(s).ok_or_else(|| Error::invalid(format!("toy predicate {s:?}")));
    let ent = |s: &str| store.entity(s).ok_or_else(|| Error::invalid(format!("toy entity {s:?}")));
    let path = t.path.iter().map(|p| hop(p)).collect::<Result<Vec<Hop>>>()?;
    let g = QueryGraph::new(ent(&fills[0].1)?, path, 0);
    Ok(match t.extra {
        Extra::None => g,
        Extra::TimeEq => {
            let year: i32 = fills[1].1.parse().map_err(|_| Error::invalid("toy year"))?;
            g.with_constraint(
                Constraint::Time {
                    node: Node::Answer,
                    hop: hop("release_year")?,
                    op: CompareOp::Eq,
                    value: Value::Year(year),
                },
                LinkRef::Time(0),
            )
        }
        Extra::Ordinal(p, direction, rank) => g.with_constraint(
            Constraint::Ordinal { node: Node::Answer, hop: hop(p)?, direction, rank },
            LinkRef::Ordinal(0),
        ),
        Extra::EntityAnswer(p) => g.with_constraint(
            Constraint::Entity { node: Node::Answer, hop: hop(p)?, entity: ent(&fills[1].1)? },
            LinkRef::Entity(1),
        ),
    })
}

fn word_vectors(vocab: &BTreeSet<String>, dim: usize, rng: &mut ChaCha8Rng) -> Result<String> {
    let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect() };
    let bases: Vec<Vec<f64>> = CLUSTERS.iter().map(|_| sample(rng)).collect();
    let keys: Vec<String> = vocab.iter().cloned().collect();
    let mut table = Tensor::zeros(&[keys.len(), dim])?;
    for (i, k) in keys.iter().enumerate() {
        let noise = sample(rng);
        let row = table.row_mut(i);
        match CLUSTERS.iter().position(|c| c.contains(&k.as_str())) {
            Some(c) => row.iter_mut().zip(bases[c].iter().zip(&noise)).for_each(|(r, (b, n))| *r = b + 0.4 * n),
            None => row.copy_from_slice(&noise),
        }
    }
    Ok(write_vectors(&keys, &table))
}

/// Builds the fixture deterministically from `seed`.
pub fn build(seed: u64, word_dim: usize) -> Result<ToyFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triples = triples_text(&mut rng);
    let store = parse_triples(&triples)?;
    let mut trees = Vec::new();
    let mut questions = Vec::new();
    for q in 0..TOY_QUESTIONS {
        let t = &TEMPLATES[q % TEMPLATES.len()];
        let slots: Vec<Slot> = t.words.iter().filter_map(|(f, _, _)| Slot::parse(f)).collect();
        let mut found = None;
        for _ in 0..1000 {
            let mut fills: Vec<(Slot, String)> = slots.iter().map(|s| (*s, pick(*s, &mut rng, &store))).collect();
            if q == 0 {
                fills[0].1 = "Diana".to_string();
            }
            let gold = store.execute(&intended(t, &fills, &store)?)?;
            if !gold.is_empty() {
                found = Some((fills, gold));
                break;
            }
        }
        let (fills, gold) = found.ok_or_else(|| Error::invalid(format!("toy question {q} has no answerable fill")))?;
        let words: Vec<Vec<String>> = fills.iter().map(|(_, n)| n.split('_').map(String::from).collect()).collect();
        let id = format!("q{:03}", q + 1);
        let tree = expand(t.words, &words)?.with_sent_id(Some(id.clone()));
        questions.push(Question {
            id: id.clone(),
            text: tree.forms().join(" "),
            parse_ref: id,
            answers: gold.iter().map(|v| store.render(v)).collect(),
        });
        trees.push(tree);
    }
    let mut vocab: BTreeSet<String> = BTreeSet::new();
    for tree in &trees {
        vocab.extend(tree.forms().iter().map(|f| f.to_lowercase()));
    }
    for (_, info) in store.entities() {
        vocab.extend(info.name.split('_').map(str::to_lowercase));
        vocab.extend(info.types.iter().cloned());
    }
    for t in store.triples() {
        vocab.extend(store.predicate_name(t.predicate).split('_').map(String::from));
    }
    vocab.extend(CLUSTERS.iter().flat_map(|c| c.iter()).map(|w| w.to_string()));
    vocab.extend(EXTRA_WORDS.iter().map(|w| w.to_string()));
    let words = word_vectors(&vocab, word_dim, &mut rng)?;
    Ok(ToyFixture {
        triples,
        conllu: write_conllu(&trees),
        train: write_dataset(&questions[..TOY_TRAIN]),
        test: write_dataset(&questions[TOY_TRAIN..]),
        words,
    })
}

/// The fixture at the default seed and dimension.
pub fn default_fixture() -> ToyFixture {
    build(TOY_SEED, TOY_WORD_DIM).expect("default toy fixture builds")
}
