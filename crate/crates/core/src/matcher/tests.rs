use proptest::prelude::*;

use super::train::batch_loss;
use super::*;
use crate::dataset::{parse_dataset, resolve_parses};
use crate::deptree::parse_conllu;
use crate::encoders::Dropout;
use crate::kb::EntityId;
use crate::numcore::{cosine, max_fd_rel_error};
use crate::pipeline::Linker;
use crate::qgraph::EntityLink;
use crate::qgraph::Span;
use crate::toy;

fn strs(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn movies_tree() -> DepTree {
    DepTree::from_columns(
        &["what", "movies", "did", "Diana", "play", "in"],
        &[2, 5, 5, 5, 0, 5],
        &["det", "obj", "aux", "nsubj", "root", "obl"],
    )
    .unwrap()
}

fn diana_links() -> FocusLinks {
    FocusLinks {
        entities: vec![EntityLink { span: Span::new(3, 4), entity: EntityId(0), score: 0.75 }],
        ..FocusLinks::default()
    }
}

fn tiny_vocabs() -> ModelVocabs {
    ModelVocabs {
        words: strs("what movies did play in located acted film"),
        relations: strs("acted_in located_in ^acted_in"),
        labels: strs("det obj aux nsubj root obl"),
        edges: strs("<unk> det obj nsubj play|obj|movies"),
        edge_dim: 3,
    }
}

fn tiny_model(flags: SyntaxFlags, seed: u64) -> Model {
    let config = ModelConfig { word_dim: 4, hidden: 2, tree_hidden: 2, pos_dim: 2, max_depth: 3, flags };
    Model::new(config, tiny_vocabs(), seed).unwrap()
}

const ALL: SyntaxFlags = SyntaxFlags { sdp: true, tpf: true, treegru: true };

fn row(model: &Model, table: &str, r: usize) -> Vec<f64> {
    model.params.get(model.params.id(table).unwrap()).row(r).to_vec()
}

#[test]
fn subpath_words_split_on_separators() {
    assert_eq!(subpath_words("located_in"), strs("located in"));
    assert_eq!(subpath_words("^acted_in..release_year"), strs("acted in release year"));
    assert_eq!(subpath_words("birth_date..cmp_eq"), strs("birth date cmp eq"));
    assert_eq!(subpath_words("type_actor"), strs("type actor"));
}

#[test]
fn subpath_is_id_row_plus_mean_word_row() {
    let m = tiny_model(SyntaxFlags::NONE, 3);
    let g = m.prepare_graph(&strs("located_in"), [0.0; 4]);
    let (rel, words) = &g.subpaths[0];
    assert_eq!(*rel, m.relation_row("located_in"));
    assert_eq!(words, &vec![m.word_row("located"), m.word_row("in")]);
    let mut tape = Tape::new(&m.params);
    let v = m.encode_subpath(&mut tape, *rel, words).unwrap();
    let id = row(&m, "E_sp", *rel);
    let a = row(&m, "E_w", words[0]);
    let b = row(&m, "E_w", words[1]);
    for k in 0..4 {
        let expect = id[k] + (a[k] + b[k]) / 2.0;
        assert!((tape.value(v).data()[k] - expect).abs() < 1e-15);
    }
}

#[test]
fn unknown_relation_falls_back_to_unk_rows() {
    let m = tiny_model(SyntaxFlags::NONE, 3);
    let g = m.prepare_graph(&strs("zzz_qqq"), [0.0; 4]);
    assert_eq!(g.subpaths[0], (0, vec![0, 0]));
    let mut tape = Tape::new(&m.params);
    let v = m.encode_subpath(&mut tape, 0, &[0, 0]).unwrap();
    let (sp, w) = (row(&m, "E_sp", 0), row(&m, "E_w", 0));
    let expect: Vec<f64> = sp.iter().zip(&w).map(|(a, b)| a + b).collect();
    assert_eq!(tape.value(v).data(), expect.as_slice());
    // single word: the mean is that word
    let g = m.prepare_graph(&strs("film"), [0.0; 4]);
    let mut tape = Tape::new(&m.params);
    let v = m.encode_subpath(&mut tape, g.subpaths[0].0, &g.subpaths[0].1).unwrap();
    let film = row(&m, "E_w", m.word_row("film"));
    let expect: Vec<f64> = sp.iter().zip(&film).map(|(a, b)| a + b).collect();
    assert_eq!(tape.value(v).data(), expect.as_slice());
}

#[test]
fn graph_vector_is_coordinatewise_max() {
    let m = tiny_model(SyntaxFlags::NONE, 5);
    let subs = strs("acted_in located_in ^acted_in");
    let g = m.prepare_graph(&subs, [0.0; 4]);
    let mut tape = Tape::new(&m.params);
    let p = m.encode_graph(&mut tape, &g).unwrap();
    let got = tape.value(p).data().to_vec();
    let mut expect = vec![f64::NEG_INFINITY; 4];
    for (rel, words) in &g.subpaths {
        let id = row(&m, "E_sp", *rel);
        for (k, e) in expect.iter_mut().enumerate() {
            let mean = words.iter().map(|&w| row(&m, "E_w", w)[k]).sum::<f64>() / words.len() as f64;
            *e = e.max(id[k] + mean);
        }
    }
    for (a, b) in got.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-15);
    }
    let reversed: Vec<String> = subs.iter().rev().cloned().collect();
    let g2 = m.prepare_graph(&reversed, [0.0; 4]);
    let p2 = m.encode_graph(&mut tape, &g2).unwrap();
    assert_eq!(tape.value(p2).data(), got.as_slice());
}

#[test]
fn semantic_score_is_cosine() {
    let m = tiny_model(SyntaxFlags::NONE, 5);
    let mut tape = Tape::new(&m.params);
    let q = tape.constant(Tensor::vector(vec![1.0, -2.0, 0.5, 3.0]));
    let par = tape.constant(Tensor::vector(vec![2.0, -4.0, 1.0, 6.0]));
    let anti = tape.constant(Tensor::vector(vec![-1.0, 2.0, -0.5, -3.0]));
    let other = tape.constant(Tensor::vector(vec![0.3, 0.1, -0.7, 2.0]));
    let s = m.score(&mut tape, q, par, [0.0; 4]).unwrap();
    assert!((tape.value(s).item() - 1.0).abs() < 1e-12);
    let s = m.score(&mut tape, q, anti, [0.0; 4]).unwrap();
    assert!((tape.value(s).item() + 1.0).abs() < 1e-12);
    let s = m.score(&mut tape, q, other, [0.0; 4]).unwrap();
    let (a, b) = ([1.0, -2.0, 0.5, 3.0], [0.3, 0.1, -0.7, 2.0]);
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((tape.value(s).item() - dot / (na * nb)).abs() < 1e-12);
    let short = tape.constant(Tensor::vector(vec![1.0, 2.0]));
    assert!(m.score(&mut tape, q, short, [0.0; 4]).is_err());
}

#[test]
fn total_score_examples() {
    let s = total_score(0.4, [0.9, 0.5, 1.0, 2.0], INITIAL_WEIGHTS).unwrap();
    assert_eq!(s.total, 0.4);
    assert_eq!(total_score(0.0, [0.0; 4], [0.3, -1.0, 2.0, 0.5, 1.5]).unwrap().total, 0.0);
    let w = [0.5, 2.0, -1.0, 0.25, 4.0];
    let s = total_score(0.4, [0.9, 0.5, 1.0, 2.0], w).unwrap();
    let hand = 0.5 * 0.4 + 2.0 * 0.9 - 1.0 * 0.5 + 0.25 * 1.0 + 4.0 * 2.0;
    assert!((s.total - hand).abs() < 1e-12);
    let err = total_score(0.1, [0.0, f64::NAN, 0.0, 0.0], w).unwrap_err();
    assert!(err.to_string().contains("constraints"), "{err}");
}

#[test]
fn features_of_a_graph() {
    let f = GraphFeatures { link_score: 0.5, constraints: 2, path_len: 2, answers: 9 };
    assert_eq!(f.values(), [0.5, 0.5, 1.0, 1.0]);
}

#[test]
fn hinge_examples() {
    assert!((hinge_loss(0.3, 0.1, 0.5) - 0.3).abs() < 1e-15);
    assert_eq!(hinge_loss(0.75, 0.25, 0.5), 0.0);
    assert_eq!(hinge_loss(2.0, 0.0, 0.5), 0.0);
    assert_eq!(DEFAULT_MARGIN, 0.5);
}

proptest! {
    #[test]
    fn hinge_matches_formula(pos in -3.0f64..3.0, neg in -3.0f64..3.0) {
        let l = hinge_loss(pos, neg, 0.5);
        prop_assert!(l >= 0.0);
        prop_assert_eq!(l == 0.0, pos >= neg + 0.5);
        let p = Params::new();
        let mut tape = Tape::new(&p);
        let a = tape.constant(Tensor::scalar(pos));
        let b = tape.constant(Tensor::scalar(neg));
        let v = hinge_var(&mut tape, a, b, 0.5).unwrap();
        prop_assert_eq!(tape.value(v).item(), l);
    }

    #[test]
    fn selection_ignores_constant_shift(xs in prop::collection::vec(-512i32..512, 1..20), c in -64i32..64) {
        let scores: Vec<f64> = xs.iter().map(|&x| x as f64 / 64.0).collect();
        let shifted: Vec<f64> = scores.iter().map(|s| s + c as f64).collect();
        prop_assert_eq!(select(&scores), select(&shifted));
    }
}

#[test]
fn select_prefers_first_on_ties() {
    assert_eq!(select(&[]), None);
    assert_eq!(select(&[0.5, 0.7, 0.7, 0.1]), Some(1));
}

#[test]
fn syntax_flags_round_trip() {
    for s in ["none", "sdp", "tpf", "treegru", "sdp,tpf", "sdp,treegru", "sdp,tpf,treegru"] {
        assert_eq!(s.parse::<SyntaxFlags>().unwrap().to_string(), s);
    }
    assert_eq!("".parse::<SyntaxFlags>().unwrap(), SyntaxFlags::NONE);
    assert_eq!("treegru, sdp".parse::<SyntaxFlags>().unwrap().to_string(), "sdp,treegru");
    assert!("elmo".parse::<SyntaxFlags>().is_err());
}

#[test]
fn only_enabled_encoders_get_parameters() {
    let que = tiny_model(SyntaxFlags::NONE, 1);
    let names: Vec<&str> = que.params.iter().map(|(_, n, _)| n).collect();
    assert!(names.iter().all(|n| !n.starts_with("sdp") && !n.starts_with("tree") && *n != "E_pos"));
    let all = tiny_model(ALL, 1);
    for n in ["E_label", "E_pos", "E_e", "tree.root_edge", "sdp.fwd.w_z", "tpf.bwd.u_h", "treegru.fwd.b_r"] {
        assert!(all.params.id(n).is_some(), "{n}");
    }
    assert_eq!(all.score_weights(), INITIAL_WEIGHTS);
}

fn tiny_prepared(model: &Model) -> Prepared {
    let q = model.prepare_question(&movies_tree(), &diana_links()).unwrap();
    let graphs = vec![
        model.prepare_graph(&strs("^acted_in"), [0.75, 0.0, 0.0, 0.3]),
        model.prepare_graph(&strs("located_in type_film"), [0.75, 0.25, 0.0, 0.6]),
        model.prepare_graph(&strs("acted_in..located_in"), [0.75, 0.0, 1.0, 0.1]),
    ];
    Prepared { id: "q".into(), question: q, graphs, f1: vec![1.0, 0.0, 0.2], positive: vec![true, false, false] }
}

#[test]
fn question_input_uses_anonymized_and_masked_tokens() {
    let m = tiny_model(ALL, 1);
    let q = m.prepare_question(&movies_tree(), &diana_links()).unwrap();
    let e = m.word_row(crate::encoders::ENTITY_TOKEN);
    assert_eq!(q.que[3], e);
    assert_eq!(q.tree_words[3], e);
    assert_eq!(q.depth_rows, vec![2, 1, 1, 1, 0, 1]);
    assert_eq!(q.edge_rows[4], None);
    assert_eq!(q.sdp.len(), 1);
    assert_eq!(q.sdp[0].len(), 7);
}

#[test]
fn batch_loss_matches_finite_differences() {
    let model = tiny_model(ALL, 9);
    let data = vec![tiny_prepared(&model)];
    let batch = [(0, 0, 1), (0, 0, 2)];
    let f = |params: &Params| -> Result<(f64, crate::numcore::Gradients)> {
        let mut m = model.clone();
        m.params = params.clone();
        let mut tape = Tape::new(&m.params);
        let loss = batch_loss(&m, &mut tape, &data, &batch, 5.0, &mut Dropout::Off)?;
        Ok((tape.value(loss).item(), tape.backward(loss)?))
    };
    let err = max_fd_rel_error(&model.params, 1e-5, f).unwrap();
    assert!(err <= 1e-4, "max relative error {err}");
}

struct ToyData {
    store: crate::kb::TripleStore,
    train: Vec<crate::pipeline::Example>,
    test: Vec<crate::pipeline::Example>,
    words: WordVectors,
}

fn toy_data() -> ToyData {
    let fx = toy::default_fixture();
    let store = fx.store().unwrap();
    let words = WordVectors::from_text(&fx.words).unwrap();
    let corpus: Vec<DepTree> = parse_conllu(&fx.conllu).into_iter().collect::<Result<_>>().unwrap();
    let load = |text: &str, store: &crate::kb::TripleStore| {
        let qs = parse_dataset(text).unwrap();
        let trees = resolve_parses(&qs, &corpus).unwrap();
        Linker::new(store, &words).examples(&qs, &trees).unwrap()
    };
    let train = load(&fx.train, &store);
    let test = load(&fx.test, &store);
    ToyData { store, train, test, words }
}

fn toy_model(d: &ToyData, seed: u64) -> Model {
    let vocabs = ModelVocabs::collect(&d.train, &d.store, &d.words, None);
    let mut m = Model::new(ModelConfig::toy(SyntaxFlags::NONE), vocabs, seed).unwrap();
    m.load_word_vectors(&d.words).unwrap();
    m
}

#[test]
fn zero_epochs_keep_initialization_and_seeds_reproduce() {
    let d = toy_data();
    let init = toy_model(&d, 4);
    let cfg = TrainConfig { epochs: 0, seed: 4, ..TrainConfig::default() };
    let out = train(init.clone(), &d.train[..10], &d.store, &cfg).unwrap();
    assert_eq!(out.model.params.to_text(), init.params.to_text());
    assert!(out.epoch_loss.is_empty());
    let cfg = TrainConfig { epochs: 2, seed: 4, ..TrainConfig::default() };
    let a = train(init.clone(), &d.train[..10], &d.store, &cfg).unwrap();
    let b = train(init.clone(), &d.train[..10], &d.store, &cfg).unwrap();
    assert_eq!(a.model.params.to_text(), b.model.params.to_text());
    assert_eq!(a.epoch_loss, b.epoch_loss);
    let c = train(init, &d.train[..10], &d.store, &TrainConfig { seed: 5, ..cfg }).unwrap();
    assert_ne!(a.model.params.to_text(), c.model.params.to_text());
}

#[test]
fn training_lowers_loss_and_rejects_empty_data() {
    let d = toy_data();
    let mut mean_first = 0.0;
    let mut mean_last = 0.0;
    for seed in [41, 42, 43] {
        let cfg = TrainConfig { epochs: 6, seed, ..TrainConfig::default() };
        let out = train(toy_model(&d, seed), &d.train, &d.store, &cfg).unwrap();
        mean_first += out.epoch_loss[0];
        mean_last += out.epoch_loss[5];
    }
    assert!(mean_last < mean_first, "{mean_last} vs {mean_first}");
    let mut none = d.train[..3].to_vec();
    for ex in &mut none {
        ex.candidates.retain(|c| !c.positive);
    }
    let err = train(toy_model(&d, 1), &none, &d.store, &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, Error::EmptyTraining(_)));
}

#[test]
fn evaluation_is_order_independent_and_handles_empty_candidates() {
    let d = toy_data();
    let m = toy_model(&d, 8);
    let r = evaluate(&m, &d.test, &d.store).unwrap();
    let mut rev = d.test.clone();
    rev.reverse();
    assert_eq!(evaluate(&m, &rev, &d.store).unwrap(), r);
    assert_eq!(r.overall.count, d.test.len());
    assert_eq!(r.by_length.iter().map(|(b, _)| *b).collect::<Vec<_>>(), LENGTH_BUCKETS);

    let mut empty = d.test.clone();
    for ex in &mut empty {
        ex.candidates.clear();
    }
    let r = evaluate(&m, &empty, &d.store).unwrap();
    assert_eq!(r.overall.mean_f1, 0.0);
    assert_eq!(r.overall.no_candidates, d.test.len());

    // keeping only the best candidate makes every pick perfect
    let mut perfect = d.test.clone();
    for ex in &mut perfect {
        ex.candidates.retain(|c| c.f1 == 1.0);
        ex.candidates.truncate(1);
    }
    assert_eq!(evaluate(&m, &perfect, &d.store).unwrap().overall.mean_f1, 1.0);
}

#[test]
fn length_buckets_follow_token_counts() {
    let tree = |n: usize| {
        let forms: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let forms: Vec<&str> = forms.iter().map(String::as_str).collect();
        let heads: Vec<usize> = (0..n).map(|i| if i == 0 { 0 } else { 1 }).collect();
        let rels: Vec<&str> = (0..n).map(|i| if i == 0 { "root" } else { "dep" }).collect();
        DepTree::from_columns(&forms, &heads, &rels).unwrap()
    };
    assert_eq!(length_bucket(&tree(3)), "SHORT");
    assert_eq!(length_bucket(&tree(4)), "SHORT");
    assert_eq!(length_bucket(&tree(5)), "MID");
    assert_eq!(length_bucket(&tree(7)), "MID");
    assert_eq!(length_bucket(&tree(8)), "LONG");
    let with_punct =
        DepTree::from_columns(&["who", "is", "it", "?"], &[2, 0, 2, 2], &["nsubj", "root", "obj", "punct"]).unwrap();
    assert_eq!(length_bucket(&with_punct), "SHORT");
    assert_eq!(wh_bucket(&with_punct), "who");
    assert_eq!(wh_bucket(&tree(3)), "other");
}

#[test]
fn report_rows_include_empty_buckets() {
    let r = EvalReport::from_results(vec![QuestionResult {
        id: "a".into(),
        candidates: 2,
        chosen: Some(0),
        score: Some(0.5),
        f1: 0.5,
        wh: "what".into(),
        length: "MID",
    }]);
    let tsv = r.by_length_tsv();
    assert!(tsv.contains("count\tLONG\t0\n"), "{tsv}");
    assert!(tsv.contains("mean_f1\tMID\t0.500000\n"), "{tsv}");
    assert!(r.overall_tsv().starts_with("metric\tbucket\tvalue\n"));
    assert!(r.by_type_tsv().contains("count\twhat\t1\n"));
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let m = tiny_model(ALL, 12);
    let cfg = TrainConfig { epochs: 3, seed: 12, margin: 0.25, ..TrainConfig::default() };
    save_checkpoint(&path, &m, &cfg).unwrap();
    let (loaded, manifest) = load_checkpoint(&path).unwrap();
    assert_eq!(loaded.params.to_text(), m.params.to_text());
    assert_eq!(manifest.train, cfg);
    assert_eq!(manifest.config, m.config);
    assert_eq!(manifest.vocabs, m.vocabs);
    let text = std::fs::read_to_string(manifest_path(&path)).unwrap();
    assert!(text.contains("flags = sdp,tpf,treegru\n"));
    assert_eq!(Manifest::from_text(&text).unwrap(), manifest);
    assert!(Manifest::from_text("format = other\n").is_err());
}

#[test]
fn scores_on_a_question_match_hand_cosines() {
    let m = tiny_model(ALL, 2);
    let p = tiny_prepared(&m);
    let scores = m.score_all(&p).unwrap();
    let mut tape = Tape::new(&m.params);
    let q = m.encode_question(&mut tape, &p.question, &mut Dropout::Off).unwrap();
    let qv = tape.value(q).data().to_vec();
    for (g, s) in p.graphs.iter().zip(&scores) {
        let gv = m.encode_graph(&mut tape, g).unwrap();
        let c = cosine(&qv, tape.value(gv).data());
        assert!((s.semantic() - c).abs() < 1e-12);
        assert_eq!(s.total, s.semantic());
    }
}
