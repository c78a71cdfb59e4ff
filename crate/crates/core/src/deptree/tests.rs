use std::collections::VecDeque;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub(crate) const MOVIES: &str = "# sent_id = movies\n\
1\twhat\t_\t_\t_\t_\t2\tdet\t_\t_\n\
2\tmovies\t_\t_\t_\t_\t5\tdobj\t_\t_\n\
3\tdid\t_\t_\t_\t_\t5\taux\t_\t_\n\
4\tDiana\t_\t_\t_\t_\t5\tnsubj\t_\t_\n\
5\tplay\t_\t_\t_\t_\t0\troot\t_\t_\n\
6\tin\t_\t_\t_\t_\t5\tprt\t_\t_\n\
7\t?\t_\t_\t_\t_\t5\tpunct\t_\t_\n";

fn movies() -> DepTree {
    parse_conllu(MOVIES).pop().unwrap().unwrap()
}

fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> DepTree {
    // random labeled tree: shuffle indices, attach each to an earlier one
    let mut order: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut heads = vec![0; n + 1];
    for k in 1..n {
        heads[order[k]] = order[rng.gen_range(0..k)];
    }
    let tokens = (1..=n)
        .map(|i| Token {
            index: i,
            form: format!("w{i}"),
            head: heads[i],
            deprel: ["nsubj", "dobj", "det", "amod", "prep"][rng.gen_range(0..5)].to_string(),
        })
        .collect();
    DepTree::new(tokens).unwrap()
}

fn bfs_path(tree: &DepTree, s: usize, t: usize) -> Vec<usize> {
    let n = tree.len();
    let mut adj = vec![Vec::new(); n + 1];
    for i in 1..=n {
        let h = tree.head(i);
        if h != 0 {
            adj[i].push(h);
            adj[h].push(i);
        }
    }
    let mut prev = vec![usize::MAX; n + 1];
    prev[s] = s;
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if prev[v] == usize::MAX {
                prev[v] = u;
                q.push_back(v);
            }
        }
    }
    let mut path = vec![t];
    while *path.last().unwrap() != s {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    path
}

#[test]
fn minimal_two_token_sentence() {
    let text = "1\twhat\t_\t_\t_\t_\t2\tdet\t_\t_\n2\tmovies\t_\t_\t_\t_\t0\troot\t_\t_\n";
    let tree = parse_conllu(text).pop().unwrap().unwrap();
    assert_eq!(tree.root(), 2);
    assert_eq!(tree.token(2).form, "movies");
    assert_eq!(tree.left_children(2), &[1]);
    assert!(tree.right_children(2).is_empty());
}

#[test]
fn self_head_is_cycle_error() {
    let text = "1\ta\t_\t_\t_\t_\t1\tdep\t_\t_\n2\tb\t_\t_\t_\t_\t0\troot\t_\t_\n";
    let err = parse_conllu(text).pop().unwrap().unwrap_err();
    assert!(err.to_string().contains("cycle"), "{err}");
    assert!(matches!(err, Error::Parse { line: 1, .. }));
}

#[test]
fn longer_cycle_zero_and_multi_root() {
    let cyc = "1\ta\t_\t_\t_\t_\t2\tdep\t_\t_\n2\tb\t_\t_\t_\t_\t1\tdep\t_\t_\n3\tc\t_\t_\t_\t_\t0\troot\t_\t_\n";
    assert!(parse_conllu(cyc)[0].is_err());
    let none = "1\ta\t_\t_\t_\t_\t2\tdep\t_\t_\n2\tb\t_\t_\t_\t_\t1\tdep\t_\t_\n";
    assert!(parse_conllu(none)[0].as_ref().unwrap_err().to_string().contains("root"));
    let two = "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n2\tb\t_\t_\t_\t_\t0\troot\t_\t_\n";
    assert!(parse_conllu(two)[0].as_ref().unwrap_err().to_string().contains("multiple roots"));
}

#[test]
fn bad_sentence_does_not_hide_others() {
    let text = format!("1\ta\t_\t_\t_\t_\tX\troot\t_\t_\n\n1\ta\t_\t_\n\n{MOVIES}\r\n1\tmultiword\t_\n");
    let out = parse_conllu(&text);
    assert_eq!(out.len(), 4);
    assert!(matches!(out[0], Err(Error::Parse { line: 1, .. })));
    assert!(matches!(out[1], Err(Error::Parse { line: 3, .. })));
    assert_eq!(out[2].as_ref().unwrap().len(), 7);
    assert!(out[3].is_err());
}

#[test]
fn crlf_and_multiword_lines() {
    let text = "# text = don't\r\n1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\r\n1\tdo\t_\t_\t_\t_\t0\troot\t_\t_\r\n1.1\tx\t_\t_\t_\t_\t_\t_\t_\t_\r\n2\tn't\t_\t_\t_\t_\t1\tneg\t_\t_\r\n";
    let tree = parse_conllu(text).pop().unwrap().unwrap();
    assert_eq!(tree.forms(), vec!["do", "n't"]);
}

#[test]
fn movies_tree_shape() {
    let t = movies();
    assert_eq!(t.len(), 7);
    assert_eq!(t.sent_id(), Some("movies"));
    assert_eq!(t.root(), 5);
    assert_eq!(t.left_children(5), &[2, 3, 4]);
    assert_eq!(t.right_children(5), &[6, 7]);
}

#[test]
fn sdp_answer_to_focus() {
    let t = movies();
    let p = t.sdp(t.answer_word(), 4).unwrap();
    assert_eq!(p.forms, vec!["what", "movies", "play", "Diana"]);
    let labels: Vec<&str> = p.labels.iter().map(|(l, _)| l.as_str()).collect();
    assert_eq!(labels, vec!["det", "dobj", "nsubj"]);
    assert_eq!(
        p.labels.iter().map(|(_, d)| *d).collect::<Vec<_>>(),
        vec![Direction::Up, Direction::Up, Direction::Down]
    );
    assert_eq!(p.to_string(), "what -det-> movies -dobj-> play -nsubj-> Diana");
    assert_eq!(p.token_sequence(), vec!["what", "det", "movies", "dobj", "play", "nsubj", "Diana"]);
}

#[test]
fn sdp_to_self_and_bad_index() {
    let t = movies();
    let p = t.sdp(3, 3).unwrap();
    assert_eq!(p.forms, vec!["did"]);
    assert!(p.labels.is_empty());
    assert!(t.sdp(0, 3).is_err());
    assert!(t.sdp(3, 8).is_err());
}

#[test]
fn depths() {
    let t = movies();
    assert_eq!(t.depth(1).unwrap(), 2);
    assert_eq!(t.depth(5).unwrap(), 0);
    assert!(t.depth(9).is_err());
    let chain = DepTree::from_columns(&["a", "b", "c", "d"], &[0, 1, 2, 3], &["root", "x", "x", "x"]).unwrap();
    assert_eq!(chain.depth(4).unwrap(), 3);
}

#[test]
fn answer_word_lexicon() {
    assert_eq!(movies().answer_word(), 1);
    let forms = ["who", "is", "the", "most", "popular", "American", "actor", "born", "in", "2000"];
    let heads = [2, 0, 7, 5, 7, 7, 2, 7, 10, 8];
    let t = DepTree::from_columns(&forms, &heads, &["x"; 10]).unwrap();
    assert_eq!(t.answer_word(), 1);
    let t = DepTree::from_columns(&["name", "the", "capital", "of", "France"], &[0, 3, 1, 5, 3], &["x"; 5]).unwrap();
    assert_eq!(t.answer_word(), 1);
    let t = DepTree::from_columns(&["and", "Where"], &[2, 0], &["cc", "root"]).unwrap();
    assert_eq!(t.answer_word(), 2);
}

#[test]
fn neighborhoods() {
    // root -> leaf link: nothing on either side
    let t = DepTree::from_columns(&["a", "b"], &[0, 1], &["root", "x"]).unwrap();
    assert!(t.edge_neighborhood(1, 2).unwrap().is_empty());
    // chain r -> a -> b -> c
    let chain = DepTree::from_columns(&["r", "a", "b", "c"], &[0, 1, 2, 3], &["root", "e1", "e2", "e3"]).unwrap();
    let nb = chain.edge_neighborhood(2, 3).unwrap();
    let e = |h: &str, r: &str, t: &str| DirectedEdge { head_form: h.into(), deprel: r.into(), tail_form: t.into() };
    assert_eq!(nb, vec![e("r", "e1", "a"), e("b", "e3", "c")]);
    // play -> movies in the question tree
    let m = movies();
    assert_eq!(m.edge_neighborhood(5, 2).unwrap(), vec![e("movies", "det", "what")]);
    assert!(m.edge_neighborhood(4, 2).is_err());
}

#[test]
fn random_trees_match_bfs_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..300 {
        let n = rng.gen_range(1..=9);
        let tree = random_tree(&mut rng, n);
        for s in 1..=n {
            assert_eq!(tree.depth(s).unwrap(), bfs_path(&tree, tree.root(), s).len() - 1);
            for t in 1..=n {
                let p = tree.sdp(s, t).unwrap();
                assert_eq!(p.nodes, bfs_path(&tree, s, t));
                let lca = tree.lca(s, t).unwrap();
                let expected = tree.depth(s).unwrap() + tree.depth(t).unwrap() - 2 * tree.depth(lca).unwrap();
                assert_eq!(p.edge_count(), expected);
                assert_eq!(tree.sdp(t, s).unwrap(), p.reversed());
            }
        }
    }
}

proptest! {
    #[test]
    fn head_link_is_incoming_neighbor_of_child_links(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, n);
        for node in tree.edge_tails().collect::<Vec<_>>() {
            let own = tree.edge(node).unwrap();
            for child in tree.children(node).collect::<Vec<_>>() {
                let nb = tree.edge_neighborhood(node, child).unwrap();
                prop_assert_eq!(&nb[0], &own);
            }
        }
    }

    #[test]
    fn bottom_up_order_puts_children_first(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, n);
        let order = tree.bottom_up_order();
        let pos: Vec<usize> = {
            let mut p = vec![0; n + 1];
            for (k, &i) in order.iter().enumerate() { p[i] = k; }
            p
        };
        for i in 1..=n {
            if tree.head(i) != 0 {
                prop_assert!(pos[i] < pos[tree.head(i)]);
            }
        }
    }
}
