use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy").join(name)
}

fn synkbqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synkbqa")).args(args).output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Common input flags for the shipped toy fixture.
fn inputs(dataset: &str) -> Vec<String> {
    [
        ("--triples", fixture("triples.tsv")),
        ("--conllu", fixture("questions.conllu")),
        ("--word-emb", fixture("words.vec")),
        ("--dataset", fixture(dataset)),
    ]
    .into_iter()
    .flat_map(|(k, v)| [k.to_string(), v.to_str().unwrap().to_string()])
    .collect()
}

fn run(cmd: &str, extra: &[&str], dataset: &str) -> Output {
    let mut args: Vec<String> = vec![cmd.to_string()];
    args.extend(inputs(dataset));
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    synkbqa(&refs)
}

fn train_que(dir: &Path, epochs: &str) -> PathBuf {
    let ckpt = dir.join("que.ckpt");
    let out = run("train", &["--checkpoint", p(&ckpt), "--epochs", epochs, "--seed", "42"], "train.tsv");
    assert!(out.status.success(), "{}", text(&out.stderr));
    ckpt
}

#[test]
fn no_subcommand_is_a_usage_error() {
    assert_eq!(synkbqa(&[]).status.code(), Some(2));
    assert_eq!(synkbqa(&["train", "--epochs", "many"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_a_usage_error() {
    let out = synkbqa(&["train", "--triples", "/nonexistent/triples.tsv", "--checkpoint", "/tmp/x.ckpt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("error:"));
}

#[test]
fn treegru_without_edge_vectors_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("m.ckpt");
    let out = run("train", &["--checkpoint", p(&ckpt), "--flags", "treegru"], "train.tsv");
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("edge-emb"));
}

#[test]
fn unreachable_gold_answers_leave_nothing_to_train() {
    let dir = tempfile::tempdir().unwrap();
    let original = std::fs::read_to_string(fixture("train.tsv")).unwrap();
    let unreachable: String = original
        .lines()
        .map(|l| {
            let cols: Vec<&str> = l.split('\t').collect();
            format!("{}\t{}\t{}\tNobody_Knows\n", cols[0], cols[1], cols[2])
        })
        .collect();
    let dataset = dir.path().join("nobody.tsv");
    std::fs::write(&dataset, unreachable).unwrap();
    let ckpt = dir.path().join("m.ckpt");
    let out = synkbqa(&[
        "train",
        "--triples",
        p(&fixture("triples.tsv")),
        "--conllu",
        p(&fixture("questions.conllu")),
        "--word-emb",
        p(&fixture("words.vec")),
        "--dataset",
        p(&dataset),
        "--checkpoint",
        p(&ckpt),
        "--no-cache",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", text(&out.stderr));
    assert!(!ckpt.exists());
}

#[test]
fn train_eval_explain_answer_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_que(dir.path(), "5");
    let loss = std::fs::read_to_string(dir.path().join("que.ckpt.loss.tsv")).unwrap();
    assert_eq!(loss.lines().next(), Some("epoch\tmean_loss"));
    assert_eq!(loss.lines().count(), 6);
    assert!(dir.path().join("cache").is_dir());

    let reports = dir.path().join("reports");
    let out = run("eval", &["--checkpoint", p(&ckpt), "--out", p(&reports)], "test.tsv");
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("overall"));
    let overall = std::fs::read_to_string(reports.join("overall.tsv")).unwrap();
    assert!(overall.starts_with("metric\tbucket\tvalue\n"));
    assert!(overall.contains("count\toverall\t20\n"));
    let per_q = std::fs::read_to_string(reports.join("per_question.tsv")).unwrap();
    assert_eq!(per_q.lines().count(), 21);

    let out = run("explain", &["--checkpoint", p(&ckpt), "--id", "q001"], "train.tsv");
    assert!(out.status.success(), "{}", text(&out.stderr));
    let explain = text(&out.stdout);
    assert!(explain.contains("anonymized\twhat movies did <E> play in"), "{explain}");
    assert!(explain.contains("sdp\twhat -det-> movies -dobj-> play -nsubj-> Diana"), "{explain}");
    assert!(explain.contains("depths\twhat:2 movies:1 did:1 Diana:1 play:0 in:1"), "{explain}");
    assert_eq!(explain.lines().filter(|l| l.starts_with("candidate\t")).count(), 5);

    let out = synkbqa(&[
        "answer",
        "--checkpoint",
        p(&ckpt),
        "--triples",
        p(&fixture("triples.tsv")),
        "--word-emb",
        p(&fixture("words.vec")),
        "--parse",
        p(&fixture("questions.conllu")),
        "--question",
        "what movies did Diana play in",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(text(&out.stdout), "Blue_Harbor\nBroken_Clock\nCrimson_Sky\nHidden_Shore\n");
}

#[test]
fn flag_mismatch_with_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_que(dir.path(), "1");
    let out = run("eval", &["--checkpoint", p(&ckpt), "--flags", "sdp", "--out", p(dir.path())], "test.tsv");
    assert_eq!(out.status.code(), Some(4));
    assert!(text(&out.stderr).contains("flags"));
}

#[test]
fn unknown_question_id_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_que(dir.path(), "1");
    let out = run("explain", &["--checkpoint", p(&ckpt), "--id", "q999"], "train.tsv");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("cfg.ckpt");
    let config = dir.path().join("run.conf");
    std::fs::write(
        &config,
        format!(
            "# toy run\ntriples = {}\nconllu = {}\nword_emb = {}\ndataset = {}\ncheckpoint = {}\nepochs = 4\nseed = 3\nno-cache = true\n",
            p(&fixture("triples.tsv")),
            p(&fixture("questions.conllu")),
            p(&fixture("words.vec")),
            p(&fixture("train.tsv")),
            p(&ckpt)
        ),
    )
    .unwrap();
    let out = synkbqa(&["train", "--config", p(&config), "--epochs", "2"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let manifest = std::fs::read_to_string(dir.path().join("cfg.ckpt.manifest")).unwrap();
    assert!(manifest.contains("epochs = 2\n"));
    assert!(manifest.contains("seed = 3\n"));
    assert!(!dir.path().join("cache").exists());

    std::fs::write(&config, "epochz = 3\n").unwrap();
    let out = synkbqa(&["train", "--config", p(&config)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("epochz"));
}

#[test]
fn pretrain_edges_writes_header() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("edges.vec");
    let out = synkbqa(&[
        "pretrain-edges",
        "--conllu",
        p(&fixture("questions.conllu")),
        "--dim",
        "4",
        "--epochs",
        "1",
        "--out",
        p(&edges),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let body = std::fs::read_to_string(&edges).unwrap();
    let header: Vec<usize> = body.lines().next().unwrap().split(' ').map(|t| t.parse().unwrap()).collect();
    assert_eq!(header[1], 4);
    assert_eq!(body.lines().count(), header[0] + 1);
}
