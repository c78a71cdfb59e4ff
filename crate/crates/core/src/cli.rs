//! Command-line front end. `main` only forwards to [`run`].
//!
//! Exit codes: 0 success, 1 internal failure, 2 usage or input error,
//! 3 nothing to train on, 4 checkpoint/config mismatch.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::dataset::{load_corpus, load_dataset, parse_conllu_one, resolve_parses, Question};
use crate::deptree::DepTree;
use crate::edgevec::{build_edge_vocab, train_skipgram, training_pairs, EdgeEmbeddings, SkipGramConfig};
use crate::error::Error;
use crate::kb::TripleStore;
use crate::matcher::{
    evaluate, load_checkpoint, save_checkpoint, EvalReport, Model, ModelConfig, ModelVocabs, SyntaxFlags, TrainConfig,
};
use crate::pipeline::{cache_key, cached_examples, tree_tokens, Example, Linker};
use crate::qgraph::LabeledCandidate;
use crate::vectors::WordVectors;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_EMPTY_TRAINING: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(Error),
    EmptyTraining(String),
    Mismatch(String),
    Internal(Error),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => EXIT_USAGE,
            CliError::EmptyTraining(_) => EXIT_EMPTY_TRAINING,
            CliError::Mismatch(_) => EXIT_MISMATCH,
            CliError::Internal(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::EmptyTraining(m) | CliError::Mismatch(m) => f.write_str(m),
            CliError::Input(e) | CliError::Internal(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::EmptyTraining(m) => CliError::EmptyTraining(m),
            Error::NonFinite { .. } => CliError::Internal(e),
            other => CliError::Input(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "synkbqa", version, about = "Syntax-aware question answering over a triple store")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pretrain dependency-edge embeddings on a CoNLL-U corpus.
    PretrainEdges(Opts),
    /// Generate and label candidates, train, and write a checkpoint.
    Train(Opts),
    /// Evaluate a checkpoint and write TSV reports.
    Eval(Opts),
    /// Dump links, paths, depths and top candidates for one question.
    Explain(Opts),
    /// Answer one parsed question.
    Answer(Opts),
    /// Write the built-in toy fixture files.
    ToyFixture(Opts),
}

/// Every option is optional on the command line; `--config` supplies
/// `key = value` defaults that explicit flags override.
#[derive(Args, Debug, Default, Clone)]
struct Opts {
    /// Flat `key = value` file; keys are flag names without dashes.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    triples: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    conllu: Option<PathBuf>,
    #[arg(long = "word-emb")]
    word_emb: Option<PathBuf>,
    #[arg(long = "edge-emb")]
    edge_emb: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Syntax encoders: comma list of sdp, tpf, treegru (or none).
    #[arg(long)]
    flags: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for the candidate cache (default: next to the checkpoint).
    #[arg(long = "cache-dir")]
    cache_dir: Option<PathBuf>,
    /// Disable the candidate cache.
    #[arg(long = "no-cache")]
    no_cache: bool,
    #[arg(long = "word-dim")]
    word_dim: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long = "tree-hidden")]
    tree_hidden: Option<usize>,
    #[arg(long = "pos-dim")]
    pos_dim: Option<usize>,
    /// Edge embedding size for pretrain-edges.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long = "min-count")]
    min_count: Option<u64>,
    /// Question id for explain.
    #[arg(long)]
    id: Option<String>,
    /// Question text for answer.
    #[arg(long)]
    question: Option<String>,
    /// CoNLL-U file holding the parse of `--question`.
    #[arg(long)]
    parse: Option<PathBuf>,
}

fn read_config(path: &Path) -> CliResult<HashMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(Error::io(path, e)))?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{}:{}: expected `key = value`", path.display(), i + 1)))?;
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

fn fill<T: FromStr>(slot: &mut Option<T>, file: &mut HashMap<String, String>, key: &str) -> CliResult<()> {
    if let Some(v) = file.remove(key) {
        if slot.is_none() {
            *slot = Some(v.parse().map_err(|_| CliError::Usage(format!("config key {key}: bad value {v:?}")))?);
        }
    }
    Ok(())
}

impl Opts {
    fn merged(mut self) -> CliResult<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let mut f = read_config(&path)?;
        fill(&mut self.triples, &mut f, "triples")?;
        fill(&mut self.dataset, &mut f, "dataset")?;
        fill(&mut self.conllu, &mut f, "conllu")?;
        fill(&mut self.word_emb, &mut f, "word-emb")?;
        fill(&mut self.edge_emb, &mut f, "edge-emb")?;
        fill(&mut self.checkpoint, &mut f, "checkpoint")?;
        fill(&mut self.flags, &mut f, "flags")?;
        fill(&mut self.epochs, &mut f, "epochs")?;
        fill(&mut self.batch, &mut f, "batch")?;
        fill(&mut self.margin, &mut f, "margin")?;
        fill(&mut self.dropout, &mut f, "dropout")?;
        fill(&mut self.lr, &mut f, "lr")?;
        fill(&mut self.seed, &mut f, "seed")?;
        fill(&mut self.out, &mut f, "out")?;
        fill(&mut self.cache_dir, &mut f, "cache-dir")?;
        fill(&mut self.word_dim, &mut f, "word-dim")?;
        fill(&mut self.hidden, &mut f, "hidden")?;
        fill(&mut self.tree_hidden, &mut f, "tree-hidden")?;
        fill(&mut self.pos_dim, &mut f, "pos-dim")?;
        fill(&mut self.dim, &mut f, "dim")?;
        fill(&mut self.min_count, &mut f, "min-count")?;
        let mut no_cache: Option<bool> = None;
        fill(&mut no_cache, &mut f, "no-cache")?;
        self.no_cache |= no_cache.unwrap_or(false);
        if let Some(k) = f.keys().min() {
            return Err(CliError::Usage(format!("{}: unknown config key {k:?}", path.display())));
        }
        Ok(self)
    }

    fn need<'a>(&self, v: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
        v.as_deref().ok_or_else(|| CliError::Usage(format!("missing required --{flag}")))
    }

    fn existing<'a>(&self, v: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
        let p = self.need(v, flag)?;
        if !p.exists() {
            return Err(CliError::Usage(format!("--{flag}: {} does not exist", p.display())));
        }
        Ok(p)
    }

    fn syntax_flags(&self) -> CliResult<Option<SyntaxFlags>> {
        self.flags.as_deref().map(|s| s.parse().map_err(CliError::Input)).transpose()
    }

    fn train_config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            batch: self.batch.unwrap_or(d.batch),
            margin: self.margin.unwrap_or(d.margin),
            dropout: self.dropout.unwrap_or(d.dropout),
            lr: self.lr.unwrap_or(d.lr),
            seed: self.seed.unwrap_or(d.seed),
            negatives: d.negatives,
        }
    }

    fn model_config(&self, flags: SyntaxFlags, word_dim: usize) -> ModelConfig {
        let d = ModelConfig::default();
        let word_dim = self.word_dim.unwrap_or(word_dim);
        ModelConfig {
            word_dim,
            hidden: self.hidden.unwrap_or(word_dim / 2),
            tree_hidden: self.tree_hidden.unwrap_or(d.tree_hidden),
            pos_dim: self.pos_dim.unwrap_or(d.pos_dim),
            max_depth: d.max_depth,
            flags,
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing results to `out` and diagnostics to the log.
pub fn run_with<W: std::io::Write>(args: Vec<OsString>, out: &mut W) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut text = String::new();
    let result = dispatch(cli.command, &mut text);
    let _ = out.write_all(text.as_bytes());
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

pub fn run(args: Vec<OsString>) -> i32 {
    run_with(args, &mut std::io::stdout())
}

fn dispatch(cmd: Command, out: &mut String) -> CliResult<()> {
    match cmd {
        Command::PretrainEdges(o) => cmd_pretrain_edges(&o.merged()?, out),
        Command::Train(o) => cmd_train(&o.merged()?, out),
        Command::Eval(o) => cmd_eval(&o.merged()?, out),
        Command::Explain(o) => cmd_explain(&o.merged()?, out),
        Command::Answer(o) => cmd_answer(&o.merged()?, out),
        Command::ToyFixture(o) => {
            let o = o.merged()?;
            let dir = o.need(&o.out, "out")?;
            crate::toy::default_fixture().write_to(dir)?;
            let _ = writeln!(out, "wrote toy fixture to {}", dir.display());
            Ok(())
        }
    }
}

fn cmd_pretrain_edges(o: &Opts, out: &mut String) -> CliResult<()> {
    let corpus = load_corpus(o.existing(&o.conllu, "conllu")?)?;
    let dest = o.need(&o.out, "out")?;
    let vocab = build_edge_vocab(&corpus, o.min_count.unwrap_or(1))?;
    let pairs: Vec<(usize, usize)> = training_pairs(&corpus, &vocab).collect();
    let d = SkipGramConfig::default();
    let cfg = SkipGramConfig {
        dim: o.dim.unwrap_or(d.dim),
        epochs: o.epochs.unwrap_or(d.epochs),
        lr: o.lr.unwrap_or(d.lr),
        seed: o.seed.unwrap_or(d.seed),
        ..d
    };
    let trained = train_skipgram(&pairs, &vocab, &cfg)?;
    trained.embeddings.save(dest)?;
    let _ = writeln!(out, "vocab\t{}", vocab.len());
    let _ = writeln!(out, "final_loss\t{:.6}", trained.epoch_loss.last().copied().unwrap_or(0.0));
    Ok(())
}

struct Inputs {
    store: TripleStore,
    words: WordVectors,
    questions: Vec<Question>,
    trees: Vec<DepTree>,
    key_parts: Vec<Vec<u8>>,
}

fn read_bytes(p: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(p).map_err(|e| CliError::Input(Error::io(p, e)))
}

fn load_inputs(o: &Opts) -> CliResult<Inputs> {
    let tp = o.existing(&o.triples, "triples")?;
    let dp = o.existing(&o.dataset, "dataset")?;
    let cp = o.existing(&o.conllu, "conllu")?;
    let wp = o.existing(&o.word_emb, "word-emb")?;
    let store = TripleStore::load(tp)?;
    let words = WordVectors::load(wp)?;
    let questions = load_dataset(dp)?;
    let corpus = load_corpus(cp)?;
    let trees = resolve_parses(&questions, &corpus)?;
    let key_parts = vec![read_bytes(tp)?, read_bytes(dp)?, read_bytes(cp)?, read_bytes(wp)?];
    Ok(Inputs { store, words, questions, trees, key_parts })
}

fn examples(o: &Opts, inputs: &Inputs) -> CliResult<Vec<Example>> {
    let linker = Linker::new(&inputs.store, &inputs.words);
    let parts: Vec<&[u8]> = inputs.key_parts.iter().map(Vec::as_slice).collect();
    let key = cache_key(&parts, &linker);
    let dir = if o.no_cache {
        None
    } else {
        o.cache_dir.clone().or_else(|| {
            o.checkpoint
                .as_deref()
                .map(|c| c.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).join("cache"))
        })
    };
    Ok(cached_examples(dir.as_deref(), &key, &linker, &inputs.questions, &inputs.trees)?)
}

fn coverage_report(examples: &[Example]) -> String {
    let mut s = String::from("id\tcandidates\tpositives\toracle_f1\n");
    for ex in examples {
        let pos = ex.candidates.iter().filter(|c| c.positive).count();
        let _ = writeln!(s, "{}\t{}\t{pos}\t{:.6}", ex.question.id, ex.candidates.len(), ex.oracle_f1());
    }
    s
}

fn cmd_train(o: &Opts, out: &mut String) -> CliResult<()> {
    let flags = o.syntax_flags()?.unwrap_or_default();
    let ckpt = o.need(&o.checkpoint, "checkpoint")?;
    let edges = if flags.treegru { Some(EdgeEmbeddings::load(o.existing(&o.edge_emb, "edge-emb")?)?) } else { None };
    let inputs = load_inputs(o)?;
    let examples = examples(o, &inputs)?;
    let cfg = o.train_config();
    cfg.validate()?;
    let vocabs = ModelVocabs::collect(&examples, &inputs.store, &inputs.words, edges.as_ref());
    let mut model = Model::new(o.model_config(flags, inputs.words.dim()), vocabs, cfg.seed)?;
    model.load_word_vectors(&inputs.words)?;
    if let Some(e) = &edges {
        model.load_edge_vectors(e)?;
    }
    let outcome = match crate::matcher::train(model, &examples, &inputs.store, &cfg) {
        Ok(r) => r,
        Err(Error::EmptyTraining(m)) => {
            eprint!("{}", coverage_report(&examples));
            return Err(CliError::EmptyTraining(m));
        }
        Err(e) => return Err(e.into()),
    };
    save_checkpoint(ckpt, &outcome.model, &cfg)?;
    let mut loss = String::from("epoch\tmean_loss\n");
    for (i, l) in outcome.epoch_loss.iter().enumerate() {
        let _ = writeln!(loss, "{i}\t{l:.6}");
    }
    let mut lp = ckpt.as_os_str().to_owned();
    lp.push(".loss.tsv");
    let lp = PathBuf::from(lp);
    std::fs::write(&lp, &loss).map_err(|e| CliError::Input(Error::io(&lp, e)))?;
    out.push_str(&loss);
    let _ = writeln!(
        out,
        "trained {} ({} pairs per epoch, {} questions skipped) -> {}",
        flags,
        outcome.pairs_per_epoch,
        outcome.skipped.len(),
        ckpt.display()
    );
    Ok(())
}

fn load_model(o: &Opts) -> CliResult<Model> {
    let (model, manifest) = load_checkpoint(o.existing(&o.checkpoint, "checkpoint")?)?;
    if let Some(f) = o.syntax_flags()? {
        if f != manifest.config.flags {
            return Err(CliError::Mismatch(format!(
                "checkpoint was trained with flags {}, requested {}",
                manifest.config.flags, f
            )));
        }
    }
    Ok(model)
}

fn cmd_eval(o: &Opts, out: &mut String) -> CliResult<()> {
    let model = load_model(o)?;
    let inputs = load_inputs(o)?;
    let examples = examples(o, &inputs)?;
    let report = evaluate(&model, &examples, &inputs.store)?;
    if let Some(dir) = &o.out {
        write_reports(dir, &report)?;
    }
    out.push_str(&report.table());
    Ok(())
}

fn write_reports(dir: &Path, r: &EvalReport) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(Error::io(dir, e)))?;
    let files = [
        ("overall.tsv", r.overall_tsv()),
        ("by_type.tsv", r.by_type_tsv()),
        ("by_length.tsv", r.by_length_tsv()),
        ("per_question.tsv", r.per_question_tsv()),
    ];
    for (name, text) in files {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| CliError::Input(Error::io(&p, e)))?;
    }
    Ok(())
}

/// `what -det-> movies -obj-> play -nsubj-> Diana`
pub fn render_sdp(tree: &DepTree, from: usize, to: usize) -> crate::Result<String> {
    let path = tree.sdp(from, to)?;
    let mut s = path.forms[0].clone();
    for (k, (label, _)) in path.labels.iter().enumerate() {
        let _ = write!(s, " -{label}-> {}", path.forms[k + 1]);
    }
    Ok(s)
}

fn ranked(model: &Model, ex: &Example, store: &TripleStore) -> CliResult<Vec<(usize, f64)>> {
    let prepared = model.prepare(ex, store)?;
    let mut scored: Vec<(usize, f64)> = model.score_all(&prepared)?.into_iter().map(|b| b.total).enumerate().collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored)
}

fn cmd_explain(o: &Opts, out: &mut String) -> CliResult<()> {
    let id = o.id.as_deref().ok_or_else(|| CliError::Usage("missing required --id".into()))?;
    let model = load_model(o)?;
    let inputs = load_inputs(o)?;
    let pos = inputs
        .questions
        .iter()
        .position(|q| q.id == id)
        .ok_or_else(|| CliError::Usage(format!("unknown question id {id:?}")))?;
    let linker = Linker::new(&inputs.store, &inputs.words);
    let ex = linker.example(&inputs.questions[pos], &inputs.trees[pos])?;
    let store = &inputs.store;
    let tree = &ex.tree;
    let tokens = tree_tokens(tree);
    let _ = writeln!(out, "question\t{}\t{}", id, ex.question.text);
    let _ = writeln!(out, "tokens\t{}", tokens.join(" "));
    let _ = writeln!(out, "anonymized\t{}", crate::encoders::anonymize(&tokens, &ex.links).join(" "));
    let span_text = |s: crate::qgraph::Span| tokens[s.start..s.end].join(" ");
    for l in &ex.links.entities {
        let _ = writeln!(out, "link\tentity\t{}\t{}\t{:.3}", span_text(l.span), store.entity_name(l.entity), l.score);
    }
    for l in &ex.links.types {
        let _ = writeln!(out, "link\ttype\t{}\t{}\t{:.3}", span_text(l.span), l.label, l.score);
    }
    for l in &ex.links.times {
        let _ = writeln!(out, "link\ttime\t{}\t{:?}\t{}", span_text(l.span), l.op, store.render(&l.value));
    }
    for l in &ex.links.ordinals {
        let _ = writeln!(out, "link\tordinal\t{}\t{:?}\t{}", span_text(l.span), l.direction, l.rank);
    }
    let answer = tree.answer_word();
    let _ = writeln!(out, "answer_word\t{answer}\t{}", tree.token(answer).form);
    for f in crate::encoders::focus_tokens(tree, &ex.links) {
        let _ = writeln!(out, "sdp\t{}", render_sdp(tree, answer, f)?);
    }
    let depths: Vec<String> = tree.tokens().iter().zip(tree.depths()).map(|(t, d)| format!("{}:{d}", t.form)).collect();
    let _ = writeln!(out, "depths\t{}", depths.join(" "));
    if ex.candidates.is_empty() {
        let _ = writeln!(out, "no candidates");
        return Ok(());
    }
    let scores = model.score_all(&model.prepare(&ex, store)?)?;
    for (rank, (i, _)) in ranked(&model, &ex, store)?.into_iter().take(5).enumerate() {
        let c: &LabeledCandidate = &ex.candidates[i];
        let b = &scores[i];
        let _ = writeln!(
            out,
            "candidate\t{}\tscore={:.6}\tsemantic={:.6}\tf1={:.4}\tsubpaths={}\tgraph={}",
            rank + 1,
            b.total,
            b.semantic(),
            c.f1,
            c.graph.subpaths(store).join(" | "),
            c.graph.display(store)
        );
    }
    Ok(())
}

fn cmd_answer(o: &Opts, out: &mut String) -> CliResult<()> {
    let text = o.question.as_deref().ok_or_else(|| CliError::Usage("missing required --question".into()))?;
    let parse_path = o.existing(&o.parse, "parse")?;
    let model = load_model(o)?;
    let store = TripleStore::load(o.existing(&o.triples, "triples")?)?;
    let words = WordVectors::load(o.existing(&o.word_emb, "word-emb")?)?;
    let parse_text = std::fs::read_to_string(parse_path).map_err(|e| CliError::Input(Error::io(parse_path, e)))?;
    let tree = parse_conllu_one(&parse_text, text)?;
    let linker = Linker::new(&store, &words);
    match crate::matcher::answer_tree(&model, &linker, &tree)? {
        None => {
            log::warn!("no candidate graphs for {text:?}");
            eprintln!("warning: no candidates");
        }
        Some((graph, answers)) => {
            log::info!("top graph: {}", graph.display(&store));
            for a in answers {
                let _ = writeln!(out, "{a}");
            }
        }
    }
    Ok(())
}
