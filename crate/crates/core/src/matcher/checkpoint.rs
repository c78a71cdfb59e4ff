use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{Model, ModelConfig, ModelVocabs, SyntaxFlags, TrainConfig};
use crate::error::{Error, Result};

const FORMAT: &str = "synkbqa-checkpoint-1";

/// Everything needed to rebuild a model's parameter layout, plus the
/// training settings that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub config: ModelConfig,
    pub vocabs: ModelVocabs,
    pub train: TrainConfig,
}

pub fn manifest_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let t = &self.train;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("format", FORMAT.to_string());
        kv("flags", c.flags.to_string());
        kv("word_dim", c.word_dim.to_string());
        kv("hidden", c.hidden.to_string());
        kv("tree_hidden", c.tree_hidden.to_string());
        kv("pos_dim", c.pos_dim.to_string());
        kv("max_depth", c.max_depth.to_string());
        kv("edge_dim", self.vocabs.edge_dim.to_string());
        kv("epochs", t.epochs.to_string());
        kv("batch", t.batch.to_string());
        kv("margin", format!("{:?}", t.margin));
        kv("dropout", format!("{:?}", t.dropout));
        kv("lr", format!("{:?}", t.lr));
        kv("seed", t.seed.to_string());
        kv("negatives", t.negatives.to_string());
        let sections = [
            ("words", &self.vocabs.words),
            ("relations", &self.vocabs.relations),
            ("labels", &self.vocabs.labels),
            ("edges", &self.vocabs.edges),
        ];
        for (name, keys) in sections {
            let _ = writeln!(out, "[{name}]");
            for k in keys {
                out.push_str(k);
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = ModelConfig::default();
        let mut train = TrainConfig::default();
        let mut vocabs = ModelVocabs::default();
        let mut section: Option<&str> = None;
        let mut format_seen = false;
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(match name {
                    "words" | "relations" | "labels" | "edges" => name,
                    _ => return Err(Error::parse(ln, format!("unknown manifest section {name:?}"))),
                });
                continue;
            }
            if let Some(sec) = section {
                let list = match sec {
                    "words" => &mut vocabs.words,
                    "relations" => &mut vocabs.relations,
                    "labels" => &mut vocabs.labels,
                    _ => &mut vocabs.edges,
                };
                list.push(line.to_string());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::parse(ln, "expected `key = value`"))?;
            let num = |v: &str| v.parse::<usize>().map_err(|_| Error::parse(ln, format!("{k}: bad integer {v:?}")));
            let real = |v: &str| v.parse::<f64>().map_err(|_| Error::parse(ln, format!("{k}: bad number {v:?}")));
            match k {
                "format" if v == FORMAT => format_seen = true,
                "format" => return Err(Error::parse(ln, format!("unsupported checkpoint format {v:?}"))),
                "flags" => config.flags = v.parse::<SyntaxFlags>()?,
                "word_dim" => config.word_dim = num(v)?,
                "hidden" => config.hidden = num(v)?,
                "tree_hidden" => config.tree_hidden = num(v)?,
                "pos_dim" => config.pos_dim = num(v)?,
                "max_depth" => config.max_depth = num(v)?,
                "edge_dim" => vocabs.edge_dim = num(v)?,
                "epochs" => train.epochs = num(v)?,
                "batch" => train.batch = num(v)?,
                "margin" => train.margin = real(v)?,
                "dropout" => train.dropout = real(v)?,
                "lr" => train.lr = real(v)?,
                "seed" => train.seed = v.parse().map_err(|_| Error::parse(ln, format!("seed: bad integer {v:?}")))?,
                "negatives" => train.negatives = num(v)?,
                _ => return Err(Error::parse(ln, format!("unknown manifest key {k:?}"))),
            }
        }
        if !format_seen {
            return Err(Error::parse(1, "manifest lacks a format line"));
        }
        Ok(Self { config, vocabs, train })
    }
}

/// Writes parameters to `path` and the manifest next to it.
pub fn save_checkpoint(path: &Path, model: &Model, train: &TrainConfig) -> Result<()> {
    let manifest = Manifest { config: model.config, vocabs: model.vocabs.clone(), train: *train };
    std::fs::write(path, model.params.to_text()).map_err(|e| Error::io(path, e))?;
    let mp = manifest_path(path);
    std::fs::write(&mp, manifest.to_text()).map_err(|e| Error::io(&mp, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, Manifest)> {
    let mp = manifest_path(path);
    let text = std::fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let manifest = Manifest::from_text(&text)?;
    let mut model = Model::new(manifest.config, manifest.vocabs.clone(), manifest.train.seed)?;
    let params = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model.params.load_text(&params)?;
    Ok((model, manifest))
}
