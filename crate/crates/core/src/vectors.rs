//! Text format for keyed vector tables: a `count dim` header line, then one
//! `key v1 ... vd` line per row. Values are written with 17 significant
//! digits so a save/load round trip is exact.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::numcore::{fmt_f64, Tensor};

pub fn write_vectors(keys: &[String], table: &Tensor) -> String {
    let mut out = format!("{} {}\n", keys.len(), table.cols());
    for (i, key) in keys.iter().enumerate() {
        out.push_str(key);
        for v in table.row(i) {
            out.push(' ');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn read_vectors(text: &str) -> Result<(Vec<String>, Tensor)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty());
    let (hl, header) = lines.next().ok_or_else(|| Error::parse(1, "empty vector file"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(hl, "header must be `count dim`"));
    if parts.len() != 2 {
        return Err(Error::parse(hl, "header must be `count dim`"));
    }
    let (count, dim) = (parse_usize(parts[0])?, parse_usize(parts[1])?);
    if dim == 0 || count == 0 {
        return Err(Error::parse(hl, "count and dim must be positive"));
    }
    let mut keys = Vec::with_capacity(count);
    let mut seen = HashSet::new();
    let mut data = Vec::with_capacity(count * dim);
    for (ln, line) in lines {
        let mut it = line.split_whitespace();
        let key = it.next().expect("nonblank line").to_string();
        let before = data.len();
        for tok in it {
            data.push(tok.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad number {tok:?}")))?);
        }
        if data.len() - before != dim {
            return Err(Error::parse(ln, format!("row {key:?} has {} values, header says {dim}", data.len() - before)));
        }
        if !seen.insert(key.clone()) {
            return Err(Error::parse(ln, format!("duplicate key {key:?}")));
        }
        keys.push(key);
    }
    if keys.len() != count {
        return Err(Error::parse(hl, format!("header says {count} rows, found {}", keys.len())));
    }
    Ok((keys, Tensor::matrix(count, dim, data)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let keys = vec!["a".to_string(), "b|det|c".to_string()];
        let t = Tensor::matrix(2, 3, vec![0.1, 1.0 / 7.0, -2.5, 1e-20, 3.0, -0.0]).unwrap();
        let (k, u) = read_vectors(&write_vectors(&keys, &t)).unwrap();
        assert_eq!(k, keys);
        assert_eq!(u, t);
    }

    #[test]
    fn short_row_names_line() {
        let mut text = String::from("5 64\n");
        let row: Vec<String> = (0..63).map(|i| i.to_string()).collect();
        text.push_str(&format!("k {}\n", row.join(" ")));
        let err = read_vectors(&text).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = read_vectors("2 1\nx 1\nx 2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn row_count_must_match_header() {
        assert!(read_vectors("3 1\nx 1\ny 2\n").is_err());
    }
}

/// Read-only word vector table (for example pre-trained GloVe vectors).
#[derive(Clone, Debug, PartialEq)]
pub struct WordVectors {
    keys: Vec<String>,
    index: std::collections::HashMap<String, usize>,
    table: Tensor,
}

impl WordVectors {
    pub fn new(keys: Vec<String>, table: Tensor) -> Result<Self> {
        if keys.len() != table.rows() || table.shape().len() != 2 {
            return Err(Error::invalid("word vector keys and table disagree"));
        }
        let mut index = std::collections::HashMap::with_capacity(keys.len());
        for (i, k) in keys.iter().enumerate() {
            if index.insert(k.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate word {k:?}")));
            }
        }
        Ok(Self { keys, index, table })
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (keys, table) = read_vectors(text)?;
        Self::new(keys, table)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn to_text(&self) -> String {
        write_vectors(&self.keys, &self.table)
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn table(&self) -> &Tensor {
        &self.table
    }

    /// Exact match first, then the lowercased word.
    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).or_else(|| self.index.get(&word.to_lowercase())).copied()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.table.row(i))
    }

    /// Mean vector over the known words; `None` when none is known.
    pub fn mean<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> Option<Vec<f64>> {
        let mut acc = vec![0.0; self.dim()];
        let mut n = 0usize;
        for w in words {
            if let Some(v) = self.get(w) {
                acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
                n += 1;
            }
        }
        (n > 0).then(|| acc.into_iter().map(|a| a / n as f64).collect())
    }
}
