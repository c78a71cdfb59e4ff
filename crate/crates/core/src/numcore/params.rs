use std::collections::HashMap;
use std::fmt::Write as _;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered set of trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, ParamId>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<ParamId> {
        let name = name.into();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::invalid(format!("bad parameter name {name:?}")));
        }
        if self.index.contains_key(&name) {
            return Err(Error::invalid(format!("duplicate parameter {name}")));
        }
        let id = ParamId(self.tensors.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(tensor);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names.iter().zip(&self.tensors).enumerate().map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    /// Total number of scalar entries.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Serializes every tensor as a named-matrix block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (_, name, t) in self.iter() {
            write_block(&mut out, name, t);
        }
        out
    }

    /// Overwrites tensors from named-matrix text. Every block must name an
    /// existing parameter with a matching shape, and every parameter must be
    /// covered.
    pub fn load_text(&mut self, text: &str) -> Result<()> {
        let blocks = parse_blocks(text)?;
        let mut seen = vec![false; self.len()];
        for block in blocks {
            let id = self
                .id(&block.name)
                .ok_or_else(|| Error::parse(block.line, format!("unknown parameter {}", block.name)))?;
            let t = &mut self.tensors[id.0];
            if t.rows() != block.rows || t.cols() != block.cols {
                return Err(Error::parse(
                    block.line,
                    format!(
                        "parameter {} expects {}x{}, file has {}x{}",
                        block.name,
                        t.rows(),
                        t.cols(),
                        block.rows,
                        block.cols
                    ),
                ));
            }
            t.data_mut().copy_from_slice(&block.data);
            seen[id.0] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("checkpoint is missing parameter {}", self.names[i])));
        }
        Ok(())
    }
}

/// One `name rows cols` block of the named-matrix text format.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub line: usize,
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_block(out: &mut String, name: &str, t: &Tensor) {
    let _ = writeln!(out, "{} {} {}", name, t.rows(), t.cols());
    for r in 0..t.rows() {
        let line: Vec<String> = t.row(r).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

pub fn parse_blocks(text: &str) -> Result<Vec<MatrixBlock>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut blocks = Vec::new();
    while let Some((lineno, header)) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::parse(lineno, "expected `name rows cols` header"));
        }
        let rows: usize = parts[1].parse().map_err(|_| Error::parse(lineno, "bad row count"))?;
        let cols: usize = parts[2].parse().map_err(|_| Error::parse(lineno, "bad column count"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, row) =
                lines.next().ok_or_else(|| Error::parse(lineno, format!("block {} truncated", parts[0])))?;
            let before = data.len();
            for tok in row.split_whitespace() {
                data.push(tok.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad number {tok:?}")))?);
            }
            if data.len() - before != cols {
                return Err(Error::parse(ln, format!("expected {cols} values, got {}", data.len() - before)));
            }
        }
        blocks.push(MatrixBlock { name: parts[0].to_string(), rows, cols, data, line: lineno });
    }
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let mut p = Params::new();
        p.insert("w", Tensor::matrix(2, 3, vec![0.1, -1.0 / 3.0, 1e-300, 7.0, f64::MIN_POSITIVE, 2.5e17]).unwrap())
            .unwrap();
        p.insert("b", Tensor::vector(vec![std::f64::consts::PI, -0.0])).unwrap();
        let text = p.to_text();
        let mut q = p.clone();
        for id in q.ids().collect::<Vec<_>>() {
            q.get_mut(id).data_mut().fill(9.0);
        }
        q.load_text(&text).unwrap();
        assert_eq!(p, q);
        assert!(text.starts_with("w 2 3\n"));
    }

    #[test]
    fn short_row_is_rejected_with_line() {
        let err = parse_blocks("w 1 3\n1 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn missing_parameter_is_rejected() {
        let mut p = Params::new();
        p.insert("a", Tensor::scalar(1.0)).unwrap();
        p.insert("b", Tensor::scalar(1.0)).unwrap();
        assert!(p.load_text("a 1 1\n2\n").is_err());
    }
}
