use rand::Rng;

use super::tensor::{self, Tensor};
use super::{ParamId, Params};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// The differentiable primitive set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Primitive {
    MatMul,
    Add,
    Sub,
    Mul,
    Sigmoid,
    Tanh,
    Relu,
    Concat,
    Sum,
    Mean,
    MaxPool,
    Cosine,
    Dot,
}

enum Value {
    Owned(Tensor),
    Param(ParamId),
}

enum Op {
    Leaf,
    Param(ParamId),
    Row(ParamId, usize),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Concat(Vec<Var>),
    Sum(Vec<Var>),
    Mean(Vec<Var>),
    Max(Vec<Var>, Vec<usize>),
    Cosine(Var, Var),
    Dot(Var, Var),
}

struct Node {
    value: Value,
    op: Op,
    requires_grad: bool,
}

/// Reverse-mode recording of one forward computation.
///
/// Parameters are borrowed from a [`Params`] set and never copied; the tape
/// records operations in execution order, which is a topological order by
/// construction.
pub struct Tape<'p> {
    params: &'p Params,
    nodes: Vec<Node>,
}

/// Per-parameter gradients produced by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when the parameter was not reachable from the loss.
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient as a dense tensor, zeros for unreachable parameters.
    pub fn dense(&self, id: ParamId, params: &Params) -> Tensor {
        match self.get(id) {
            Some(g) => g.clone(),
            None => Tensor::zeros(params.get(id).shape()).expect("param shape is valid"),
        }
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape { op, left: a.shape().to_vec(), right: b.shape().to_vec() }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p Params) -> Self {
        Self { params, nodes: Vec::new() }
    }

    pub fn params(&self) -> &'p Params {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.params.get(*id),
        }
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value: Value::Owned(value), op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Registers a tensor that receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node { value: Value::Param(id), op: Op::Param(id), requires_grad: true });
        Var(self.nodes.len() - 1)
    }

    /// Embedding lookup: row `row` of a 2-D parameter as a 1-D vector.
    pub fn row(&mut self, id: ParamId, row: usize) -> Result<Var> {
        let table = self.params.get(id);
        if table.shape().len() != 2 || row >= table.rows() {
            return Err(Error::invalid(format!(
                "row {row} out of range for {} {:?}",
                self.params.name(id),
                table.shape()
            )));
        }
        let value = Tensor::vector(table.row(row).to_vec());
        Ok(self.push(value, Op::Row(id, row), true))
    }

    pub fn apply(&mut self, kind: Primitive, inputs: &[Var]) -> Result<Var> {
        let binary = |inputs: &[Var]| -> Result<(Var, Var)> {
            match inputs {
                [a, b] => Ok((*a, *b)),
                _ => Err(Error::invalid(format!("{kind:?} takes two inputs, got {}", inputs.len()))),
            }
        };
        let unary = |inputs: &[Var]| -> Result<Var> {
            match inputs {
                [a] => Ok(*a),
                _ => Err(Error::invalid(format!("{kind:?} takes one input, got {}", inputs.len()))),
            }
        };
        match kind {
            Primitive::MatMul => binary(inputs).and_then(|(a, b)| self.matmul(a, b)),
            Primitive::Add => binary(inputs).and_then(|(a, b)| self.add(a, b)),
            Primitive::Sub => binary(inputs).and_then(|(a, b)| self.sub(a, b)),
            Primitive::Mul => binary(inputs).and_then(|(a, b)| self.mul(a, b)),
            Primitive::Cosine => binary(inputs).and_then(|(a, b)| self.cosine(a, b)),
            Primitive::Dot => binary(inputs).and_then(|(a, b)| self.dot(a, b)),
            Primitive::Sigmoid => unary(inputs).map(|a| self.sigmoid(a)),
            Primitive::Tanh => unary(inputs).map(|a| self.tanh(a)),
            Primitive::Relu => unary(inputs).map(|a| self.relu(a)),
            Primitive::Concat => self.concat(inputs),
            Primitive::Sum => self.sum(inputs),
            Primitive::Mean => self.mean(inputs),
            Primitive::MaxPool => self.maxpool(inputs),
        }
    }

    /// `[m,n] x [n] -> [m]` or `[m,n] x [n,k] -> [m,k]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (at, bt) = (self.value(a), self.value(b));
        if at.shape().len() != 2 || bt.shape().len() > 2 || at.shape()[1] != bt.shape()[0] {
            return Err(shape_err("matmul", at, bt));
        }
        let (m, n) = (at.shape()[0], at.shape()[1]);
        let k = if bt.shape().len() == 2 { bt.shape()[1] } else { 1 };
        let (ad, bd) = (at.data(), bt.data());
        let mut out = vec![0.0; m * k];
        if k == 1 {
            for (i, o) in out.iter_mut().enumerate() {
                *o = tensor::dot(&ad[i * n..(i + 1) * n], bd);
            }
        } else {
            for i in 0..m {
                for j in 0..n {
                    let x = ad[i * n + j];
                    if x == 0.0 {
                        continue;
                    }
                    let brow = &bd[j * k..(j + 1) * k];
                    for (o, y) in out[i * k..(i + 1) * k].iter_mut().zip(brow) {
                        *o += x * y;
                    }
                }
            }
        }
        let shape = if bt.shape().len() == 2 { vec![m, k] } else { vec![m] };
        let rg = self.rg(a) || self.rg(b);
        let t = Tensor::new(shape, out)?;
        Ok(self.push(t, Op::MatMul(a, b), rg))
    }

    fn zip_with(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (at, bt) = (self.value(a), self.value(b));
        if at.shape() != bt.shape() {
            return Err(shape_err(op, at, bt));
        }
        let data = at.data().iter().zip(bt.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(at.shape().to_vec(), data)
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let at = self.value(a);
        let data = at.data().iter().map(|x| f(*x)).collect();
        Tensor::new(at.shape().to_vec(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_with("add", a, b, |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_with("sub", a, b, |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_with("mul", a, b, |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.map(a, |x| x * c);
        let rg = self.rg(a);
        self.push(t, Op::Scale(a, c), rg)
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let t = self.map(a, |x| 1.0 - x);
        let rg = self.rg(a);
        self.push(t, Op::OneMinus(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.map(a, tensor::sigmoid);
        let rg = self.rg(a);
        self.push(t, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.map(a, f64::tanh);
        let rg = self.rg(a);
        self.push(t, Op::Tanh(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.map(a, |x| x.max(0.0));
        let rg = self.rg(a);
        self.push(t, Op::Relu(a), rg)
    }

    fn check_list(&self, op: &'static str, xs: &[Var], same_shape: bool) -> Result<()> {
        let Some(first) = xs.first() else {
            return Err(Error::invalid(format!("{op}: empty input list")));
        };
        let s0 = self.value(*first);
        for x in &xs[1..] {
            let s = self.value(*x);
            let ok = if same_shape { s.shape() == s0.shape() } else { s.shape().len() == 1 };
            if !ok {
                return Err(shape_err(op, s0, s));
            }
        }
        if !same_shape && s0.shape().len() != 1 {
            return Err(Error::invalid(format!("{op}: inputs must be 1-D, got {:?}", s0.shape())));
        }
        Ok(())
    }

    /// Concatenates 1-D vectors.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        self.check_list("concat", xs, false)?;
        let mut data = Vec::new();
        for x in xs {
            data.extend_from_slice(self.value(*x).data());
        }
        let rg = xs.iter().any(|x| self.rg(*x));
        Ok(self.push(Tensor::vector(data), Op::Concat(xs.to_vec()), rg))
    }

    pub fn sum(&mut self, xs: &[Var]) -> Result<Var> {
        self.check_list("sum", xs, true)?;
        let mut acc = self.value(xs[0]).clone();
        for x in &xs[1..] {
            for (a, b) in acc.data_mut().iter_mut().zip(self.value(*x).data()) {
                *a += b;
            }
        }
        let rg = xs.iter().any(|x| self.rg(*x));
        Ok(self.push(acc, Op::Sum(xs.to_vec()), rg))
    }

    pub fn mean(&mut self, xs: &[Var]) -> Result<Var> {
        self.check_list("mean", xs, true)?;
        let mut acc = self.value(xs[0]).clone();
        for x in &xs[1..] {
            for (a, b) in acc.data_mut().iter_mut().zip(self.value(*x).data()) {
                *a += b;
            }
        }
        let n = xs.len() as f64;
        acc.data_mut().iter_mut().for_each(|a| *a /= n);
        let rg = xs.iter().any(|x| self.rg(*x));
        Ok(self.push(acc, Op::Mean(xs.to_vec()), rg))
    }

    /// Coordinatewise maximum over a list; ties go to the earliest entry.
    pub fn maxpool(&mut self, xs: &[Var]) -> Result<Var> {
        self.check_list("maxpool", xs, true)?;
        let mut acc = self.value(xs[0]).clone();
        let mut arg = vec![0usize; acc.len()];
        for (k, x) in xs.iter().enumerate().skip(1) {
            for ((a, i), b) in acc.data_mut().iter_mut().zip(arg.iter_mut()).zip(self.value(*x).data()) {
                if *b > *a {
                    *a = *b;
                    *i = k;
                }
            }
        }
        let rg = xs.iter().any(|x| self.rg(*x));
        Ok(self.push(acc, Op::Max(xs.to_vec(), arg), rg))
    }

    /// Scalar cosine similarity, defined as 0 when either side is zero.
    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var> {
        let (at, bt) = (self.value(a), self.value(b));
        if at.len() != bt.len() {
            return Err(shape_err("cosine", at, bt));
        }
        let c = tensor::cosine(at.data(), bt.data());
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::scalar(c), Op::Cosine(a, b), rg))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (at, bt) = (self.value(a), self.value(b));
        if at.len() != bt.len() {
            return Err(shape_err("dot", at, bt));
        }
        let d = tensor::dot(at.data(), bt.data());
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::scalar(d), Op::Dot(a, b), rg))
    }

    /// Inverted dropout. Identity when `training` is false or `rate` is 0.
    pub fn dropout<R: Rng>(&mut self, x: Var, rate: f64, rng: &mut R, training: bool) -> Result<Var> {
        check_rate(rate)?;
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let mask = dropout_mask(self.value(x).shape(), rate, rng)?;
        let m = self.constant(mask);
        self.mul(x, m)
    }

    /// Propagates d`loss`/d(everything) back through the tape.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if !lt.is_scalar() {
            return Err(Error::invalid(format!("backward needs a scalar loss, got shape {:?}", lt.shape())));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        let mut out: Vec<Option<Tensor>> = vec![None; self.params.len()];

        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
            if let Some(g) = grads[v.0].as_mut() {
                f(g);
            }
        }

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            // lazily allocate zeroed buffers for inputs that need gradient
            let ensure = |grads: &mut Vec<Option<Vec<f64>>>, v: Var| -> bool {
                if !self.nodes[v.0].requires_grad {
                    return false;
                }
                if grads[v.0].is_none() {
                    grads[v.0] = Some(vec![0.0; self.value(v).len()]);
                }
                true
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    let slot = out[id.0]
                        .get_or_insert_with(|| Tensor::zeros(self.params.get(*id).shape()).expect("valid shape"));
                    for (s, x) in slot.data_mut().iter_mut().zip(&g) {
                        *s += x;
                    }
                }
                Op::Row(id, r) => {
                    let slot = out[id.0]
                        .get_or_insert_with(|| Tensor::zeros(self.params.get(*id).shape()).expect("valid shape"));
                    for (s, x) in slot.row_mut(*r).iter_mut().zip(&g) {
                        *s += x;
                    }
                }
                Op::MatMul(a, b) => {
                    let (at, bt) = (self.value(*a), self.value(*b));
                    let (m, n) = (at.shape()[0], at.shape()[1]);
                    let k = bt.len() / n;
                    if ensure(&mut grads, *a) {
                        let bd = bt.data();
                        acc(&mut grads, *a, |ga| {
                            for i in 0..m {
                                for c in 0..k {
                                    let gi = g[i * k + c];
                                    if gi == 0.0 {
                                        continue;
                                    }
                                    for j in 0..n {
                                        ga[i * n + j] += gi * bd[j * k + c];
                                    }
                                }
                            }
                        });
                    }
                    if ensure(&mut grads, *b) {
                        let ad = at.data();
                        acc(&mut grads, *b, |gb| {
                            for i in 0..m {
                                for c in 0..k {
                                    let gi = g[i * k + c];
                                    if gi == 0.0 {
                                        continue;
                                    }
                                    for j in 0..n {
                                        gb[j * k + c] += ad[i * n + j] * gi;
                                    }
                                }
                            }
                        });
                    }
                }
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        if ensure(&mut grads, v) {
                            acc(&mut grads, v, |gv| add_into(gv, &g));
                        }
                    }
                }
                Op::Sub(a, b) => {
                    if ensure(&mut grads, *a) {
                        acc(&mut grads, *a, |gv| add_into(gv, &g));
                    }
                    if ensure(&mut grads, *b) {
                        acc(&mut grads, *b, |gv| gv.iter_mut().zip(&g).for_each(|(s, x)| *s -= x));
                    }
                }
                Op::Mul(a, b) => {
                    let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                    if ensure(&mut grads, *a) {
                        acc(&mut grads, *a, |gv| {
                            for ((s, x), y) in gv.iter_mut().zip(&g).zip(bd) {
                                *s += x * y;
                            }
                        });
                    }
                    if ensure(&mut grads, *b) {
                        acc(&mut grads, *b, |gv| {
                            for ((s, x), y) in gv.iter_mut().zip(&g).zip(ad) {
                                *s += x * y;
                            }
                        });
                    }
                }
                Op::Scale(a, c) => {
                    if ensure(&mut grads, *a) {
                        acc(&mut grads, *a, |gv| gv.iter_mut().zip(&g).for_each(|(s, x)| *s += c * x));
                    }
                }
                Op::OneMinus(a) => {
                    if ensure(&mut grads, *a) {
                        acc(&mut grads, *a, |gv| gv.iter_mut().zip(&g).for_each(|(s, x)| *s -= x));
                    }
                }
                Op::Sigmoid(a) | Op::Tanh(a) | Op::Relu(a) => {
                    if ensure(&mut grads, *a) {
                        let y = self.value(Var(idx)).data();
                        let x = self.value(*a).data();
                        let op = &node.op;
                        acc(&mut grads, *a, |gv| {
                            for i in 0..gv.len() {
                                let d = match op {
                                    Op::Sigmoid(_) => y[i] * (1.0 - y[i]),
                                    Op::Tanh(_) => 1.0 - y[i] * y[i],
                                    _ => {
                                        if x[i] > 0.0 {
                                            1.0
                                        } else {
                                            0.0
                                        }
                                    }
                                };
                                gv[i] += g[i] * d;
                            }
                        });
                    }
                }
                Op::Concat(xs) => {
                    let mut off = 0;
                    for v in xs {
                        let n = self.value(*v).len();
                        if ensure(&mut grads, *v) {
                            acc(&mut grads, *v, |gv| add_into(gv, &g[off..off + n]));
                        }
                        off += n;
                    }
                }
                Op::Sum(xs) | Op::Mean(xs) => {
                    let c = if matches!(node.op, Op::Mean(_)) { 1.0 / xs.len() as f64 } else { 1.0 };
                    for v in xs {
                        if ensure(&mut grads, *v) {
                            acc(&mut grads, *v, |gv| gv.iter_mut().zip(&g).for_each(|(s, x)| *s += c * x));
                        }
                    }
                }
                Op::Max(xs, arg) => {
                    for (k, v) in xs.iter().enumerate() {
                        if ensure(&mut grads, *v) {
                            acc(&mut grads, *v, |gv| {
                                for (i, s) in gv.iter_mut().enumerate() {
                                    if arg[i] == k {
                                        *s += g[i];
                                    }
                                }
                            });
                        }
                    }
                }
                Op::Cosine(a, b) => {
                    let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                    let (na, nb) = (tensor::norm(ad), tensor::norm(bd));
                    if na > 0.0 && nb > 0.0 {
                        let c = tensor::dot(ad, bd) / (na * nb);
                        let g0 = g[0];
                        if ensure(&mut grads, *a) {
                            acc(&mut grads, *a, |gv| {
                                for i in 0..gv.len() {
                                    gv[i] += g0 * (bd[i] / (na * nb) - c * ad[i] / (na * na));
                                }
                            });
                        }
                        if ensure(&mut grads, *b) {
                            acc(&mut grads, *b, |gv| {
                                for i in 0..gv.len() {
                                    gv[i] += g0 * (ad[i] / (na * nb) - c * bd[i] / (nb * nb));
                                }
                            });
                        }
                    }
                }
                Op::Dot(a, b) => {
                    let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                    let g0 = g[0];
                    if ensure(&mut grads, *a) {
                        acc(&mut grads, *a, |gv| gv.iter_mut().zip(bd).for_each(|(s, y)| *s += g0 * y));
                    }
                    if ensure(&mut grads, *b) {
                        acc(&mut grads, *b, |gv| gv.iter_mut().zip(ad).for_each(|(s, x)| *s += g0 * x));
                    }
                }
            }
        }
        Ok(Gradients { grads: out })
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    Ok(())
}

fn dropout_mask<R: Rng>(shape: &[usize], rate: f64, rng: &mut R) -> Result<Tensor> {
    let keep = 1.0 / (1.0 - rate);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect();
    Tensor::new(shape.to_vec(), data)
}

/// Inverted dropout on a plain tensor.
pub fn dropout<R: Rng>(x: &Tensor, rate: f64, rng: &mut R, training: bool) -> Result<Tensor> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.shape(), rate, rng)?;
    let data = x.data().iter().zip(mask.data()).map(|(a, m)| a * m).collect();
    Tensor::new(x.shape().to_vec(), data)
}
