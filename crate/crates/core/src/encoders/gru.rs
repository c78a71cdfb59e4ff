use crate::error::{Error, Result};
use crate::numcore::{derive_seed, xavier_init, ParamId, Params, Tape, Tensor, Var};

/// One GRU direction:
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// h~ = tanh(W_h x + U_h (r ⊙ h) + b_h)
/// h' = (1 - z) ⊙ h + z ⊙ h~
/// ```
#[derive(Clone, Debug)]
pub struct GruParams {
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub b_h: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl GruParams {
    /// Xavier matrices, zero biases; names are `prefix.w_z` etc.
    pub fn register(params: &mut Params, prefix: &str, input: usize, hidden: usize, seed: u64) -> Result<Self> {
        let mut mat = |name: &str, rows: usize, cols: usize| -> Result<ParamId> {
            let full = format!("{prefix}.{name}");
            let t = xavier_init(&[rows, cols], derive_seed(seed, &full))?;
            params.insert(full, t)
        };
        let w_z = mat("w_z", hidden, input)?;
        let u_z = mat("u_z", hidden, hidden)?;
        let w_r = mat("w_r", hidden, input)?;
        let u_r = mat("u_r", hidden, hidden)?;
        let w_h = mat("w_h", hidden, input)?;
        let u_h = mat("u_h", hidden, hidden)?;
        let mut bias = |name: &str| params.insert(format!("{prefix}.{name}"), Tensor::zeros(&[hidden])?);
        Ok(Self {
            w_z,
            u_z,
            b_z: bias("b_z")?,
            w_r,
            u_r,
            b_r: bias("b_r")?,
            w_h,
            u_h,
            b_h: bias("b_h")?,
            input,
            hidden,
        })
    }
}

struct Bound {
    w_z: Var,
    u_z: Var,
    b_z: Var,
    w_r: Var,
    u_r: Var,
    b_r: Var,
    w_h: Var,
    u_h: Var,
    b_h: Var,
}

fn bind(tape: &mut Tape<'_>, p: &GruParams) -> Bound {
    Bound {
        w_z: tape.param(p.w_z),
        u_z: tape.param(p.u_z),
        b_z: tape.param(p.b_z),
        w_r: tape.param(p.w_r),
        u_r: tape.param(p.u_r),
        b_r: tape.param(p.b_r),
        w_h: tape.param(p.w_h),
        u_h: tape.param(p.u_h),
        b_h: tape.param(p.b_h),
    }
}

fn affine(tape: &mut Tape<'_>, w: Var, x: Var, u: Var, h: Var, b: Var) -> Result<Var> {
    let wx = tape.matmul(w, x)?;
    let uh = tape.matmul(u, h)?;
    let s = tape.add(wx, uh)?;
    tape.add(s, b)
}

fn step(tape: &mut Tape<'_>, p: &Bound, x: Var, h: Var) -> Result<Var> {
    let z = affine(tape, p.w_z, x, p.u_z, h, p.b_z)?;
    let z = tape.sigmoid(z);
    let r = affine(tape, p.w_r, x, p.u_r, h, p.b_r)?;
    let r = tape.sigmoid(r);
    let rh = tape.mul(r, h)?;
    let cand = affine(tape, p.w_h, x, p.u_h, rh, p.b_h)?;
    let cand = tape.tanh(cand);
    let keep = tape.one_minus(z);
    let old = tape.mul(keep, h)?;
    let new = tape.mul(z, cand)?;
    tape.add(old, new)
}

/// Runs one direction over `inputs` from a zero state; returns every
/// hidden state in input order.
pub fn gru_run(tape: &mut Tape<'_>, p: &GruParams, inputs: &[Var]) -> Result<Vec<Var>> {
    let bound = bind(tape, p);
    let mut h = tape.constant(Tensor::zeros(&[p.hidden])?);
    let mut out = Vec::with_capacity(inputs.len());
    for &x in inputs {
        if tape.value(x).shape() != [p.input] {
            return Err(Error::Shape { op: "gru_step", left: vec![p.input], right: tape.value(x).shape().to_vec() });
        }
        h = step(tape, &bound, x, h)?;
        out.push(h);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct BiGru {
    pub fwd: GruParams,
    pub bwd: GruParams,
}

impl BiGru {
    pub fn register(params: &mut Params, prefix: &str, input: usize, hidden: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            fwd: GruParams::register(params, &format!("{prefix}.fwd"), input, hidden, seed)?,
            bwd: GruParams::register(params, &format!("{prefix}.bwd"), input, hidden, seed)?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden
    }

    pub fn input(&self) -> usize {
        self.fwd.input
    }
}

/// `[last forward state ; last backward state]`, a `2H` vector.
pub fn bigru_encode(tape: &mut Tape<'_>, p: &BiGru, inputs: &[Var]) -> Result<Var> {
    if inputs.is_empty() {
        return Err(Error::invalid("bigru_encode needs at least one input"));
    }
    let fwd = gru_run(tape, &p.fwd, inputs)?;
    let rev: Vec<Var> = inputs.iter().rev().copied().collect();
    let bwd = gru_run(tape, &p.bwd, &rev)?;
    tape.concat(&[*fwd.last().expect("nonempty"), *bwd.last().expect("nonempty")])
}
