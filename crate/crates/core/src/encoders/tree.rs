use crate::deptree::DepTree;
use crate::error::{Error, Result};
use crate::numcore::{derive_seed, xavier_init, ParamId, Params, Tape, Tensor, Var};

/// Weights of one gate (or the candidate): `W [H, d_e]`, `U, V [H, H]`, `b [H]`.
#[derive(Clone, Debug)]
pub struct GateParams {
    pub w: ParamId,
    pub u: ParamId,
    pub v: ParamId,
    pub b: ParamId,
}

impl GateParams {
    fn register(params: &mut Params, prefix: &str, edge_dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        let mut mat = |name: &str, cols: usize| -> Result<ParamId> {
            let full = format!("{prefix}.{name}");
            let t = xavier_init(&[hidden, cols], derive_seed(seed, &full))?;
            params.insert(full, t)
        };
        let w = mat("w", edge_dim)?;
        let u = mat("u", hidden)?;
        let v = mat("v", hidden)?;
        let b = params.insert(format!("{prefix}.b"), Tensor::zeros(&[hidden])?)?;
        Ok(Self { w, u, v, b })
    }
}

/// One directional pass. Gates are independent sigmoids:
///
/// ```text
/// g  = σ(W_g x + U_g hL + V_g hR + b_g)      g ∈ {rL, rR, zL, zR, z}
/// ĥ  = tanh(W x + U (rL ⊙ hL) + V (rR ⊙ hR) + b)
/// h  = zL ⊙ hL + zR ⊙ hR + z ⊙ ĥ
/// ```
#[derive(Clone, Debug)]
pub struct TreeGruParams {
    pub r_left: GateParams,
    pub r_right: GateParams,
    pub z_left: GateParams,
    pub z_right: GateParams,
    pub z: GateParams,
    pub cand: GateParams,
    pub edge_dim: usize,
    pub hidden: usize,
}

impl TreeGruParams {
    pub fn register(params: &mut Params, prefix: &str, edge_dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        let mut gate = |name: &str| GateParams::register(params, &format!("{prefix}.{name}"), edge_dim, hidden, seed);
        Ok(Self {
            r_left: gate("r_left")?,
            r_right: gate("r_right")?,
            z_left: gate("z_left")?,
            z_right: gate("z_right")?,
            z: gate("z")?,
            cand: gate("cand")?,
            edge_dim,
            hidden,
        })
    }
}

/// Bottom-up and top-down passes plus the trainable ROOT edge vector.
#[derive(Clone, Debug)]
pub struct TreeGru {
    pub up: TreeGruParams,
    pub down: TreeGruParams,
    pub root_edge: ParamId,
}

impl TreeGru {
    pub fn register(params: &mut Params, prefix: &str, edge_dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        let up = TreeGruParams::register(params, &format!("{prefix}.up"), edge_dim, hidden, seed)?;
        let down = TreeGruParams::register(params, &format!("{prefix}.down"), edge_dim, hidden, seed)?;
        let name = format!("{prefix}.root_edge");
        let root_edge = params.insert(name.clone(), xavier_init(&[edge_dim], derive_seed(seed, &name))?)?;
        Ok(Self { up, down, root_edge })
    }

    pub fn hidden(&self) -> usize {
        self.up.hidden
    }

    pub fn edge_dim(&self) -> usize {
        self.up.edge_dim
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreeDirection {
    /// Children feed their parent: `hL`/`hR` sum the left/right children.
    BottomUp,
    /// The parent feeds its children: the parent state is `hL` for a left
    /// child and `hR` for a right child.
    TopDown,
}

struct BoundGate {
    w: Var,
    u: Var,
    v: Var,
    b: Var,
}

fn bind(tape: &mut Tape<'_>, g: &GateParams) -> BoundGate {
    BoundGate { w: tape.param(g.w), u: tape.param(g.u), v: tape.param(g.v), b: tape.param(g.b) }
}

// W x + U l + V r + b, absent neighbours contribute nothing
fn preact(tape: &mut Tape<'_>, g: &BoundGate, x: Var, left: Option<Var>, right: Option<Var>) -> Result<Var> {
    let mut acc = tape.matmul(g.w, x)?;
    if let Some(l) = left {
        let t = tape.matmul(g.u, l)?;
        acc = tape.add(acc, t)?;
    }
    if let Some(r) = right {
        let t = tape.matmul(g.v, r)?;
        acc = tape.add(acc, t)?;
    }
    tape.add(acc, g.b)
}

fn node_step(
    tape: &mut Tape<'_>,
    gates: &[BoundGate; 6],
    x: Var,
    left: Option<Var>,
    right: Option<Var>,
) -> Result<Var> {
    let [r_left, r_right, z_left, z_right, z, cand] = gates;
    let gate = |tape: &mut Tape<'_>, g: &BoundGate| -> Result<Var> {
        let a = preact(tape, g, x, left, right)?;
        Ok(tape.sigmoid(a))
    };
    let rl = left.map(|_| gate(tape, r_left)).transpose()?;
    let rr = right.map(|_| gate(tape, r_right)).transpose()?;
    let zl = left.map(|_| gate(tape, z_left)).transpose()?;
    let zr = right.map(|_| gate(tape, z_right)).transpose()?;
    let zc = gate(tape, z)?;
    let gated_left = match (rl, left) {
        (Some(r), Some(l)) => Some(tape.mul(r, l)?),
        _ => None,
    };
    let gated_right = match (rr, right) {
        (Some(r), Some(h)) => Some(tape.mul(r, h)?),
        _ => None,
    };
    let c = preact(tape, cand, x, gated_left, gated_right)?;
    let c = tape.tanh(c);
    let mut h = tape.mul(zc, c)?;
    if let (Some(g), Some(l)) = (zl, left) {
        let t = tape.mul(g, l)?;
        h = tape.add(h, t)?;
    }
    if let (Some(g), Some(r)) = (zr, right) {
        let t = tape.mul(g, r)?;
        h = tape.add(h, t)?;
    }
    Ok(h)
}

fn sum_opt(tape: &mut Tape<'_>, xs: Vec<Var>) -> Result<Option<Var>> {
    match xs.len() {
        0 => Ok(None),
        1 => Ok(Some(xs[0])),
        _ => tape.sum(&xs).map(Some),
    }
}

/// Runs one pass; `edges[i]` is the edge input of token `i + 1`. Returns
/// one state per token in surface order.
pub fn tree_gru_pass(
    tape: &mut Tape<'_>,
    tree: &DepTree,
    edges: &[Var],
    p: &TreeGruParams,
    direction: TreeDirection,
) -> Result<Vec<Var>> {
    if edges.len() != tree.len() {
        return Err(Error::invalid(format!("{} edge inputs for a {}-token tree", edges.len(), tree.len())));
    }
    for &e in edges {
        if tape.value(e).shape() != [p.edge_dim] {
            return Err(Error::Shape {
                op: "tree_gru_pass",
                left: vec![p.edge_dim],
                right: tape.value(e).shape().to_vec(),
            });
        }
    }
    let gates = [
        bind(tape, &p.r_left),
        bind(tape, &p.r_right),
        bind(tape, &p.z_left),
        bind(tape, &p.z_right),
        bind(tape, &p.z),
        bind(tape, &p.cand),
    ];
    let mut order = tree.bottom_up_order();
    if direction == TreeDirection::TopDown {
        order.reverse();
    }
    let mut state: Vec<Option<Var>> = vec![None; tree.len() + 1];
    for i in order {
        let (left, right) = match direction {
            TreeDirection::BottomUp => {
                let l: Vec<Var> = tree.left_children(i).iter().map(|&c| state[c].expect("child first")).collect();
                let r: Vec<Var> = tree.right_children(i).iter().map(|&c| state[c].expect("child first")).collect();
                (sum_opt(tape, l)?, sum_opt(tape, r)?)
            }
            TreeDirection::TopDown => {
                let head = tree.head(i);
                if head == 0 {
                    (None, None)
                } else {
                    let parent = state[head].expect("parent first");
                    if i < head {
                        (Some(parent), None)
                    } else {
                        (None, Some(parent))
                    }
                }
            }
        };
        state[i] = Some(node_step(tape, &gates, edges[i - 1], left, right)?);
    }
    Ok(state.into_iter().skip(1).map(|s| s.expect("every node visited")).collect())
}
