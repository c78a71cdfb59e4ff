//! Dense double-precision tensors with tape-based reverse-mode
//! differentiation, initialization, dropout, and Adam.

mod adam;
mod gradcheck;
mod init;
mod params;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::max_fd_rel_error;
pub use init::{derive_seed, xavier_init};
pub use params::{parse_blocks, write_block, MatrixBlock, ParamId, Params};
pub use tape::{dropout, Gradients, Primitive, Tape, Var};
pub use tensor::{cosine, Tensor};

pub(crate) use params::fmt_f64;
pub(crate) use tensor::{dot, sigmoid};
