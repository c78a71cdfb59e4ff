//! Syntax-aware question answering over a knowledge base of triples.

pub mod error;
pub mod numcore;

pub use error::{Error, Result};
pub mod cli;
pub mod dataset;
pub mod deptree;
pub mod edgevec;
pub mod encoders;
pub mod kb;
pub mod matcher;
pub mod pipeline;
pub mod qgraph;
pub mod toy;
pub mod vectors;
