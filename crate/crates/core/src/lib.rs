pub mod corpus;
pub mod distsup;
pub mod encoder;
pub mod error;
pub mod evalmetrics;
pub mod io;
pub mod pipeline;
pub mod rerank;
pub mod retrieval;
pub mod synthetic;
pub mod textnorm;
pub mod training;

pub use error::{Error, Result};
