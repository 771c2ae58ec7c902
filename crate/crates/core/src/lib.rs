//! Peptide sequence/structure multi-view pretraining.
//!
//! The pipeline: parse Cα traces ([`ingest`]), build relational residue
//! graphs ([`graph`]), encode both views ([`encoders`]), align them with
//! contrastive and variational reconstruction objectives ([`ssl`]), train
//! ([`train`]) and evaluate frozen sequence embeddings ([`downstream`]).

pub mod downstream;
pub mod encoders;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod nn;
pub mod oracle;
pub mod ssl;
pub mod synthetic;
pub mod tensor;
pub mod train;

pub use error::{ContainerError, Error, Result};
pub use tensor::Tensor;
