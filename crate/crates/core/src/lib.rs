//! Word alignment from fine-tuned contextual embeddings.
//!
//! An encoder is trained so that links proposed by external aligners get high
//! bidirectional softmax probability over the cosine similarity matrix; links
//! are then predicted where both directions clear a threshold.

pub mod alignment;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod integrate;
pub mod io;
pub mod matrix;
pub mod objective;
pub mod pipeline;
pub mod simmat;

pub use alignment::{AlignmentSet, GoldAlignment, Granularity, Link, SubwordMap, TokenSentencePair};
pub use error::{AlignError, Result};
pub use matrix::Matrix;
