//! Dominion play-trace analysis: log parsing, deck replay, four trace
//! encodings, Barnes-Hut t-SNE embeddings, a strategy simulator for labeled
//! corpora, and SVG figure rendering.

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cards;
pub mod encode;
pub mod error;
pub mod log_io;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod replay;
pub mod seed;
pub mod synth;
pub mod tsne;
pub mod viz;

pub use error::{Error, Result};
