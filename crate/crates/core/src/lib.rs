//! Query-paraphrasing text-to-video search.
//!
//! A user query is expanded into text rewrites, generated images and captions
//! of those images ([`paraphrase`]). Each paraphrase is checked against
//! question/answer pairs derived from the user query and only the
//! best-aligned ones are kept ([`verification`]). Surviving queries are scored
//! against a precomputed video embedding store ([`index`]), averaged per
//! transformation and fused with the user query's score list ([`ensemble`]).
//! Rankings are evaluated with stratified inferred AP, median rank and a
//! paired randomization test ([`eval`]).
//!
//! All generative and encoding models sit behind [`gateway::Provider`]; the
//! deterministic stub mode makes every pipeline run reproducible offline.

pub mod ensemble;
pub mod error;
pub mod eval;
pub mod gateway;
pub mod index;
pub mod paraphrase;
pub mod pipeline;
pub mod verification;

mod fsutil;

pub use error::{Error, Result};
