//! The guide's chapters, compiled as doc-tests.
//!
//! mdbook cannot run book snippets against crate dependencies, so each
//! chapter from `book/src/` is included here as module documentation.
//! `cargo test --doc` then builds and runs every fenced Rust block exactly
//! as the book prints it, which keeps the guide and the code in lockstep.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/corpus.md")]
pub mod corpus {}

#[doc = include_str!("../../../book/src/rules.md")]
pub mod rules {}

#[doc = include_str!("../../../book/src/markov.md")]
pub mod markov {}

#[doc = include_str!("../../../book/src/wire.md")]
pub mod wire {}

#[doc = include_str!("../../../book/src/detection.md")]
pub mod detection {}

#[doc = include_str!("../../../book/src/respond.md")]
pub mod respond {}

#[doc = include_str!("../../../book/src/stats.md")]
pub mod stats {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
