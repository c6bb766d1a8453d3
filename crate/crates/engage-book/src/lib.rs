//! Compiles every code block in the book as a doc-test.
//!
//! Each chapter of `book/src/` is included as the documentation of an
//! empty module, so `cargo test -p engage-book --doc` builds and runs
//! all `rust` snippets against the current `engage-core` API. A book
//! example that drifts from the library fails the test suite instead of
//! rotting on the page. Blocks marked `no_run` still must compile.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/skeleton-streams.md")]
pub mod skeleton_streams {}

#[doc = include_str!("../../../book/src/classifier-bank.md")]
pub mod classifier_bank {}

#[doc = include_str!("../../../book/src/svm-training.md")]
pub mod svm_training {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}

#[doc = include_str!("../../../book/src/team-aggregation.md")]
pub mod team_aggregation {}

#[doc = include_str!("../../../book/src/game-simulator.md")]
pub mod game_simulator {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
