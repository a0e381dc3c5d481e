//! Embeddings of a pattern graph into a complete host that avoid an
//! adversarial set mapping.
//!
//! Given a pattern `G` and a mapping `f` that assigns to every edge `e` of the
//! complete host on `0..N` a vertex set `f(e)` disjoint from `e`, the crate finds
//! an injection `φ` of `G` into the host such that `f(φ(e))` misses every image
//! vertex, for every edge `e` of `G`.
//!
//! - [`graphs`]: patterns, generators, padding, and the dyadic block plan.
//! - [`mappings`]: set mappings (dense or lazily evaluated), generators, the
//!   `ℓ = 2 → ℓ = 1` reduction, and the well-loaded vertex set.
//! - [`embedder`]: the randomized partition, pruning, and the greedy block
//!   embedder, assembled into [`embedder::embed_pipeline`].
//! - [`lll`]: resampling embedder for hypergraphs with bounded degree.
//! - [`oracle`]: exhaustive search, lower-bound certificates, and scans.
//! - [`cli`]: the batch front end behind the `setmap` binary.
//!
//! Runnable walkthroughs live in `examples/`.

pub mod cli;
pub mod embedder;
pub mod graphs;
pub mod lll;
pub mod mappings;
pub mod oracle;
pub mod seed;
pub mod stats;

pub use embedder::{embed_pipeline, verify_clean, EmbedError, Embedding, PipelineConfig, PipelineReport};
pub use graphs::{degree_order, dyadic_plan, generate, pad, parse_pattern, serialize_pattern, Pattern, PatternSpec};
pub use mappings::{parse_mapping, serialize_mapping, well_loaded, SetMapping, Storage};
