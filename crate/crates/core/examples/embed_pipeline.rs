//! Embeds a small clique into a random set mapping with the block embedder,
//! then checks the copy independently.
//!
//! cargo run --example embed_pipeline

use setmap::embedder::{embed_pipeline, verify_clean, MappingChoice, PipelineConfig};
use setmap::graphs::{generate, PatternSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pattern = generate(&PatternSpec::Clique { n: 6 }, 0)?;
    let cfg = PipelineConfig { c: 64.0, seed: 2024, diagnostics: true, ..Default::default() };

    let (embedding, report) = embed_pipeline(&pattern, MappingChoice::Auto { ell: 2 }, &cfg)?;
    println!("host N = {}, blocks = {}, well-loaded = {}", report.host, report.levels + 1, report.well_loaded);
    println!("retries = {}, rule rejections = {:?}", report.retries, report.rejections);
    for (u, x) in embedding.map.iter().enumerate() {
        println!("  vertex {u} -> host {x}");
    }

    let f = setmap::embedder::auto_mapping(&pattern, 2, &cfg)?;
    let verdict = verify_clean(&pattern, &embedding.map, &f)?;
    println!("clean: {}", verdict.clean);
    Ok(())
}
