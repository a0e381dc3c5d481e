//! Samples pools for one mapping many times and reports how often each of the
//! concentration properties holds, with Wilson intervals.
//!
//! cargo run --release --example property_statistics

use setmap::embedder::Instance;
use setmap::graphs::{generate, PatternSpec};
use setmap::mappings::{gen_uniform_disjoint, Storage};
use setmap::stats::Proportion;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pattern = generate(&PatternSpec::Random { n: 30, m: 64 }, 3)?;
    let f = gen_uniform_disjoint(64 * 64, 2, 1, 4, Storage::Lazy)?;
    let instance = Instance::prepare(&pattern, &f)?;
    println!("block sizes {:?}, well-loaded {}", instance.plan().block_sizes(), instance.well_loaded().len());

    let table = instance.measure_properties(100, 9)?;
    let show = |name: &str, rate: f64, n: usize| {
        let p = Proportion::new((rate * n as f64).round() as usize, n);
        println!("{name:<12} {:.3}  [{:.3}, {:.3}]", p.rate, p.lower, p.upper);
    };
    show("size window", table.size_rate, table.samples);
    show("pair counts", table.pair_rate, table.samples);
    if let Some(rate) = table.forward_rate {
        show("forward", rate, table.forward_measured);
    }
    show("embedded", table.embed_rate, table.samples);
    Ok(())
}
