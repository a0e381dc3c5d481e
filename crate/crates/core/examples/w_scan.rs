//! How often a random one-vertex-per-edge mapping admits a clean triangle,
//! as the host grows.
//!
//! cargo run --release --example w_scan

use setmap::graphs::{generate, PatternSpec};
use setmap::oracle::{scan_w, SearchLimits};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let triangle = generate(&PatternSpec::Clique { n: 3 }, 0)?;
    let hosts: Vec<u32> = (3..=10).collect();
    let table = scan_w(&triangle, &hosts, 1, 200, 42, &SearchLimits::default())?;
    println!("{:>3}  {:>6}  {:>15}  {:>8}", "N", "admits", "95% interval", "nodes");
    for row in &table.rows {
        println!(
            "{:>3}  {:>6.3}  [{:.3}, {:.3}]  {:>8.1}",
            row.host, row.admits.rate, row.admits.lower, row.admits.upper, row.mean_nodes
        );
    }
    Ok(())
}
