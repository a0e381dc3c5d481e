//! Moser-Tardos resampling on a cubic graph, with the event histogram.
//!
//! cargo run --example lll_resampling

use setmap::graphs::{generate, PatternSpec};
use setmap::lll::{default_budget, lll_embed, required_host_size, LllProblem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pattern = generate(&PatternSpec::Regular { n: 12, d: 3 }, 5)?;
    println!("required host size: {}", required_host_size(&pattern)?);

    let problem = LllProblem::auto(&pattern, 5)?;
    let cond = problem.condition();
    println!("e*p*(d+1) = {:.4} (p = {:.5}, d = {}), holds: {}", cond.value, cond.p, cond.d, cond.holds);

    let report = lll_embed(&problem, 17, default_budget(&problem))?;
    println!("{} events, {} resamples, clean: {:?}", report.event_count, report.resamples, report.clean);
    println!(
        "resampled {} collision and {} blocked events",
        report.histogram.collisions, report.histogram.blocked
    );
    println!("assignment: {:?}", report.assignment.unwrap_or_default());
    Ok(())
}
