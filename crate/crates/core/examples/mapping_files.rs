//! Patterns and mappings as text files: write, read back, evaluate.
//!
//! cargo run --example mapping_files

use setmap::graphs::{generate, parse_pattern, serialize_pattern, PatternSpec};
use setmap::mappings::{gen_uniform_disjoint, parse_mapping, serialize_mapping, well_loaded, Storage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cycle = generate(&PatternSpec::Cycle { n: 5 }, 0)?;
    let text = serialize_pattern(&cycle);
    print!("{text}");
    assert_eq!(parse_pattern(&text)?, cycle);

    let f = gen_uniform_disjoint(7, 2, 2, 99, Storage::Dense)?;
    let text = serialize_mapping(&f)?;
    print!("{text}");
    let back = parse_mapping(&text)?;
    assert_eq!(back, f);
    println!("f(2,5) = {:?}", back.eval(&[2, 5])?);

    let x = well_loaded(&back);
    println!("well-loaded (load <= {}): {:?}", x.threshold, x.members);
    Ok(())
}
