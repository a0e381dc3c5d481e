//! An overlapping mapping (each edge may map to a set touching it) is reduced
//! to a disjoint one; clean copies for the reduction avoid the original.
//!
//! cargo run --example reduction_f_free

use setmap::graphs::{generate, PatternSpec};
use setmap::mappings::{gen_random_incident_edge, reduce_to_disjoint, Storage};
use setmap::oracle::{find_clean_copy, find_f_free_copy, is_f_free, SearchLimits};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = generate(&PatternSpec::Path { n: 4 }, 0)?;
    let f = gen_random_incident_edge(9, 11, Storage::Dense)?;
    let g = reduce_to_disjoint(&f)?;
    println!("f: {:?}\ng: {:?}", f.info(), g.info());

    let limits = SearchLimits::default();
    let direct = find_f_free_copy(&path, &f, &limits)?;
    println!("first f-free copy: {:?} ({} nodes)", direct.embedding, direct.nodes);

    if let Some(phi) = find_clean_copy(&path, &g, &limits)?.embedding {
        println!("clean for g: {phi:?}, f-free for f: {}", is_f_free(&path, &phi, &f));
    }
    Ok(())
}
