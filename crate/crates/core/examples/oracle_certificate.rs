//! Finds a set mapping with no clean triangle on three host vertices, writes
//! the certificate as text, and replays it.
//!
//! cargo run --example oracle_certificate

use setmap::graphs::{generate, PatternSpec};
use setmap::oracle::{certify_lower_bound, verify_certificate, Certificate, CertificateKind, SearchLimits};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let triangle = generate(&PatternSpec::Clique { n: 3 }, 0)?;
    let limits = SearchLimits::default();
    let outcome = certify_lower_bound(&triangle, 3, CertificateKind::W, 1, 10, 1, &limits)?;
    let cert = outcome.certificate.expect("three vertices cannot host a clean triangle");
    let text = cert.to_text();
    print!("{text}");

    let replayed = Certificate::parse(&text)?;
    let check = verify_certificate(&replayed, &limits)?;
    println!("replay holds: {}, node count reproduced: {}", check.holds, check.nodes_match);
    Ok(())
}
