//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always reach the
//! terminal. Pass a substring to run only the matching criteria.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use setmap::embedder::{embed_pipeline, verify_clean, Instance, MappingChoice, PipelineConfig};
use setmap::graphs::{generate, Pattern, PatternSpec};
use setmap::lll::{lll_condition, moser_tardos, LllProblem};
use setmap::mappings::{gen_random_incident_edge, gen_uniform_disjoint, reduce_to_disjoint, SetMapping, Storage};
use setmap::oracle::{find_clean_copy, SearchLimits};
use setmap::seed::{derive_seed, rng_from, stream};

/// Criteria expected to fail; they still print FAIL but do not fail the run.
/// The analysis is in the README.
const KNOWN_RED: &[&str] = &["property-statistics"];

struct Verdict {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, Duration, fn() -> Verdict);

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: Vec<Criterion> = vec![
        ("soundness", Duration::from_secs(300), soundness),
        ("oracle-equivalence", Duration::from_secs(120), oracle_equivalence),
        ("forced-certificate", Duration::from_secs(1), forced_certificate),
        ("desk-scale-pipeline", Duration::from_secs(600), desk_scale),
        ("property-statistics", Duration::from_secs(300), property_statistics),
        ("lll-suite", Duration::from_secs(180), lll_suite),
        ("reduction-check", Duration::from_secs(120), reduction_check),
        ("determinism", Duration::from_secs(300), determinism),
    ];
    let mut unexpected = 0;
    for (name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let verdict = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = verdict.pass && in_time;
        let mut tag = if pass { "PASS" } else { "FAIL" }.to_string();
        if !pass && KNOWN_RED.contains(&name) {
            tag.push_str(" (known red)");
        } else if !pass {
            unexpected += 1;
        }
        let time_note = if in_time { String::new() } else { format!(" [over budget {:.0}s]", budget.as_secs_f64()) };
        println!("{tag} {name} ({:.1}s){time_note}: {}", elapsed.as_secs_f64(), verdict.detail);
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// Independent helpers
// ---------------------------------------------------------------------------

/// Degree order recomputed here: non-increasing degree, ties by id.
fn order_of(p: &Pattern) -> Vec<usize> {
    let mut deg = vec![0usize; p.n()];
    for e in p.edges() {
        for &v in e {
            deg[v] += 1;
        }
    }
    let mut order: Vec<usize> = (0..p.n()).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(deg[v]), v));
    order
}

fn image(f: &SetMapping, phi: &[u32], e: &[usize]) -> Vec<u32> {
    let mut h: Vec<u32> = e.iter().map(|&v| phi[v]).collect();
    h.sort_unstable();
    f.eval(&h).unwrap()
}

fn naive_clean(p: &Pattern, f: &SetMapping, phi: &[u32]) -> bool {
    p.edges().iter().all(|e| image(f, phi, e).iter().all(|z| !phi.contains(z)))
}

fn naive_f_free(p: &Pattern, f: &SetMapping, phi: &[u32]) -> bool {
    let copy: Vec<Vec<u32>> = p
        .edges()
        .iter()
        .map(|e| {
            let mut h: Vec<u32> = e.iter().map(|&v| phi[v]).collect();
            h.sort_unstable();
            h
        })
        .collect();
    p.edges().iter().all(|e| !copy.contains(&image(f, phi, e)))
}

/// Every injective map, as tuples in degree order, in lexicographic order.
fn for_each_injection(p: &Pattern, host: u32, mut visit: impl FnMut(&[u32]) -> bool) {
    let order = order_of(p);
    let mut tuple = vec![0u32; p.n()];
    let mut phi = vec![0u32; p.n()];
    fn rec(
        depth: usize,
        host: u32,
        order: &[usize],
        tuple: &mut Vec<u32>,
        phi: &mut Vec<u32>,
        visit: &mut dyn FnMut(&[u32]) -> bool,
    ) -> bool {
        if depth == order.len() {
            return visit(phi);
        }
        for x in 0..host {
            if tuple[..depth].contains(&x) {
                continue;
            }
            tuple[depth] = x;
            phi[order[depth]] = x;
            if rec(depth + 1, host, order, tuple, phi, visit) {
                return true;
            }
        }
        false
    }
    rec(0, host, &order, &mut tuple, &mut phi, &mut visit);
}

/// First clean copy by full enumeration, no pruning.
fn naive_first_clean(p: &Pattern, f: &SetMapping) -> Option<Vec<u32>> {
    let mut found = None;
    for_each_injection(p, f.host(), |phi| {
        if naive_clean(p, f, phi) {
            found = Some(phi.to_vec());
            true
        } else {
            false
        }
    });
    found
}

fn all_graphs(n: usize) -> Vec<Pattern> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    (1u32..1 << pairs.len())
        .map(|mask| {
            let chosen: Vec<_> = pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e).collect();
            Pattern::graph(n, &chosen).unwrap()
        })
        .collect()
}

fn random_pattern(rng: &mut impl Rng, max_n: usize) -> Pattern {
    let n = rng.gen_range(2..=max_n);
    let max_m = n * (n - 1) / 2;
    let m = rng.gen_range(n.div_ceil(2)..=max_m);
    generate(&PatternSpec::Random { n, m }, rng.gen()).unwrap()
}

fn is_injective(phi: &[u32]) -> bool {
    let mut s = phi.to_vec();
    s.sort_unstable();
    s.windows(2).all(|w| w[0] != w[1])
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

fn soundness() -> Verdict {
    let mut rng = rng_from(0x5eed_0001);
    let (mut pipeline, mut resampling, mut oracle, mut violations) = (0, 0, 0, 0);
    let mut check = |p: &Pattern, phi: &[u32], f: &SetMapping| {
        let ok = phi.len() == p.n() && is_injective(phi) && naive_clean(p, f, phi);
        let lib = verify_clean(p, phi, f).map(|v| v.clean).unwrap_or(false);
        if !(ok && lib) {
            violations += 1;
        }
    };
    for case in 0..1000u64 {
        let p = random_pattern(&mut rng, 12);
        let ell = rng.gen_range(1..=2);
        let seed = derive_seed(0x5eed, stream::TRIAL, case);

        let f = gen_uniform_disjoint((64 * ell * p.m()) as u32, 2, ell, seed, Storage::Lazy).unwrap();
        let cfg = PipelineConfig { seed, ..Default::default() };
        if let Ok((emb, _)) = embed_pipeline(&p, MappingChoice::Given(&f), &cfg) {
            pipeline += 1;
            check(&p, &emb.map, &f);
        }

        let problem = LllProblem::auto(&p, seed).unwrap();
        if let Ok(run) = moser_tardos(&problem, seed, 100 * problem.event_count()) {
            resampling += 1;
            check(&p, &run.assignment, problem.mapping());
        }

        let small = random_pattern(&mut rng, 6);
        let host = rng.gen_range((small.n() as u32).max(2 + ell as u32)..=12);
        let g = gen_uniform_disjoint(host, 2, ell, seed, Storage::Dense).unwrap();
        if let Some(phi) = find_clean_copy(&small, &g, &SearchLimits::default()).unwrap().embedding {
            oracle += 1;
            check(&small, &phi, &g);
        }
    }
    Verdict {
        pass: violations == 0,
        detail: format!(
            "1000 cases; checked {pipeline} pipeline, {resampling} resampling, {oracle} oracle embeddings; {violations} violations"
        ),
    }
}

fn oracle_equivalence() -> Verdict {
    let (mut instances, mut with_copy, mut disagreements) = (0, 0, 0);
    for n in 2..=4 {
        for p in all_graphs(n) {
            for host in (n as u32).max(3)..=8 {
                for t in 0..100u64 {
                    let seed = derive_seed(host as u64 * 1000 + n as u64, stream::MAPPING, t);
                    let f = gen_uniform_disjoint(host, 2, 1, seed, Storage::Dense).unwrap();
                    let fast = find_clean_copy(&p, &f, &SearchLimits::default()).unwrap().embedding;
                    let slow = naive_first_clean(&p, &f);
                    instances += 1;
                    with_copy += usize::from(slow.is_some());
                    disagreements += usize::from(fast != slow);
                }
            }
        }
    }
    Verdict {
        pass: disagreements == 0,
        detail: format!("{instances} instances ({with_copy} with a clean copy), {disagreements} disagreements"),
    }
}

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_setmap"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("setmap-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Runs the binary, returning (exit code, bytes of `--out`).
fn run_cli(args: &[&str], out: &PathBuf) -> (i32, Vec<u8>) {
    let status = Command::new(bin())
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SETMAP_OUT_DIR")
        .output()
        .expect("binary runs");
    let bytes = std::fs::read(out).unwrap_or_default();
    (status.status.code().unwrap_or(-1), bytes)
}

fn forced_certificate() -> Verdict {
    let args = ["certify", "--pattern", "clique:3", "--N", "3", "--ell", "1", "--kind", "w", "--trials", "1", "--seed", "1"];
    let (code, first) = run_cli(&args, &scratch("certify-1.json"));
    let (_, second) = run_cli(&args, &scratch("certify-2.json"));
    let doc: serde_json::Value = serde_json::from_slice(&first).unwrap_or_default();
    let found = doc["found"] == true && doc["trials_run"] == 1;
    let cert_path = scratch("k3.cert");
    std::fs::write(&cert_path, doc["certificate"].as_str().unwrap_or("")).unwrap();
    let (replay_code, replay) = run_cli(&["certify", "--replay", cert_path.to_str().unwrap()], &scratch("replay.json"));
    let replay: serde_json::Value = serde_json::from_slice(&replay).unwrap_or_default();
    let replays = replay_code == 0 && replay["holds"] == true && replay["nodes_match"] == true;
    Verdict {
        pass: code == 0 && found && first == second && replays,
        detail: format!(
            "exit {code}, found on trial {}, identical rerun {}, replay holds {}",
            doc["trials_run"],
            first == second,
            replays
        ),
    }
}

fn desk_scale() -> Verdict {
    let graphs = [
        ("K14", PatternSpec::Clique { n: 14 }),
        ("K10,10", PatternSpec::Bipartite { left: 10, right: 10 }),
        ("P101", PatternSpec::Path { n: 101 }),
        ("random(40,100)", PatternSpec::Random { n: 40, m: 100 }),
    ];
    let mut lines = Vec::new();
    let mut pass = true;
    for (gi, (name, spec)) in graphs.iter().enumerate() {
        let p = generate(spec, derive_seed(0xdeca, stream::PATTERN, gi as u64)).unwrap();
        let mut rates = Vec::new();
        for c in [16.0, 64.0, 256.0] {
            let host = (c * 2.0 * p.m() as f64).ceil() as u32;
            let f = gen_uniform_disjoint(host, 2, 2, derive_seed(0xdeca, stream::MAPPING, gi as u64), Storage::Lazy).unwrap();
            let instance = Instance::prepare(&p, &f).unwrap();
            let (mut ok, mut dirty) = (0, 0);
            for s in 0..50u64 {
                let cfg = PipelineConfig { c, seed: derive_seed(0xdeca, stream::TRIAL, s), ..Default::default() };
                if let Ok((emb, _)) = instance.run(&cfg) {
                    ok += 1;
                    if !(is_injective(&emb.map) && naive_clean(&p, &f, &emb.map)) {
                        dirty += 1;
                    }
                }
            }
            if c == 256.0 && (ok < 48 || dirty > 0) {
                pass = false;
            }
            rates.push(format!("C={c}: {ok}/50{}", if dirty > 0 { format!(" ({dirty} dirty)") } else { String::new() }));
        }
        lines.push(format!("{name} [{}]", rates.join(", ")));
    }
    Verdict { pass, detail: lines.join("; ") }
}

fn property_statistics() -> Verdict {
    let p = generate(&PatternSpec::Random { n: 100, m: 400 }, 11).unwrap();
    let ell = 2;
    let f = gen_uniform_disjoint((64 * ell * p.m()) as u32, 2, ell, 12, Storage::Lazy).unwrap();
    let table = Instance::prepare(&p, &f).unwrap().measure_properties(200, 13).unwrap();
    let pass = table.size_rate >= 0.9 && table.pair_rate >= 7.0 / 16.0;
    let mut ratios: Vec<f64> = table.rows.iter().map(|r| r.pair_max_ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let within_25 = ratios.iter().filter(|&&r| r <= 25.0).count();
    Verdict {
        pass,
        detail: format!(
            "m=400, N={}, 200 samples: size window {:.3} (need >= 0.9), pair counts {:.3} (need >= 0.4375; median worst ratio {:.1}, {within_25}/200 within 25x), forward images {}, embedder {:.3}",
            f.host(),
            table.size_rate,
            table.pair_rate,
            ratios[ratios.len() / 2],
            table.forward_rate.map(|r| format!("{r:.3}")).unwrap_or_else(|| "n/a".into()),
            table.embed_rate
        ),
    }
}

fn lll_suite() -> Verdict {
    let edge = Pattern::graph(2, &[(0, 1)]).unwrap();
    let cond = lll_condition(&edge, 80);
    let exact = cond.value == std::f64::consts::E * 0.025 * 13.0 && cond.holds && cond.d == 12;

    let cubic = generate(&PatternSpec::Regular { n: 20, d: 3 }, 21).unwrap();
    let (mut within, mut clean, mut total) = (0, 0, 0u64);
    let mut events = 0;
    for t in 0..50u64 {
        let problem = LllProblem::with_host(&cubic, 2400, derive_seed(21, stream::TRIAL, t)).unwrap();
        events = problem.event_count();
        if let Ok(run) = moser_tardos(&problem, t, 10 * events) {
            within += 1;
            total += run.resamples;
            if is_injective(&run.assignment) && naive_clean(&cubic, problem.mapping(), &run.assignment) {
                clean += 1;
            }
        }
    }
    Verdict {
        pass: exact && within == 50 && clean == 50,
        detail: format!(
            "edge at N=80: e*p*(d+1) = {:.4} holds {}; cubic n=20 N=2400: {within}/50 within {} resamples, {clean}/50 clean, mean {:.1} resamples",
            cond.value,
            cond.holds,
            10 * events,
            total as f64 / within.max(1) as f64
        ),
    }
}

fn reduction_check() -> Verdict {
    let mut rng = rng_from(0x5eed_0007);
    let (mut copies, mut violations) = (0, 0);
    for t in 0..100u64 {
        let n = rng.gen_range(2..=4);
        let graphs = all_graphs(n);
        let p = &graphs[rng.gen_range(0..graphs.len())];
        let host = rng.gen_range((n as u32).max(3)..=10);
        let f = gen_random_incident_edge(host, derive_seed(7, stream::MAPPING, t), Storage::Dense).unwrap();
        let g = reduce_to_disjoint(&f).unwrap();
        for_each_injection(p, host, |phi| {
            if naive_clean(p, &g, phi) {
                copies += 1;
                if !naive_f_free(p, &f, phi) {
                    violations += 1;
                }
            }
            false
        });
    }
    Verdict { pass: violations == 0, detail: format!("100 mappings, {copies} reduced-clean copies, {violations} not f-free") }
}

fn determinism() -> Verdict {
    let commands: Vec<Vec<&str>> = vec![
        vec!["embed", "--pattern", "clique:5", "--mapping", "random:disjoint", "--ell", "2", "--C", "64", "--seed", "7", "--trials", "5", "--diagnostics"],
        vec!["embed", "--pattern", "random:n=20,m=40", "--C", "32", "--seed", "0x2a", "--trials", "5", "--format", "csv"],
        vec!["lll-embed", "--pattern", "regular:n=20,d=3", "--trials", "5", "--seed", "3"],
        vec!["lll-embed", "--pattern", "hyper:k=3,n=6,m=4", "--N-range", "200..400:100", "--trials", "3", "--seed", "3"],
        vec!["oracle", "--pattern", "clique:4", "--N", "10", "--ell", "1", "--seed", "5"],
        vec!["certify", "--pattern", "clique:3", "--N", "3", "--ell", "1", "--kind", "w", "--trials", "1", "--seed", "1"],
        vec!["scan", "--pattern", "clique:3", "--N-range", "3..6", "--trials", "40", "--seed", "9"],
        vec!["measure", "--pattern", "clique:6", "--samples", "20", "--seed", "4"],
        vec!["gen-graph", "--pattern", "random:n=12,m=20", "--seed", "8"],
        vec!["gen-mapping", "--N", "8", "--k", "2", "--ell", "2", "--a", "1", "--seed", "8"],
    ];
    let mut mismatched = Vec::new();
    for (i, args) in commands.iter().enumerate() {
        let (c1, a) = run_cli(args, &scratch(&format!("det-{i}-a")));
        let (c2, b) = run_cli(args, &scratch(&format!("det-{i}-b")));
        if a.is_empty() || a != b || c1 != c2 {
            mismatched.push(args[0]);
        }
    }
    let p = generate(&PatternSpec::Clique { n: 6 }, 0).unwrap();
    let cfg = PipelineConfig { seed: 99, diagnostics: true, ..Default::default() };
    let lib = |_: ()| {
        let (_, report) = embed_pipeline(&p, MappingChoice::Auto { ell: 2 }, &cfg).unwrap();
        serde_json::to_string(&report).unwrap()
    };
    let lib_same = lib(()) == lib(());
    Verdict {
        pass: mismatched.is_empty() && lib_same,
        detail: format!(
            "{} commands rerun, mismatches: {:?}; library report identical: {lib_same}",
            commands.len(),
            mismatched
        ),
    }
}
