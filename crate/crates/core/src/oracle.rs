//! Exhaustive search for clean and `f`-free copies on small hosts, plus
//! lower-bound certificates built from it.
//!
//! Searches assign pattern vertices in degree order, trying host vertices in
//! ascending order, so the first copy found is the lexicographically first
//! one when maps are read as tuples in degree order.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::graphs::{degree_order, parse_pattern, serialize_pattern, GraphError, Pattern};
use crate::mappings::{
    gen_random_disjoint_edge, gen_random_incident_edge, gen_uniform_disjoint, parse_mapping, serialize_mapping,
    MappingError, SetMapping, Storage,
};
use crate::seed::{derive_seed, stream};
use crate::stats::Proportion;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("search too large: n = {n}, N = {host} (limits n <= {max_n}, N <= {max_host})")]
    LimitExceeded { n: usize, host: u32, max_n: usize, max_host: u32 },
    #[error("mapping does not fit the pattern: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error("certificate line {line}: {msg}")]
    Certificate { line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SearchLimits {
    pub max_n: usize,
    pub max_host: u32,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self { max_n: 8, max_host: 16 }
    }
}

impl SearchLimits {
    fn check(&self, p: &Pattern, host: u32) -> Result<(), OracleError> {
        if p.n() > self.max_n || host > self.max_host {
            return Err(OracleError::LimitExceeded { n: p.n(), host, max_n: self.max_n, max_host: self.max_host });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SearchOutcome {
    /// Host vertex of each pattern vertex, if a copy exists.
    pub embedding: Option<Vec<u32>>,
    /// Partial assignments visited.
    pub nodes: u64,
}

/// Which copies count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Goal {
    /// `f(e)` avoids every copy vertex.
    Clean,
    /// `f(e)` is not a copy edge.
    Free,
}

struct Search<'a> {
    f: &'a SetMapping,
    goal: Goal,
    order: Vec<usize>,
    /// Edges completed when the vertex at each position is placed.
    closing: Vec<Vec<usize>>,
    edges: &'a [Vec<usize>],
    phi: Vec<u32>,
    used: Vec<bool>,
    blocked: Vec<u32>,
    copy_edges: BTreeMap<Vec<u32>, u32>,
    images: BTreeMap<Vec<u32>, u32>,
    nodes: u64,
}

impl<'a> Search<'a> {
    fn new(p: &'a Pattern, f: &'a SetMapping, goal: Goal) -> Self {
        let order = degree_order(p);
        let mut pos = vec![0; p.n()];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        let mut closing = vec![Vec::new(); p.n()];
        for (idx, e) in p.edges().iter().enumerate() {
            let last = e.iter().map(|&v| pos[v]).max().expect("edges are non-empty");
            closing[last].push(idx);
        }
        Self {
            f,
            goal,
            order,
            closing,
            edges: p.edges(),
            phi: vec![u32::MAX; p.n()],
            used: vec![false; f.host() as usize],
            blocked: vec![0; f.host() as usize],
            copy_edges: BTreeMap::new(),
            images: BTreeMap::new(),
            nodes: 0,
        }
    }

    fn host_edge(&self, idx: usize) -> Vec<u32> {
        let mut e: Vec<u32> = self.edges[idx].iter().map(|&v| self.phi[v]).collect();
        e.sort_unstable();
        e
    }

    fn bump(map: &mut BTreeMap<Vec<u32>, u32>, key: Vec<u32>, up: bool) {
        if up {
            *map.entry(key).or_default() += 1;
        } else if let Some(c) = map.get_mut(&key) {
            *c -= 1;
            if *c == 0 {
                map.remove(&key);
            }
        }
    }

    /// Places `order[depth]` on `x` if that keeps the partial copy good.
    fn try_place(&mut self, depth: usize, x: u32) -> Option<Vec<(Vec<u32>, Vec<u32>)>> {
        if self.used[x as usize] {
            return None;
        }
        if self.goal == Goal::Clean && self.blocked[x as usize] > 0 {
            return None;
        }
        let u = self.order[depth];
        self.phi[u] = x;
        let mut added: Vec<(Vec<u32>, Vec<u32>)> = Vec::new();
        let mut ok = true;
        for &idx in &self.closing[depth] {
            let e = self.host_edge(idx);
            let img = self.f.eval(&e).expect("copy edges are host edges");
            ok = match self.goal {
                Goal::Clean => !img.iter().any(|&z| self.used[z as usize] || z == x),
                Goal::Free => {
                    let clash = self.copy_edges.contains_key(&img)
                        || self.images.contains_key(&e)
                        || img == e
                        || added.iter().any(|(e2, i2)| *e2 == img || *i2 == e);
                    !clash
                }
            };
            if !ok {
                break;
            }
            added.push((e, img));
        }
        if !ok {
            self.phi[u] = u32::MAX;
            return None;
        }
        self.used[x as usize] = true;
        for (e, img) in &added {
            for &z in img {
                self.blocked[z as usize] += 1;
            }
            Self::bump(&mut self.copy_edges, e.clone(), true);
            Self::bump(&mut self.images, img.clone(), true);
        }
        Some(added)
    }

    fn undo(&mut self, depth: usize, added: Vec<(Vec<u32>, Vec<u32>)>) {
        let u = self.order[depth];
        self.used[self.phi[u] as usize] = false;
        self.phi[u] = u32::MAX;
        for (e, img) in added {
            for &z in &img {
                self.blocked[z as usize] -= 1;
            }
            Self::bump(&mut self.copy_edges, e, false);
            Self::bump(&mut self.images, img, false);
        }
    }

    fn descend(&mut self, depth: usize) -> bool {
        self.nodes += 1;
        if depth == self.order.len() {
            return true;
        }
        for x in 0..self.f.host() {
            if let Some(added) = self.try_place(depth, x) {
                if self.descend(depth + 1) {
                    return true;
                }
                self.undo(depth, added);
            }
        }
        false
    }
}

fn run_search(p: &Pattern, f: &SetMapping, goal: Goal, limits: &SearchLimits) -> Result<SearchOutcome, OracleError> {
    limits.check(p, f.host())?;
    if f.arity() != p.k() {
        return Err(OracleError::Mismatch(format!("mapping arity {} but pattern is {}-uniform", f.arity(), p.k())));
    }
    if goal == Goal::Free && f.image_size() != p.k() {
        return Err(OracleError::Mismatch(format!("f-free copies need images of size k = {}", p.k())));
    }
    let mut search = Search::new(p, f, goal);
    let found = search.descend(0);
    Ok(SearchOutcome { embedding: found.then(|| search.phi.clone()), nodes: search.nodes })
}

/// Lexicographically first copy of `p` whose edge images avoid all copy vertices.
pub fn find_clean_copy(p: &Pattern, f: &SetMapping, limits: &SearchLimits) -> Result<SearchOutcome, OracleError> {
    run_search(p, f, Goal::Clean, limits)
}

/// Lexicographically first copy of `p` in which no edge image is a copy edge.
pub fn find_f_free_copy(p: &Pattern, f: &SetMapping, limits: &SearchLimits) -> Result<SearchOutcome, OracleError> {
    run_search(p, f, Goal::Free, limits)
}

/// Whether the image edges of `phi` avoid every copy edge.
pub fn is_f_free(p: &Pattern, phi: &[u32], f: &SetMapping) -> bool {
    let copy: Vec<Vec<u32>> = p
        .edges()
        .iter()
        .map(|e| {
            let mut h: Vec<u32> = e.iter().map(|&v| phi[v]).collect();
            h.sort_unstable();
            h
        })
        .collect();
    copy.iter().all(|e| f.eval(e).map(|img| !copy.contains(&img)).unwrap_or(false))
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateKind {
    /// No clean copy.
    W,
    /// No `f`-free copy for a mapping onto disjoint edges.
    G0,
    /// No `f`-free copy for a mapping onto edges sharing one vertex.
    G1,
}

impl fmt::Display for CertificateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertificateKind::W => "w",
            CertificateKind::G0 => "g0",
            CertificateKind::G1 => "g1",
        })
    }
}

impl FromStr for CertificateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "w" => Ok(CertificateKind::W),
            "g0" => Ok(CertificateKind::G0),
            "g1" => Ok(CertificateKind::G1),
            _ => Err(format!("unknown certificate kind {s:?} (expected w, g0 or g1)")),
        }
    }
}

impl CertificateKind {
    /// Dense random mapping for trial seed `seed`. `ell` only matters for `w`.
    pub fn sample_mapping(self, host: u32, k: usize, ell: usize, seed: u64) -> Result<SetMapping, MappingError> {
        match self {
            CertificateKind::W => gen_uniform_disjoint(host, k, ell, seed, Storage::Dense),
            CertificateKind::G0 => gen_random_disjoint_edge(host, seed, Storage::Dense),
            CertificateKind::G1 => gen_random_incident_edge(host, seed, Storage::Dense),
        }
    }

    fn search(self, p: &Pattern, f: &SetMapping, limits: &SearchLimits) -> Result<SearchOutcome, OracleError> {
        match self {
            CertificateKind::W => find_clean_copy(p, f, limits),
            CertificateKind::G0 | CertificateKind::G1 => find_f_free_copy(p, f, limits),
        }
    }
}

/// A mapping on `N` vertices with no good copy of the pattern, proving the
/// corresponding parameter of the pattern exceeds `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub seed: u64,
    pub trial: usize,
    pub nodes: u64,
    pub pattern: Pattern,
    pub mapping: SetMapping,
}

impl Certificate {
    pub fn host(&self) -> u32 {
        self.mapping.host()
    }

    pub fn to_text(&self) -> String {
        let f = &self.mapping;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "certificate kind={} N={} ell={} a={} seed={} trial={} nodes={}",
            self.kind,
            f.host(),
            f.image_size(),
            f.overlap(),
            self.seed,
            self.trial,
            self.nodes
        );
        out.push_str("pattern\n");
        out.push_str(&serialize_pattern(&self.pattern));
        out.push_str("end\nmapping\n");
        out.push_str(&serialize_mapping(f).expect("certificates hold dense mappings"));
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self, OracleError> {
        let err = |line: usize, msg: &str| OracleError::Certificate { line, msg: msg.to_string() };
        let lines: Vec<&str> = text.lines().collect();
        let header = lines.first().ok_or_else(|| err(1, "empty certificate"))?;
        let mut fields = BTreeMap::new();
        let mut tokens = header.split_whitespace();
        if tokens.next() != Some("certificate") {
            return Err(err(1, "expected `certificate` header"));
        }
        for tok in tokens {
            let (k, v) = tok.split_once('=').ok_or_else(|| err(1, &format!("bad field {tok:?}")))?;
            fields.insert(k, v);
        }
        let field = |k: &str| fields.get(k).copied().ok_or_else(|| err(1, &format!("missing field {k}")));
        let num = |k: &str| -> Result<u64, OracleError> {
            field(k)?.parse::<u64>().map_err(|e| err(1, &format!("{k}: {e}")))
        };
        let kind: CertificateKind = field("kind")?.parse().map_err(|e: String| err(1, &e))?;
        let section = |name: &str, from: usize| -> Result<(usize, usize), OracleError> {
            if lines.get(from).map(|l| l.trim()) != Some(name) {
                return Err(err(from + 1, &format!("expected `{name}`")));
            }
            let end = (from + 1..lines.len())
                .find(|&i| lines[i].trim() == "end")
                .ok_or_else(|| err(from + 1, &format!("unterminated `{name}` section")))?;
            Ok((from + 1, end))
        };
        let (ps, pe) = section("pattern", 1)?;
        let pattern = parse_pattern(&lines[ps..pe].join("\n"))?;
        let (ms, me) = section("mapping", pe + 1)?;
        let mapping = parse_mapping(&lines[ms..me].join("\n"))?;
        if num("N")? != mapping.host() as u64 || num("ell")? != mapping.image_size() as u64 {
            return Err(err(1, "header disagrees with the embedded mapping"));
        }
        Ok(Self { kind, seed: num("seed")?, trial: num("trial")? as usize, nodes: num("nodes")?, pattern, mapping })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CertificateCheck {
    /// The search again finds no good copy.
    pub holds: bool,
    /// It also visits exactly the recorded number of nodes.
    pub nodes_match: bool,
    pub nodes: u64,
}

/// Re-runs the exhaustive search on the stored mapping.
pub fn verify_certificate(cert: &Certificate, limits: &SearchLimits) -> Result<CertificateCheck, OracleError> {
    let outcome = cert.kind.search(&cert.pattern, &cert.mapping, limits)?;
    Ok(CertificateCheck {
        holds: outcome.embedding.is_none(),
        nodes_match: outcome.nodes == cert.nodes,
        nodes: outcome.nodes,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifyOutcome {
    pub certificate: Option<Certificate>,
    pub trials_run: usize,
    pub nodes: u64,
}

/// Tries up to `trials` random mappings of the kind's family and keeps the
/// first one with no good copy.
pub fn certify_lower_bound(
    p: &Pattern,
    host: u32,
    kind: CertificateKind,
    ell: usize,
    trials: usize,
    seed: u64,
    limits: &SearchLimits,
) -> Result<CertifyOutcome, OracleError> {
    limits.check(p, host)?;
    let mut nodes = 0;
    for trial in 0..trials {
        let f = kind.sample_mapping(host, p.k(), ell, derive_seed(seed, stream::MAPPING, trial as u64))?;
        let outcome = kind.search(p, &f, limits)?;
        nodes += outcome.nodes;
        if outcome.embedding.is_none() {
            let certificate = Certificate { kind, seed, trial, nodes: outcome.nodes, pattern: p.clone(), mapping: f };
            return Ok(CertifyOutcome { certificate: Some(certificate), trials_run: trial + 1, nodes });
        }
    }
    Ok(CertifyOutcome { certificate: None, trials_run: trials, nodes })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    #[serde(rename = "N")]
    pub host: u32,
    /// Fraction of sampled mappings admitting a good copy.
    pub admits: Proportion,
    pub mean_nodes: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanTable {
    pub kind: CertificateKind,
    pub ell: usize,
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<ScanRow>,
}

/// For each host size, the fraction of random mappings of the kind's family
/// that admit a good copy of `p`. Host sizes are checked against `limits`
/// before any search runs.
pub fn scan(
    p: &Pattern,
    kind: CertificateKind,
    hosts: &[u32],
    ell: usize,
    trials: usize,
    seed: u64,
    limits: &SearchLimits,
) -> Result<ScanTable, OracleError> {
    for &host in hosts {
        limits.check(p, host)?;
    }
    let mut rows = Vec::with_capacity(hosts.len());
    for &host in hosts {
        let host_seed = derive_seed(seed, stream::TRIAL, host as u64);
        let (mut admits, mut nodes) = (0, 0u64);
        for t in 0..trials {
            let f = kind.sample_mapping(host, p.k(), ell, derive_seed(host_seed, stream::MAPPING, t as u64))?;
            let outcome = kind.search(p, &f, limits)?;
            nodes += outcome.nodes;
            admits += usize::from(outcome.embedding.is_some());
        }
        rows.push(ScanRow {
            host,
            admits: Proportion::new(admits, trials),
            mean_nodes: if trials == 0 { 0.0 } else { nodes as f64 / trials as f64 },
        });
    }
    Ok(ScanTable { kind, ell, trials, seed, rows })
}

/// [`scan`] for clean copies.
pub fn scan_w(
    p: &Pattern,
    hosts: &[u32],
    ell: usize,
    trials: usize,
    seed: u64,
    limits: &SearchLimits,
) -> Result<ScanTable, OracleError> {
    scan(p, CertificateKind::W, hosts, ell, trials, seed, limits)
}
