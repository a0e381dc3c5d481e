//! Pattern hypergraphs, the degree order, size padding, and dyadic blocks.
//!
//! A [`Pattern`] is the graph we want to embed. Before the block embedder can
//! run, the pattern is padded so that its edge count is a perfect square and
//! its vertex count is `sqrt(m) * 2^T`; [`dyadic_plan`] then cuts the degree
//! order into blocks of sizes `sqrt(m), sqrt(m), 2 sqrt(m), 4 sqrt(m), ...`.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::seed::rng_from;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("uniformity must be at least 2, got {0}")]
    Uniformity(usize),
    #[error("edge {edge:?} has {got} vertices, expected {expected}")]
    WrongArity { edge: Vec<usize>, got: usize, expected: usize },
    #[error("degenerate edge {0:?}: repeated vertex")]
    DegenerateEdge(Vec<usize>),
    #[error("edge {edge:?} uses vertex outside 0..{n}")]
    OutOfRange { edge: Vec<usize>, n: usize },
    #[error("duplicate edge {0:?}")]
    DuplicateEdge(Vec<usize>),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("infeasible generator parameters: {0}")]
    Infeasible(String),
    #[error("unknown pattern generator {0:?}")]
    UnknownGenerator(String),
    #[error("vertex {0} is isolated")]
    IsolatedVertex(usize),
    #[error("operation needs a 2-uniform pattern, got k = {0}")]
    NotAGraph(usize),
    #[error("block sizes {sizes:?} do not partition {n} vertices")]
    BadBlocks { sizes: Vec<usize>, n: usize },
}

/// A `k`-uniform hypergraph on vertices `0..n`.
///
/// Edges are stored sorted, and the edge list is kept in lexicographic order,
/// so two patterns with the same edge set compare equal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Pattern {
    k: usize,
    n: usize,
    edges: Vec<Vec<usize>>,
    degrees: Vec<usize>,
}

impl Pattern {
    pub fn new(k: usize, n: usize, edges: Vec<Vec<usize>>) -> Result<Self, GraphError> {
        if k < 2 {
            return Err(GraphError::Uniformity(k));
        }
        let mut seen = BTreeSet::new();
        for mut e in edges {
            if e.len() != k {
                return Err(GraphError::WrongArity { got: e.len(), expected: k, edge: e });
            }
            e.sort_unstable();
            if e.windows(2).any(|w| w[0] == w[1]) {
                return Err(GraphError::DegenerateEdge(e));
            }
            if e[k - 1] >= n {
                return Err(GraphError::OutOfRange { edge: e, n });
            }
            if seen.contains(&e) {
                return Err(GraphError::DuplicateEdge(e));
            }
            seen.insert(e);
        }
        let edges: Vec<Vec<usize>> = seen.into_iter().collect();
        let mut degrees = vec![0; n];
        for e in &edges {
            for &v in e {
                degrees[v] += 1;
            }
        }
        Ok(Self { k, n, edges, degrees })
    }

    /// A 2-uniform pattern from a list of pairs.
    pub fn graph(n: usize, pairs: &[(usize, usize)]) -> Result<Self, GraphError> {
        Self::new(2, n, pairs.iter().map(|&(u, v)| vec![u, v]).collect())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degrees[v]
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn isolated_vertices(&self) -> Vec<usize> {
        (0..self.n).filter(|&v| self.degrees[v] == 0).collect()
    }

    pub fn has_isolated(&self) -> bool {
        self.degrees.contains(&0)
    }

    /// Vertices sharing an edge with `v`, per vertex, sorted and deduplicated.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            for &u in e {
                for &w in e {
                    if u != w {
                        adj[u].push(w);
                    }
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Drops isolated vertices and relabels the rest in increasing order.
    /// Returns the reduced pattern and the original id of each kept vertex.
    pub fn without_isolated(&self) -> (Pattern, Vec<usize>) {
        let kept: Vec<usize> = (0..self.n).filter(|&v| self.degrees[v] > 0).collect();
        let mut relabel = vec![usize::MAX; self.n];
        for (new, &old) in kept.iter().enumerate() {
            relabel[old] = new;
        }
        let edges = self
            .edges
            .iter()
            .map(|e| e.iter().map(|&v| relabel[v]).collect())
            .collect();
        let reduced = Pattern::new(self.k, kept.len(), edges).expect("relabeling preserves validity");
        (reduced, kept)
    }
}

/// Vertices sorted by non-increasing degree, ties by ascending id.
pub fn degree_order(p: &Pattern) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.n()).collect();
    order.sort_by(|&a, &b| p.degree(b).cmp(&p.degree(a)).then(a.cmp(&b)));
    order
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Generator families, written `kind:params` on the command line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatternSpec {
    Clique { n: usize },
    Path { n: usize },
    Cycle { n: usize },
    /// Leaves `0..leaves`, center `leaves`.
    Star { leaves: usize },
    Bipartite { left: usize, right: usize },
    Matching { edges: usize },
    /// Uniform over simple graphs with `n` vertices, `m` edges, no isolated vertex.
    Random { n: usize, m: usize },
    /// Uniform `d`-regular graph via the configuration model with rejection.
    Regular { n: usize, d: usize },
    /// Uniform `k`-uniform hypergraph with `m` edges and no isolated vertex.
    Hyper { k: usize, n: usize, m: usize },
}

impl fmt::Display for PatternSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PatternSpec::Clique { n } => write!(f, "clique:{n}"),
            PatternSpec::Path { n } => write!(f, "path:{n}"),
            PatternSpec::Cycle { n } => write!(f, "cycle:{n}"),
            PatternSpec::Star { leaves } => write!(f, "star:{leaves}"),
            PatternSpec::Bipartite { left, right } => write!(f, "bipartite:{left}x{right}"),
            PatternSpec::Matching { edges } => write!(f, "matching:{edges}"),
            PatternSpec::Random { n, m } => write!(f, "random:n={n},m={m}"),
            PatternSpec::Regular { n, d } => write!(f, "regular:n={n},d={d}"),
            PatternSpec::Hyper { k, n, m } => write!(f, "hyper:k={k},n={n},m={m}"),
        }
    }
}

fn keyed_params(body: &str, keys: &[&str]) -> Result<Vec<usize>, GraphError> {
    let mut out = vec![None; keys.len()];
    for part in body.split(',').filter(|s| !s.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| GraphError::UnknownGenerator(format!("expected key=value, got {part:?}")))?;
        let slot = keys
            .iter()
            .position(|k| *k == key.trim())
            .ok_or_else(|| GraphError::UnknownGenerator(format!("unknown parameter {key:?}")))?;
        out[slot] = Some(
            value
                .trim()
                .parse::<usize>()
                .map_err(|e| GraphError::UnknownGenerator(format!("{part}: {e}")))?,
        );
    }
    out.into_iter()
        .zip(keys)
        .map(|(v, k)| v.ok_or_else(|| GraphError::UnknownGenerator(format!("missing parameter {k}"))))
        .collect()
}

impl FromStr for PatternSpec {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, body) = s
            .split_once(':')
            .ok_or_else(|| GraphError::UnknownGenerator(s.to_string()))?;
        let single = |b: &str| {
            b.trim()
                .parse::<usize>()
                .map_err(|e| GraphError::UnknownGenerator(format!("{s}: {e}")))
        };
        Ok(match kind.trim() {
            "clique" => PatternSpec::Clique { n: single(body)? },
            "path" => PatternSpec::Path { n: single(body)? },
            "cycle" => PatternSpec::Cycle { n: single(body)? },
            "star" => PatternSpec::Star { leaves: single(body)? },
            "matching" => PatternSpec::Matching { edges: single(body)? },
            "bipartite" => {
                let (a, b) = body
                    .split_once(['x', ','])
                    .ok_or_else(|| GraphError::UnknownGenerator(s.to_string()))?;
                PatternSpec::Bipartite { left: single(a)?, right: single(b)? }
            }
            "random" => {
                let v = keyed_params(body, &["n", "m"])?;
                PatternSpec::Random { n: v[0], m: v[1] }
            }
            "regular" => {
                let v = keyed_params(body, &["n", "d"])?;
                PatternSpec::Regular { n: v[0], d: v[1] }
            }
            "hyper" => {
                let v = keyed_params(body, &["k", "n", "m"])?;
                PatternSpec::Hyper { k: v[0], n: v[1], m: v[2] }
            }
            _ => return Err(GraphError::UnknownGenerator(s.to_string())),
        })
    }
}

const MAX_REJECTION_ROUNDS: usize = 10_000;
/// Uniform attempts before [`covering_sample`] takes over.
const COVER_REJECTION_ROUNDS: usize = 200;

fn binom2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Lexicographic index of the pair `u < v` among pairs of `0..n`, inverted.
fn unrank_pair(n: usize, mut idx: usize) -> (usize, usize) {
    let mut u = 0;
    loop {
        let row = n - 1 - u;
        if idx < row {
            return (u, u + 1 + idx);
        }
        idx -= row;
        u += 1;
    }
}

/// Fallback when rejection keeps leaving vertices uncovered: cover a shuffled
/// vertex order with disjoint `k`-sets (the last one topped up), then add
/// uniform random edges until there are `m`. Needs `ceil(n / k) <= m`.
fn covering_sample(rng: &mut ChaCha8Rng, k: usize, n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut seen = BTreeSet::new();
    for chunk in order.chunks(k) {
        let mut e = chunk.to_vec();
        while e.len() < k {
            let v = order[rng.gen_range(0..n - chunk.len())];
            if !e.contains(&v) {
                e.push(v);
            }
        }
        e.sort_unstable();
        seen.insert(e);
    }
    while seen.len() < m {
        let mut e: Vec<usize> = index::sample(rng, n, k).into_vec();
        e.sort_unstable();
        seen.insert(e);
    }
    seen.into_iter().collect()
}

/// Builds the pattern for `spec`. Deterministic in `seed`; the seed is ignored
/// by the non-random families.
pub fn generate(spec: &PatternSpec, seed: u64) -> Result<Pattern, GraphError> {
    let infeasible = |msg: String| Err(GraphError::Infeasible(msg));
    match *spec {
        PatternSpec::Clique { n } => {
            if n < 2 {
                return infeasible(format!("clique needs n >= 2, got {n}"));
            }
            let pairs: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
            Pattern::graph(n, &pairs)
        }
        PatternSpec::Path { n } => {
            if n < 2 {
                return infeasible(format!("path needs n >= 2, got {n}"));
            }
            let pairs: Vec<_> = (0..n - 1).map(|u| (u, u + 1)).collect();
            Pattern::graph(n, &pairs)
        }
        PatternSpec::Cycle { n } => {
            if n < 3 {
                return infeasible(format!("cycle needs n >= 3, got {n}"));
            }
            let pairs: Vec<_> = (0..n).map(|u| (u, (u + 1) % n)).collect();
            Pattern::graph(n, &pairs)
        }
        PatternSpec::Star { leaves } => {
            if leaves < 1 {
                return infeasible("star needs at least one leaf".into());
            }
            let pairs: Vec<_> = (0..leaves).map(|u| (u, leaves)).collect();
            Pattern::graph(leaves + 1, &pairs)
        }
        PatternSpec::Bipartite { left, right } => {
            if left < 1 || right < 1 {
                return infeasible(format!("bipartite needs both sides non-empty, got {left}x{right}"));
            }
            let pairs: Vec<_> = (0..left)
                .flat_map(|u| (0..right).map(move |v| (u, left + v)))
                .collect();
            Pattern::graph(left + right, &pairs)
        }
        PatternSpec::Matching { edges } => {
            if edges < 1 {
                return infeasible("matching needs at least one edge".into());
            }
            let pairs: Vec<_> = (0..edges).map(|i| (2 * i, 2 * i + 1)).collect();
            Pattern::graph(2 * edges, &pairs)
        }
        PatternSpec::Random { n, m } => {
            if m > binom2(n) {
                return infeasible(format!("m = {m} exceeds C({n},2) = {}", binom2(n)));
            }
            if n < 2 || 2 * m < n {
                return infeasible(format!("{m} edges cannot cover {n} vertices"));
            }
            let mut rng = rng_from(seed);
            for _ in 0..COVER_REJECTION_ROUNDS {
                let mut degrees = vec![0usize; n];
                let mut pairs = Vec::with_capacity(m);
                for idx in index::sample(&mut rng, binom2(n), m).into_iter() {
                    let (u, v) = unrank_pair(n, idx);
                    degrees[u] += 1;
                    degrees[v] += 1;
                    pairs.push((u, v));
                }
                if degrees.iter().all(|&d| d > 0) {
                    return Pattern::graph(n, &pairs);
                }
            }
            let edges = covering_sample(&mut rng, 2, n, m);
            Pattern::new(2, n, edges)
        }
        PatternSpec::Regular { n, d } => {
            if d < 1 || d >= n || (n * d) % 2 == 1 {
                return infeasible(format!("no simple {d}-regular graph on {n} vertices"));
            }
            let mut rng = rng_from(seed);
            'outer: for _ in 0..COVER_REJECTION_ROUNDS {
                let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
                // Fisher-Yates, then pair consecutive stubs.
                for i in (1..stubs.len()).rev() {
                    let j = rng.gen_range(0..=i);
                    stubs.swap(i, j);
                }
                let mut seen = BTreeSet::new();
                for c in stubs.chunks(2) {
                    let (u, v) = (c[0].min(c[1]), c[0].max(c[1]));
                    if u == v || !seen.insert((u, v)) {
                        continue 'outer;
                    }
                }
                let pairs: Vec<_> = seen.into_iter().collect();
                return Pattern::graph(n, &pairs);
            }
            infeasible(format!("configuration model kept failing for n = {n}, d = {d}"))
        }
        PatternSpec::Hyper { k, n, m } => {
            if k < 2 || n < k {
                return infeasible(format!("hypergraph needs 2 <= k <= n, got k = {k}, n = {n}"));
            }
            if (m as u128) > binom(n, k) || m * k < n {
                return infeasible(format!("cannot place {m} distinct {k}-edges covering {n} vertices"));
            }
            let mut rng = rng_from(seed);
            for _ in 0..MAX_REJECTION_ROUNDS {
                let mut seen = BTreeSet::new();
                while seen.len() < m {
                    let mut e: Vec<usize> = index::sample(&mut rng, n, k).into_vec();
                    e.sort_unstable();
                    seen.insert(e);
                }
                let mut covered = vec![false; n];
                for e in &seen {
                    for &v in e {
                        covered[v] = true;
                    }
                }
                if covered.iter().all(|&c| c) {
                    return Pattern::new(k, n, seen.into_iter().collect());
                }
            }
            let edges = covering_sample(&mut rng, k, n, m);
            Pattern::new(k, n, edges)
        }
    }
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

/// Parses one edge per line (`k` whitespace-separated ids). An optional first
/// line `k=<k> n=<n>` fixes uniformity and vertex count; without it, `k` is the
/// width of the first edge and `n` is one past the largest id. Blank lines and
/// `#` comments are skipped.
pub fn parse_pattern(text: &str) -> Result<Pattern, GraphError> {
    let mut k: Option<usize> = None;
    let mut n: Option<usize> = None;
    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    let mut first = true;
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if first && line.contains('=') {
            first = false;
            for tok in line.split_whitespace() {
                let (key, value) = tok.split_once('=').ok_or_else(|| GraphError::Parse {
                    line: line_no,
                    msg: format!("bad header token {tok:?}"),
                })?;
                let value: usize = value.parse().map_err(|e| GraphError::Parse {
                    line: line_no,
                    msg: format!("{tok}: {e}"),
                })?;
                match key {
                    "k" => k = Some(value),
                    "n" => n = Some(value),
                    _ => {
                        return Err(GraphError::Parse { line: line_no, msg: format!("unknown header key {key:?}") })
                    }
                }
            }
            continue;
        }
        first = false;
        let ids: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| GraphError::Parse { line: line_no, msg: e.to_string() })?;
        let width = *k.get_or_insert(ids.len());
        let err = |msg: String| GraphError::Parse { line: line_no, msg };
        if ids.len() != width {
            return Err(err(format!("expected {width} ids, found {}", ids.len())));
        }
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(err(format!("degenerate edge {ids:?}")));
        }
        if let Some(limit) = n {
            if sorted[width - 1] >= limit {
                return Err(err(format!("vertex id {} out of range 0..{limit}", sorted[width - 1])));
            }
        }
        if !seen.insert(sorted.clone()) {
            return Err(err(format!("duplicate edge {ids:?}")));
        }
        edges.push(sorted);
    }
    let k = k.ok_or(GraphError::Parse { line: 0, msg: "empty pattern".into() })?;
    let n = n.unwrap_or_else(|| edges.iter().flat_map(|e| e.iter().copied()).max().map_or(0, |v| v + 1));
    Pattern::new(k, n, edges)
}

/// Canonical text: header line, then edges in lexicographic order.
pub fn serialize_pattern(p: &Pattern) -> String {
    let mut out = format!("k={} n={}\n", p.k, p.n);
    for e in &p.edges {
        let line: Vec<String> = e.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Padding and dyadic blocks
// ---------------------------------------------------------------------------

/// A graph padded so that `m` is a perfect square and `n / sqrt(m) = 2^T`.
///
/// The original vertices keep their ids `0..original_n`; padding edges form a
/// matching on fresh vertices after them, and isolated vertices come last.
#[derive(Clone, Debug, Serialize)]
pub struct PaddedPattern {
    pub graph: Pattern,
    pub original_n: usize,
    pub original_m: usize,
    pub added_matching_edges: Vec<[usize; 2]>,
    pub added_isolated: usize,
    pub m_padded: usize,
    pub n_padded: usize,
    pub sqrt_m: usize,
    pub levels: usize,
}

fn ceil_sqrt(m: usize) -> usize {
    let mut s = (m as f64).sqrt() as usize;
    while s * s < m {
        s += 1;
    }
    while s > 0 && (s - 1) * (s - 1) >= m {
        s -= 1;
    }
    s
}

pub fn pad(p: &Pattern) -> Result<PaddedPattern, GraphError> {
    if p.k() != 2 {
        return Err(GraphError::NotAGraph(p.k()));
    }
    if let Some(v) = p.isolated_vertices().first() {
        return Err(GraphError::IsolatedVertex(*v));
    }
    if p.m() == 0 {
        return Err(GraphError::Infeasible("pattern has no edges".into()));
    }
    let sqrt_m = ceil_sqrt(p.m());
    let m_padded = sqrt_m * sqrt_m;
    let mut edges = p.edges().to_vec();
    let mut added = Vec::new();
    let mut next = p.n();
    for _ in p.m()..m_padded {
        added.push([next, next + 1]);
        edges.push(vec![next, next + 1]);
        next += 2;
    }
    let covered = next;
    let mut levels = 1;
    while sqrt_m << levels < covered {
        levels += 1;
    }
    let n_padded = sqrt_m << levels;
    let graph = Pattern::new(2, n_padded, edges)?;
    Ok(PaddedPattern {
        graph,
        original_n: p.n(),
        original_m: p.m(),
        added_matching_edges: added,
        added_isolated: n_padded - covered,
        m_padded,
        n_padded,
        sqrt_m,
        levels,
    })
}

/// Degree order cut into consecutive blocks `U_0..U_T`.
#[derive(Clone, Debug, Serialize)]
pub struct DyadicPlan {
    order: Vec<usize>,
    rank: Vec<usize>,
    blocks: Vec<Range<usize>>,
    block_of: Vec<usize>,
    block_degrees: Vec<usize>,
    m: usize,
}

impl DyadicPlan {
    /// Blocks of arbitrary sizes over the degree order of `p`. Used for
    /// hand-built instances; [`dyadic_plan`] is the doubling construction.
    pub fn with_block_sizes(p: &Pattern, sizes: &[usize]) -> Result<Self, GraphError> {
        if sizes.iter().sum::<usize>() != p.n() || sizes.contains(&0) {
            return Err(GraphError::BadBlocks { sizes: sizes.to_vec(), n: p.n() });
        }
        let order = degree_order(p);
        let mut rank = vec![0; p.n()];
        for (i, &v) in order.iter().enumerate() {
            rank[v] = i;
        }
        let mut blocks = Vec::with_capacity(sizes.len());
        let mut block_of = vec![0; p.n()];
        let mut start = 0;
        for (j, &s) in sizes.iter().enumerate() {
            for &v in &order[start..start + s] {
                block_of[v] = j;
            }
            blocks.push(start..start + s);
            start += s;
        }
        let block_degrees = blocks
            .iter()
            .map(|r| order[r.clone()].iter().map(|&v| p.degree(v)).max().unwrap_or(0))
            .collect();
        Ok(Self { order, rank, blocks, block_of, block_degrees, m: p.m() })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Position of `v` in the degree order.
    pub fn rank(&self, v: usize) -> usize {
        self.rank[v]
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// `T`, the index of the last block.
    pub fn levels(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn block(&self, j: usize) -> &[usize] {
        &self.order[self.blocks[j].clone()]
    }

    pub fn block_size(&self, j: usize) -> usize {
        self.blocks[j].len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|r| r.len()).collect()
    }

    pub fn block_of(&self, v: usize) -> usize {
        self.block_of[v]
    }

    /// `d_j`, the largest degree inside block `j`.
    pub fn block_degree(&self, j: usize) -> usize {
        self.block_degrees[j]
    }

    pub fn block_degrees(&self) -> &[usize] {
        &self.block_degrees
    }

    /// Edge count of the planned pattern.
    pub fn m(&self) -> usize {
        self.m
    }

    /// `sum_{j>=1} d_j |U_j|`, at most `4m` for a padded pattern.
    pub fn weighted_degree_sum(&self) -> usize {
        (1..self.num_blocks()).map(|j| self.block_degree(j) * self.block_size(j)).sum()
    }
}

/// Doubling blocks over the degree order of a padded pattern:
/// `|U_0| = sqrt(m)` and `|U_j| = 2^(j-1) sqrt(m)` for `1 <= j <= T`.
pub fn dyadic_plan(pp: &PaddedPattern) -> DyadicPlan {
    let mut sizes = vec![pp.sqrt_m];
    for j in 1..=pp.levels {
        sizes.push(pp.sqrt_m << (j - 1));
    }
    DyadicPlan::with_block_sizes(&pp.graph, &sizes).expect("padded sizes partition the vertex set")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path3() -> Pattern {
        Pattern::graph(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn degree_order_examples() {
        assert_eq!(degree_order(&path3()), vec![1, 0, 2]);
        let k3 = generate(&PatternSpec::Clique { n: 3 }, 0).unwrap();
        assert_eq!(degree_order(&k3), vec![0, 1, 2]);
        let star = generate(&PatternSpec::Star { leaves: 4 }, 0).unwrap();
        assert_eq!(degree_order(&star), vec![4, 0, 1, 2, 3]);
    }

    #[test]
    fn pad_triangle() {
        let k3 = generate(&PatternSpec::Clique { n: 3 }, 0).unwrap();
        let pp = pad(&k3).unwrap();
        assert_eq!(pp.m_padded, 4);
        assert_eq!(pp.added_matching_edges, vec![[3, 4]]);
        assert_eq!(pp.n_padded, 8);
        assert_eq!(pp.added_isolated, 3);
        assert_eq!(pp.levels, 2);
    }

    #[test]
    fn pad_conforming_is_identity() {
        // 16 edges on 8 vertices.
        let mut pairs = vec![];
        for u in 0..8 {
            for v in u + 1..8 {
                if pairs.len() < 16 {
                    pairs.push((u, v));
                }
            }
        }
        let p = Pattern::graph(8, &pairs).unwrap();
        let pp = pad(&p).unwrap();
        assert_eq!((pp.m_padded, pp.n_padded, pp.levels), (16, 8, 1));
        assert!(pp.added_matching_edges.is_empty());
        assert_eq!(pp.added_isolated, 0);
        assert_eq!(pp.graph, p);
    }

    #[test]
    fn pad_single_edge() {
        let p = Pattern::graph(2, &[(0, 1)]).unwrap();
        let pp = pad(&p).unwrap();
        assert_eq!((pp.m_padded, pp.n_padded, pp.levels), (1, 2, 1));
    }

    #[test]
    fn pad_rejects_isolated_and_hypergraphs() {
        let p = Pattern::graph(3, &[(0, 1)]).unwrap();
        assert_eq!(pad(&p).unwrap_err(), GraphError::IsolatedVertex(2));
        let h = Pattern::new(3, 3, vec![vec![0, 1, 2]]).unwrap();
        assert_eq!(pad(&h).unwrap_err(), GraphError::NotAGraph(3));
    }

    #[test]
    fn dyadic_block_sizes() {
        let c16 = generate(&PatternSpec::Cycle { n: 16 }, 0).unwrap();
        let plan = dyadic_plan(&pad(&c16).unwrap());
        assert_eq!(plan.block_sizes(), vec![4, 4, 8]);
        assert_eq!(plan.levels(), 2);

        let k3 = generate(&PatternSpec::Clique { n: 3 }, 0).unwrap();
        let plan = dyadic_plan(&pad(&k3).unwrap());
        assert_eq!(plan.block_sizes(), vec![2, 2, 4]);
    }

    #[test]
    fn dyadic_plan_for_disjoint_edges() {
        // Independent count: 8 disjoint edges pad to m = 9 with one more edge
        // on fresh vertices (18 covered), then to n = 3 * 2^3 = 24.
        let p = generate(&PatternSpec::Matching { edges: 8 }, 0).unwrap();
        let pp = pad(&p).unwrap();
        assert_eq!((pp.m_padded, pp.n_padded, pp.levels), (9, 24, 3));
        let plan = dyadic_plan(&pp);
        assert_eq!(plan.block_sizes(), vec![3, 3, 6, 12]);
        assert_eq!(plan.block_degrees(), &[1, 1, 1, 1]);
        // 3 + 6 + 12 = 21 <= 4 * 9.
        assert_eq!(plan.weighted_degree_sum(), 21);
    }

    #[test]
    fn generators() {
        assert_eq!(generate(&PatternSpec::Clique { n: 4 }, 0).unwrap().m(), 6);
        let b = generate(&PatternSpec::Bipartite { left: 2, right: 3 }, 0).unwrap();
        assert_eq!(b.m(), 6);
        assert_eq!(b.degrees(), &[3, 3, 2, 2, 2]);
        let r1 = generate(&PatternSpec::Random { n: 6, m: 5 }, 1).unwrap();
        let r2 = generate(&PatternSpec::Random { n: 6, m: 5 }, 1).unwrap();
        assert_eq!(r1, r2);
        assert!(!r1.has_isolated());
        let reg = generate(&PatternSpec::Regular { n: 20, d: 3 }, 5).unwrap();
        assert!(reg.degrees().iter().all(|&d| d == 3));
        assert_eq!(reg.m(), 30);
        let h = generate(&PatternSpec::Hyper { k: 3, n: 6, m: 4 }, 2).unwrap();
        assert_eq!((h.k(), h.m()), (3, 4));
        assert!(!h.has_isolated());
    }

    #[test]
    fn generator_errors() {
        assert!(matches!(
            generate(&PatternSpec::Random { n: 4, m: 7 }, 0),
            Err(GraphError::Infeasible(_))
        ));
        assert!(generate(&PatternSpec::Regular { n: 5, d: 3 }, 0).is_err());
    }

    #[test]
    fn spec_mini_language() {
        for text in ["clique:5", "path:101", "bipartite:3x4", "random:n=20,m=40", "regular:n=20,d=3", "hyper:k=3,n=6,m=4", "star:4", "matching:3", "cycle:6"] {
            let spec: PatternSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        assert!("blob:3".parse::<PatternSpec>().is_err());
        assert!("random:n=3".parse::<PatternSpec>().is_err());
    }

    #[test]
    fn parse_examples() {
        let p = parse_pattern("0 1\n1 2").unwrap();
        assert_eq!(p, path3());
        assert!(matches!(parse_pattern("0 0"), Err(GraphError::Parse { line: 1, .. })));
        assert!(parse_pattern("0 1\n1 0").is_err());
        assert!(parse_pattern("k=2 n=2\n0 5").is_err());
        assert!(parse_pattern("0 1\n1 2 3").is_err());
        let with_header = parse_pattern("# comment\nk=2 n=5\n3 1\n\n0 1\n").unwrap();
        assert_eq!(with_header.n(), 5);
        assert_eq!(serialize_pattern(&with_header), "k=2 n=5\n0 1\n1 3\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn parse_serialize_round_trip(n in 2usize..15, m_frac in 0.0f64..1.0, seed: u64) {
            let max_m = n * (n - 1) / 2;
            let m = ((max_m as f64 * m_frac) as usize).clamp(n.div_ceil(2), max_m);
            let p = generate(&PatternSpec::Random { n, m }, seed).unwrap();
            let text = serialize_pattern(&p);
            let back = parse_pattern(&text).unwrap();
            prop_assert_eq!(&back, &p);
            prop_assert_eq!(serialize_pattern(&back), text);
        }

        #[test]
        fn degrees_match_edges(n in 2usize..30, seed: u64) {
            let m = n.max(2) * 2;
            let m = m.min(n * (n - 1) / 2).max(n.div_ceil(2));
            let p = generate(&PatternSpec::Random { n, m }, seed).unwrap();
            let mut deg = vec![0; n];
            for e in p.edges() { for &v in e { deg[v] += 1; } }
            prop_assert_eq!(deg.as_slice(), p.degrees());
        }

        #[test]
        fn padded_plan_invariants(n in 2usize..40, extra in 0usize..60, seed: u64) {
            let max_m = n * (n - 1) / 2;
            let m = (n.div_ceil(2) + extra).min(max_m);
            let p = generate(&PatternSpec::Random { n, m }, seed).unwrap();
            let pp = pad(&p).unwrap();
            prop_assert_eq!(pp.sqrt_m * pp.sqrt_m, pp.m_padded);
            prop_assert_eq!(pp.n_padded, pp.sqrt_m << pp.levels);
            prop_assert!(pp.levels >= 1);
            prop_assert!(pp.n_padded <= 4 * pp.m_padded);
            prop_assert!(2 * pp.graph.isolated_vertices().len() < pp.n_padded);
            let original: Vec<_> = pp.graph.edges().iter().filter(|e| e[1] < n).cloned().collect();
            prop_assert_eq!(original.as_slice(), p.edges());

            let plan = dyadic_plan(&pp);
            let sizes = plan.block_sizes();
            prop_assert_eq!(sizes[0], pp.sqrt_m);
            for j in 1..sizes.len() {
                prop_assert_eq!(sizes[..j].iter().sum::<usize>(), sizes[j]);
                prop_assert!(plan.block_degree(j - 1) >= plan.block_degree(j));
                for &u in plan.block(j - 1) {
                    prop_assert!(pp.graph.degree(u) >= plan.block_degree(j));
                }
            }
            prop_assert!(plan.block_degree(plan.levels()) > 0);
            prop_assert!(plan.weighted_degree_sum() <= 4 * pp.m_padded);
        }
    }
}
