//! Randomized block embedding.
//!
//! The pipeline, for a pattern with `m` edges and a mapping `f` with `ℓ`-sets:
//!
//! 1. pad the pattern and cut its degree order into dyadic blocks `U_0..U_T`;
//! 2. keep the well-loaded host vertices `X`;
//! 3. sample disjoint target pools `X'_0..X'_T ⊆ X`, vertex by vertex, with
//!    `Pr[x ∈ X'_j] = 4|U_j| / |X|`;
//! 4. count, for each pool vertex, the partners whose image falls back into
//!    the pools (`r_j(x)`), and drop the vertices with too many;
//! 5. run the greedy block embedder on the pruned pools, which takes for each
//!    pattern vertex the smallest candidate surviving three rejection rules;
//! 6. verify the result, and resample from step 3 if anything failed.

use serde::Serialize;
use thiserror::Error;

use crate::graphs::{dyadic_plan, pad, DyadicPlan, GraphError, PaddedPattern, Pattern};
use crate::mappings::{gen_uniform_disjoint, well_loaded, MappingError, SetMapping, Storage, WellLoadedSet};
use crate::seed::{derive_seed, rng_from, stream};

const NO_BLOCK: u16 = u16::MAX;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error("unsupported mapping: {0}")]
    UnsupportedMapping(String),
    #[error("pattern has no edges")]
    EmptyPattern,
    #[error("host too small: {well_loaded} well-loaded vertices, sampling needs {needed}")]
    HostTooSmall { well_loaded: usize, needed: usize },
    #[error("map is not injective: vertices {first} and {second} share host vertex {host}")]
    NotInjective { first: usize, second: usize, host: u32 },
    #[error("map has {got} entries for {expected} pattern vertices or leaves the host")]
    BadMap { got: usize, expected: usize },
    #[error("no clean embedding after {} attempts", .0.retries)]
    RetriesExhausted(Box<PipelineReport>),
}

// ---------------------------------------------------------------------------
// Sampling and the size property
// ---------------------------------------------------------------------------

/// Disjoint target pools `X'_0..X'_T`, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrimedSets {
    pub sets: Vec<Vec<u32>>,
}

impl PrimedSets {
    pub fn sizes(&self) -> Vec<usize> {
        self.sets.iter().map(Vec::len).collect()
    }

    /// Block index of every host vertex, [`u16::MAX`] outside all pools.
    fn block_index(&self, host: u32) -> Vec<u16> {
        block_index(&self.sets, host)
    }
}

fn block_index(sets: &[Vec<u32>], host: u32) -> Vec<u16> {
    let mut index = vec![NO_BLOCK; host as usize];
    for (j, set) in sets.iter().enumerate() {
        for &x in set {
            index[x as usize] = j as u16;
        }
    }
    index
}

/// `α_j = 4|U_j| / |X|` for every block.
pub fn sampling_weights(x: &WellLoadedSet, plan: &DyadicPlan) -> Vec<f64> {
    (0..plan.num_blocks())
        .map(|j| 4.0 * plan.block_size(j) as f64 / x.len() as f64)
        .collect()
}

/// Puts every `x ∈ X` independently into `X'_j` with probability
/// `4|U_j| / |X|`, or into no pool. Needs `|X| >= 4n` so the weights sum to at
/// most one.
pub fn sample_partition(x: &WellLoadedSet, plan: &DyadicPlan, seed: u64) -> Result<PrimedSets, EmbedError> {
    use rand::Rng;
    let needed = 4 * plan.order().len();
    if x.len() < needed {
        return Err(EmbedError::HostTooSmall { well_loaded: x.len(), needed });
    }
    // Draw r uniform in 0..|X|; block j owns the integer range
    // [4 |U_{<j}|, 4 |U_{<=j}|), so Pr = 4|U_j| / |X| exactly.
    let mut cuts = Vec::with_capacity(plan.num_blocks());
    let mut acc = 0;
    for j in 0..plan.num_blocks() {
        acc += 4 * plan.block_size(j);
        cuts.push(acc);
    }
    let mut rng = rng_from(seed);
    let mut sets = vec![Vec::new(); plan.num_blocks()];
    for &v in &x.members {
        let r = rng.gen_range(0..x.len());
        if let Some(j) = cuts.iter().position(|&c| r < c) {
            sets[j].push(v);
        }
    }
    Ok(PrimedSets { sets })
}

/// Whether `3.9|U_j| < |X'_j| < 4.1|U_j|` holds for block `j`.
pub fn size_property_holds(primed: &PrimedSets, plan: &DyadicPlan, j: usize) -> bool {
    let (u, x) = (plan.block_size(j), primed.sets[j].len());
    39 * u < 10 * x && 10 * x < 41 * u
}

pub fn check_size_property(primed: &PrimedSets, plan: &DyadicPlan) -> bool {
    (0..plan.num_blocks()).all(|j| size_property_holds(primed, plan, j))
}

// ---------------------------------------------------------------------------
// Pair counts and pruning
// ---------------------------------------------------------------------------

/// `r_{i,j}` and the per-vertex `r_j(x)` for `i <= j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairCounts {
    pair: Vec<Vec<u64>>,
    per_vertex: Vec<Vec<Vec<u64>>>,
}

impl PairCounts {
    /// `r_{i,j}`: ordered pairs `(x, y) ∈ X'_i × X'_j`, `x ≠ y`, with
    /// `f(xy) ∩ X'_{<=j} ≠ ∅`. Zero when `i > j`.
    pub fn pair(&self, i: usize, j: usize) -> u64 {
        if i > j {
            0
        } else {
            self.pair[i][j]
        }
    }

    /// `r_j(x)` for the vertex at position `pos` of `X'_i`, `i <= j`.
    pub fn vertex(&self, i: usize, pos: usize, j: usize) -> u64 {
        assert!(i <= j, "r_j(x) is only defined for x in X'_i with i <= j");
        self.per_vertex[i][pos][j - i]
    }

    pub fn num_blocks(&self) -> usize {
        self.pair.len()
    }
}

pub fn compute_counts(primed: &PrimedSets, f: &SetMapping) -> PairCounts {
    let blocks = primed.sets.len();
    let index = primed.block_index(f.host());
    let mut pair = vec![vec![0u64; blocks]; blocks];
    let mut per_vertex: Vec<Vec<Vec<u64>>> = primed
        .sets
        .iter()
        .enumerate()
        .map(|(i, set)| vec![vec![0u64; blocks - i]; set.len()])
        .collect();
    let mut buf = Vec::with_capacity(f.image_size());
    for j in 0..blocks {
        for i in 0..=j {
            for (pos, &x) in primed.sets[i].iter().enumerate() {
                let mut hits = 0;
                for &y in &primed.sets[j] {
                    if x == y {
                        continue;
                    }
                    f.eval_pair_into(x, y, &mut buf);
                    if buf.iter().any(|&z| (index[z as usize] as usize) <= j) {
                        hits += 1;
                    }
                }
                per_vertex[i][pos][j - i] = hits;
                pair[i][j] += hits;
            }
        }
    }
    PairCounts { pair, per_vertex }
}

/// `|U_i| |U_j|^2 / (5m)`, the allowance for `r_{i,j}`.
pub fn pair_allowance(plan: &DyadicPlan, i: usize, j: usize) -> f64 {
    let (ui, uj) = (plan.block_size(i) as f64, plan.block_size(j) as f64);
    ui * uj * uj / (5.0 * plan.m() as f64)
}

/// Largest `r_{i,j}` relative to its allowance; the pair property holds iff
/// this is at most one.
pub fn pair_max_ratio(counts: &PairCounts, plan: &DyadicPlan) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..plan.num_blocks() {
        for i in 0..=j {
            worst = worst.max(counts.pair(i, j) as f64 / pair_allowance(plan, i, j));
        }
    }
    worst
}

pub fn pair_property_holds(counts: &PairCounts, plan: &DyadicPlan) -> bool {
    // Compare 5m r_{i,j} <= |U_i||U_j|^2 in integers.
    (0..plan.num_blocks()).all(|j| {
        (0..=j).all(|i| {
            let (ui, uj) = (plan.block_size(i) as u128, plan.block_size(j) as u128);
            5 * plan.m() as u128 * counts.pair(i, j) as u128 <= ui * uj * uj
        })
    })
}

/// Pruned pools `X_i` and the bad sets `B_{i,j}`, stored as `bad[i][j - i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrunedSets {
    pub sets: Vec<Vec<u32>>,
    pub bad: Vec<Vec<Vec<u32>>>,
}

impl PrunedSets {
    pub fn bad(&self, i: usize, j: usize) -> &[u32] {
        &self.bad[i][j - i]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.sets.iter().map(Vec::len).collect()
    }
}

/// `x ∈ X'_i` is bad for `j >= i` when `r_j(x) >= |U_j| / d_j`, except that
/// for `i = j = 0` any `r_0(x) >= 1` is bad. `X_i` keeps the rest.
pub fn prune(primed: &PrimedSets, counts: &PairCounts, plan: &DyadicPlan) -> PrunedSets {
    let blocks = primed.sets.len();
    let mut sets = Vec::with_capacity(blocks);
    let mut bad = Vec::with_capacity(blocks);
    for i in 0..blocks {
        let mut row = vec![Vec::new(); blocks - i];
        let mut kept = Vec::new();
        for (pos, &x) in primed.sets[i].iter().enumerate() {
            let mut is_bad = false;
            for j in i..blocks {
                let r = counts.vertex(i, pos, j);
                let d = plan.block_degree(j) as u64;
                let over = if (i, j) == (0, 0) {
                    r >= 1
                } else {
                    d > 0 && r * d >= plan.block_size(j) as u64
                };
                if over {
                    row[j - i].push(x);
                    is_bad = true;
                }
            }
            if !is_bad {
                kept.push(x);
            }
        }
        sets.push(kept);
        bad.push(row);
    }
    PrunedSets { sets, bad }
}

// ---------------------------------------------------------------------------
// Greedy block embedder
// ---------------------------------------------------------------------------

/// What happened while placing one pattern vertex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VertexTrace {
    pub vertex: usize,
    pub block: usize,
    /// `|X_j|` for the vertex's block.
    pub candidates: usize,
    /// `|X_u|`, the candidates passing all three rules.
    pub survivors: usize,
    /// Killed because an earlier vertex already sits there.
    pub rejected_injective: usize,
    /// Killed because an image of an edge inside earlier blocks contains it.
    pub rejected_forbidden: usize,
    /// Killed because an edge to an earlier neighbour maps into `X_{<=j}`.
    pub rejected_forward: usize,
}

/// `|L ∩ X'_{j}|` after blocks `< j` are placed, where `L` collects the
/// images of every edge inside those blocks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForwardSample {
    pub block: usize,
    pub hits: usize,
    pub pool: usize,
}

impl ForwardSample {
    /// `|L ∩ X'_j| / (|X'_j| / 9)`; the property holds iff at most one.
    pub fn ratio(&self) -> f64 {
        if self.pool == 0 {
            0.0
        } else {
            9.0 * self.hits as f64 / self.pool as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockRun {
    /// Host vertex of each pattern vertex.
    pub phi: Vec<u32>,
    /// One entry per vertex, in processing order.
    pub trace: Vec<VertexTrace>,
    pub forward: Vec<ForwardSample>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockFailure {
    pub block: usize,
    pub vertex: usize,
    pub trace: Vec<VertexTrace>,
    pub forward: Vec<ForwardSample>,
}

/// The deterministic greedy embedder.
///
/// Blocks are processed in order and vertices within a block by the degree
/// order. A candidate `x ∈ X_j` for `u ∈ U_j` is rejected, in this order of
/// attribution, if (a) an earlier vertex already maps to `x`, (b) `x` lies in
/// an image of an edge with both ends in `U_{<j}`, or (c) for some earlier
/// neighbour `v`, `f(φ(v) x)` meets `X_{<=j}`. The smallest survivor wins.
///
/// With `primed`, also records `|L ∩ X'_{j+1}|` after each completed block.
pub fn run_algorithm1(
    pattern: &Pattern,
    plan: &DyadicPlan,
    sets: &[Vec<u32>],
    f: &SetMapping,
    primed: Option<&PrimedSets>,
) -> Result<BlockRun, BlockFailure> {
    assert_eq!(pattern.k(), 2, "the block embedder works on graphs");
    assert_eq!(sets.len(), plan.num_blocks());
    let host = f.host() as usize;
    let in_set = block_index(sets, f.host());
    let mut used = vec![false; host];
    let mut forbidden = vec![false; host];
    let mut phi = vec![u32::MAX; pattern.n()];
    let mut trace = Vec::with_capacity(pattern.n());
    let mut forward = Vec::new();
    let neighbors = pattern.neighbors();

    // Edges grouped by the block of their later endpoint.
    let mut closing: Vec<Vec<(usize, usize)>> = vec![Vec::new(); plan.num_blocks()];
    for e in pattern.edges() {
        let j = plan.block_of(e[0]).max(plan.block_of(e[1]));
        closing[j].push((e[0], e[1]));
    }

    let mut buf = Vec::with_capacity(f.image_size());
    for j in 0..plan.num_blocks() {
        for &u in plan.block(j) {
            let earlier: Vec<u32> = neighbors[u]
                .iter()
                .filter(|&&v| plan.rank(v) < plan.rank(u))
                .map(|&v| phi[v])
                .collect();
            let mut step = VertexTrace {
                vertex: u,
                block: j,
                candidates: sets[j].len(),
                survivors: 0,
                rejected_injective: 0,
                rejected_forbidden: 0,
                rejected_forward: 0,
            };
            let mut chosen = None;
            for &x in &sets[j] {
                if used[x as usize] {
                    step.rejected_injective += 1;
                    continue;
                }
                if forbidden[x as usize] {
                    step.rejected_forbidden += 1;
                    continue;
                }
                let hits_pools = earlier.iter().any(|&pv| {
                    f.eval_pair_into(pv, x, &mut buf);
                    buf.iter().any(|&z| (in_set[z as usize] as usize) <= j)
                });
                if hits_pools {
                    step.rejected_forward += 1;
                    continue;
                }
                step.survivors += 1;
                chosen.get_or_insert(x);
            }
            trace.push(step);
            match chosen {
                Some(x) => {
                    phi[u] = x;
                    used[x as usize] = true;
                }
                None => return Err(BlockFailure { block: j, vertex: u, trace, forward }),
            }
        }
        for &(v, w) in &closing[j] {
            f.eval_pair_into(phi[v], phi[w], &mut buf);
            for &z in &buf {
                forbidden[z as usize] = true;
            }
        }
        if let Some(primed) = primed {
            if j + 1 < plan.num_blocks() {
                let pool = &primed.sets[j + 1];
                let hits = pool.iter().filter(|&&x| forbidden[x as usize]).count();
                forward.push(ForwardSample { block: j + 1, hits, pool: pool.len() });
            }
        }
    }
    Ok(BlockRun { phi, trace, forward })
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Pattern edge whose image set is hit.
    pub edge: Vec<usize>,
    /// Pattern vertex whose host vertex lies in that image.
    pub vertex: usize,
    pub host: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CleanVerdict {
    pub clean: bool,
    pub violation: Option<Violation>,
}

/// Checks that `f(φ(e))` avoids `φ(V)` for every pattern edge `e`, reporting
/// the first violation in edge order.
pub fn verify_clean(p: &Pattern, phi: &[u32], f: &SetMapping) -> Result<CleanVerdict, EmbedError> {
    if phi.len() != p.n() || phi.iter().any(|&x| x >= f.host()) {
        return Err(EmbedError::BadMap { got: phi.len(), expected: p.n() });
    }
    if f.arity() != p.k() {
        return Err(EmbedError::UnsupportedMapping(format!(
            "mapping arity {} differs from pattern uniformity {}",
            f.arity(),
            p.k()
        )));
    }
    let mut owner = vec![usize::MAX; f.host() as usize];
    for (v, &x) in phi.iter().enumerate() {
        if owner[x as usize] != usize::MAX {
            return Err(EmbedError::NotInjective { first: owner[x as usize], second: v, host: x });
        }
        owner[x as usize] = v;
    }
    let mut image_edge = Vec::with_capacity(p.k());
    let mut buf = Vec::with_capacity(f.image_size());
    for e in p.edges() {
        image_edge.clear();
        image_edge.extend(e.iter().map(|&v| phi[v]));
        image_edge.sort_unstable();
        f.eval_into(&image_edge, &mut buf);
        if let Some(&z) = buf.iter().find(|&&z| owner[z as usize] != usize::MAX) {
            return Ok(CleanVerdict {
                clean: false,
                violation: Some(Violation { edge: e.clone(), vertex: owner[z as usize], host: z }),
            });
        }
    }
    Ok(CleanVerdict { clean: true, violation: None })
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineConfig {
    /// Host multiplier: auto-sized hosts get `N = ceil(C ℓ m)` vertices.
    pub c: f64,
    /// Sampling rounds before giving up.
    pub max_retries: usize,
    pub seed: u64,
    /// Record `|L ∩ X'_{j+1}|` along each run.
    pub diagnostics: bool,
    /// Resample whenever a pool misses the `(3.9, 4.1)|U_j|` window.
    pub require_size_property: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { c: 64.0, max_retries: 20, seed: 0, diagnostics: false, require_size_property: false }
    }
}

/// Host size for auto mode.
pub fn auto_host_size(c: f64, ell: usize, m: usize) -> u32 {
    (c * ell as f64 * m as f64).ceil() as u32
}

/// Where the pipeline's mapping comes from.
pub enum MappingChoice<'a> {
    Given(&'a SetMapping),
    /// Lazy uniform mapping with `ℓ`-sets on `ceil(C ℓ m)` vertices, seeded from
    /// the pipeline seed.
    Auto { ell: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RuleTotals {
    pub injective: usize,
    pub forbidden: usize,
    pub forward: usize,
}

impl RuleTotals {
    fn from_trace(trace: &[VertexTrace]) -> Self {
        trace.iter().fold(Self::default(), |acc, t| Self {
            injective: acc.injective + t.rejected_injective,
            forbidden: acc.forbidden + t.rejected_forbidden,
            forward: acc.forward + t.rejected_forward,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttemptOutcome {
    Embedded,
    /// Some pool missed the size window and the config asked to resample.
    SizeWindow,
    /// The block embedder ran out of candidates.
    Stuck { block: usize, vertex: usize },
    /// No host vertex left for an isolated pattern vertex.
    NoRoomForIsolated,
    /// Verification failed. Never expected; kept so a bug cannot go unnoticed.
    Dirty { violation: Violation },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttemptRecord {
    pub attempt: usize,
    pub seed: u64,
    pub primed_sizes: Vec<usize>,
    pub pruned_sizes: Vec<usize>,
    pub size_property: bool,
    pub pair_property: Option<bool>,
    pub pair_max_ratio: Option<f64>,
    pub forward_max_ratio: Option<f64>,
    pub rejections: RuleTotals,
    pub outcome: AttemptOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineReport {
    pub host: u32,
    pub ell: usize,
    /// `N / (ℓ m)` for the original edge count.
    pub c: f64,
    pub seed: u64,
    pub pattern_n: usize,
    pub pattern_m: usize,
    pub m_padded: usize,
    pub n_padded: usize,
    pub levels: usize,
    pub well_loaded: usize,
    /// Sampling rounds used; 1 means the first sample worked.
    pub retries: usize,
    pub success: bool,
    pub embedding: Option<Vec<u32>>,
    pub rejections: RuleTotals,
    pub attempts: Vec<AttemptRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Embedding {
    pub map: Vec<u32>,
    /// Placement trace of the original (non-padding) vertices that have edges.
    pub trace: Vec<VertexTrace>,
    pub clean: bool,
}

/// Everything about a (pattern, mapping) pair that does not depend on the seed.
pub struct Instance<'a> {
    original: Pattern,
    kept: Vec<usize>,
    isolated: Vec<usize>,
    padded: PaddedPattern,
    plan: DyadicPlan,
    well_loaded: WellLoadedSet,
    f: &'a SetMapping,
}

impl<'a> Instance<'a> {
    /// Pads, plans, and scans the mapping for well-loaded vertices. Isolated
    /// pattern vertices are set aside and placed after the main embedding.
    pub fn prepare(pattern: &Pattern, f: &'a SetMapping) -> Result<Self, EmbedError> {
        if pattern.k() != 2 {
            return Err(GraphError::NotAGraph(pattern.k()).into());
        }
        if f.arity() != 2 || f.overlap() != 0 {
            return Err(EmbedError::UnsupportedMapping(format!(
                "need a disjoint mapping on pairs, got k = {}, a = {}",
                f.arity(),
                f.overlap()
            )));
        }
        if pattern.m() == 0 {
            return Err(EmbedError::EmptyPattern);
        }
        let (core, kept) = pattern.without_isolated();
        let isolated = pattern.isolated_vertices();
        let padded = pad(&core)?;
        let plan = dyadic_plan(&padded);
        let well_loaded = well_loaded(f);
        Ok(Self { original: pattern.clone(), kept, isolated, padded, plan, well_loaded, f })
    }

    pub fn padded(&self) -> &PaddedPattern {
        &self.padded
    }

    pub fn plan(&self) -> &DyadicPlan {
        &self.plan
    }

    pub fn well_loaded(&self) -> &WellLoadedSet {
        &self.well_loaded
    }

    pub fn mapping(&self) -> &SetMapping {
        self.f
    }

    /// Places isolated pattern vertices on the smallest host vertices outside
    /// the image and outside every edge image.
    fn place_isolated(&self, phi: &mut [u32]) -> bool {
        if self.isolated.is_empty() {
            return true;
        }
        let mut blocked = vec![false; self.f.host() as usize];
        let mut buf = Vec::new();
        for &v in &self.kept {
            blocked[phi[v] as usize] = true;
        }
        for e in self.original.edges() {
            self.f.eval_pair_into(phi[e[0]], phi[e[1]], &mut buf);
            for &z in &buf {
                blocked[z as usize] = true;
            }
        }
        let mut free = (0..self.f.host()).filter(|&x| !blocked[x as usize]);
        for &v in &self.isolated {
            match free.next() {
                Some(x) => phi[v] = x,
                None => return false,
            }
        }
        true
    }

    fn report_skeleton(&self, cfg: &PipelineConfig) -> PipelineReport {
        PipelineReport {
            host: self.f.host(),
            ell: self.f.image_size(),
            c: self.f.host() as f64 / (self.f.image_size() * self.original.m()) as f64,
            seed: cfg.seed,
            pattern_n: self.original.n(),
            pattern_m: self.original.m(),
            m_padded: self.padded.m_padded,
            n_padded: self.padded.n_padded,
            levels: self.padded.levels,
            well_loaded: self.well_loaded.len(),
            retries: 0,
            success: false,
            embedding: None,
            rejections: RuleTotals::default(),
            attempts: Vec::new(),
        }
    }

    /// One sampling round: sample, count, prune, embed, verify.
    fn attempt(&self, cfg: &PipelineConfig, attempt: usize) -> Result<(AttemptRecord, Option<Embedding>), EmbedError> {
        let seed = derive_seed(cfg.seed, stream::PARTITION, attempt as u64);
        let primed = sample_partition(&self.well_loaded, &self.plan, seed)?;
        let size_property = check_size_property(&primed, &self.plan);
        let mut record = AttemptRecord {
            attempt,
            seed,
            primed_sizes: primed.sizes(),
            pruned_sizes: Vec::new(),
            size_property,
            pair_property: None,
            pair_max_ratio: None,
            forward_max_ratio: None,
            rejections: RuleTotals::default(),
            outcome: AttemptOutcome::SizeWindow,
        };
        if cfg.require_size_property && !size_property {
            return Ok((record, None));
        }
        let counts = compute_counts(&primed, self.f);
        record.pair_property = Some(pair_property_holds(&counts, &self.plan));
        record.pair_max_ratio = Some(pair_max_ratio(&counts, &self.plan));
        let pruned = prune(&primed, &counts, &self.plan);
        record.pruned_sizes = pruned.sizes();
        let diag = cfg.diagnostics.then_some(&primed);
        let forward_max = |samples: &[ForwardSample]| samples.iter().map(ForwardSample::ratio).fold(0.0, f64::max);
        let run = match run_algorithm1(&self.padded.graph, &self.plan, &pruned.sets, self.f, diag) {
            Ok(run) => run,
            Err(fail) => {
                record.rejections = RuleTotals::from_trace(&fail.trace);
                record.forward_max_ratio = cfg.diagnostics.then(|| forward_max(&fail.forward));
                record.outcome = AttemptOutcome::Stuck { block: fail.block, vertex: fail.vertex };
                return Ok((record, None));
            }
        };
        record.rejections = RuleTotals::from_trace(&run.trace);
        record.forward_max_ratio = cfg.diagnostics.then(|| forward_max(&run.forward));

        let mut phi = vec![u32::MAX; self.original.n()];
        for (core_id, &orig) in self.kept.iter().enumerate() {
            phi[orig] = run.phi[core_id];
        }
        if !self.place_isolated(&mut phi) {
            record.outcome = AttemptOutcome::NoRoomForIsolated;
            return Ok((record, None));
        }
        let verdict = verify_clean(&self.original, &phi, self.f)?;
        if let Some(violation) = verdict.violation {
            record.outcome = AttemptOutcome::Dirty { violation };
            return Ok((record, None));
        }
        record.outcome = AttemptOutcome::Embedded;
        let trace = run
            .trace
            .into_iter()
            .filter(|t| t.vertex < self.kept.len())
            .map(|t| VertexTrace { vertex: self.kept[t.vertex], ..t })
            .collect();
        Ok((record, Some(Embedding { map: phi, trace, clean: true })))
    }

    /// Runs sampling rounds until one yields a verified clean embedding.
    pub fn run(&self, cfg: &PipelineConfig) -> Result<(Embedding, PipelineReport), EmbedError> {
        let mut report = self.report_skeleton(cfg);
        for attempt in 0..cfg.max_retries.max(1) {
            let (record, found) = self.attempt(cfg, attempt)?;
            report.retries = attempt + 1;
            report.rejections = record.rejections;
            report.attempts.push(record);
            if let Some(embedding) = found {
                report.success = true;
                report.embedding = Some(embedding.map.clone());
                return Ok((embedding, report));
            }
        }
        Err(EmbedError::RetriesExhausted(Box::new(report)))
    }

    /// Repeated sampling without retry, tallying how often each pool property
    /// holds and how often the block embedder succeeds.
    pub fn measure_properties(&self, samples: usize, seed: u64) -> Result<PropertyTable, EmbedError> {
        let mut rows = Vec::with_capacity(samples);
        for s in 0..samples {
            let sample_seed = derive_seed(seed, stream::TRIAL, s as u64);
            let primed = sample_partition(&self.well_loaded, &self.plan, sample_seed)?;
            let counts = compute_counts(&primed, self.f);
            let pruned = prune(&primed, &counts, &self.plan);
            let run = run_algorithm1(&self.padded.graph, &self.plan, &pruned.sets, self.f, Some(&primed));
            let (embedded, forward) = match &run {
                Ok(r) => (true, r.forward.as_slice()),
                Err(fail) => (false, fail.forward.as_slice()),
            };
            let forward_max_ratio =
                (!forward.is_empty()).then(|| forward.iter().map(ForwardSample::ratio).fold(0.0, f64::max));
            rows.push(PropertySample {
                seed: sample_seed,
                size_property: check_size_property(&primed, &self.plan),
                pair_property: pair_property_holds(&counts, &self.plan),
                pair_max_ratio: pair_max_ratio(&counts, &self.plan),
                forward_property: forward_max_ratio.map(|r| r <= 1.0),
                forward_max_ratio,
                embedded,
            });
        }
        Ok(PropertyTable::from_rows(rows))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertySample {
    pub seed: u64,
    pub size_property: bool,
    pub pair_property: bool,
    pub pair_max_ratio: f64,
    /// `None` when the embedder failed inside block 0, so nothing was measured.
    pub forward_property: Option<bool>,
    pub forward_max_ratio: Option<f64>,
    pub embedded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyTable {
    pub samples: usize,
    pub size_rate: f64,
    pub pair_rate: f64,
    /// Over samples where the forward property was measured.
    pub forward_rate: Option<f64>,
    pub forward_measured: usize,
    pub embed_rate: f64,
    pub rows: Vec<PropertySample>,
}

impl PropertyTable {
    fn from_rows(rows: Vec<PropertySample>) -> Self {
        let samples = rows.len();
        let rate = |count: usize, total: usize| if total == 0 { 0.0 } else { count as f64 / total as f64 };
        let measured: Vec<bool> = rows.iter().filter_map(|r| r.forward_property).collect();
        Self {
            samples,
            size_rate: rate(rows.iter().filter(|r| r.size_property).count(), samples),
            pair_rate: rate(rows.iter().filter(|r| r.pair_property).count(), samples),
            forward_rate: (!measured.is_empty()).then(|| rate(measured.iter().filter(|&&b| b).count(), measured.len())),
            forward_measured: measured.len(),
            embed_rate: rate(rows.iter().filter(|r| r.embedded).count(), samples),
            rows,
        }
    }
}

/// Finds a clean embedding of `p` for the chosen mapping, restricted to the
/// original vertices, or reports every attempt if all rounds failed.
pub fn embed_pipeline(
    p: &Pattern,
    choice: MappingChoice<'_>,
    cfg: &PipelineConfig,
) -> Result<(Embedding, PipelineReport), EmbedError> {
    match choice {
        MappingChoice::Given(f) => Instance::prepare(p, f)?.run(cfg),
        MappingChoice::Auto { ell } => {
            let f = auto_mapping(p, ell, cfg)?;
            Instance::prepare(p, &f)?.run(cfg)
        }
    }
}

/// The lazy uniform mapping auto mode would use for `p`.
pub fn auto_mapping(p: &Pattern, ell: usize, cfg: &PipelineConfig) -> Result<SetMapping, EmbedError> {
    let host = auto_host_size(cfg.c, ell, p.m());
    Ok(gen_uniform_disjoint(host, 2, ell, derive_seed(cfg.seed, stream::MAPPING, 0), Storage::Lazy)?)
}

/// [`Instance::measure_properties`] on a fresh instance.
pub fn measure_properties(p: &Pattern, f: &SetMapping, samples: usize, seed: u64) -> Result<PropertyTable, EmbedError> {
    Instance::prepare(p, f)?.measure_properties(samples, seed)
}
