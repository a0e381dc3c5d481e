//! Set mappings `f` from `k`-edges of the complete host on `0..N` to
//! `ℓ`-element vertex sets, with at most `a` vertices shared with the edge.
//!
//! Two backings exist. A dense table stores every image and is exactly
//! uniform when generated; a lazy mapping evaluates a keyed pseudo-random
//! function of `(seed, edge)` and needs no memory, which is what makes hosts
//! with tens of thousands of vertices practical.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::seed::{mix64, rng_from, KeyedStream};

/// Largest dense table, in stored vertex ids.
pub const DENSE_LIMIT: u64 = 1 << 26;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MappingError {
    #[error("host with {host} vertices is too small: {reason}")]
    HostTooSmall { host: u32, reason: String },
    #[error("edge {0:?} is not a sorted set of distinct in-range vertices")]
    BadEdge(Vec<u32>),
    #[error("image of {edge:?} is invalid: {reason}")]
    BadImage { edge: Vec<u32>, reason: String },
    #[error("dense table of {0} entries exceeds the limit")]
    TooLarge(u64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("edge {0:?} is missing from the mapping file")]
    MissingEdge(Vec<u32>),
    #[error("reduction needs image size 2 and overlap at most 1: {0}")]
    NotReducible(String),
    #[error("operation needs a mapping on 2-edges, got arity {0}")]
    NotPairs(usize),
}

/// How a generated mapping is stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    Dense,
    Lazy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LazyRule {
    /// Uniform `ℓ`-subset of the complement of the edge.
    UniformDisjoint,
    /// One endpoint of the edge plus one outside vertex.
    IncidentEdge,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Backing {
    Dense(Vec<u32>),
    Lazy { seed: u64, rule: LazyRule },
    /// Smallest vertex of the inner image outside the edge.
    Reduced(Box<SetMapping>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetMapping {
    host: u32,
    arity: usize,
    image_size: usize,
    overlap: usize,
    backing: Backing,
}

/// Serializable summary of a mapping.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MappingInfo {
    pub host: u32,
    pub k: usize,
    pub ell: usize,
    pub a: usize,
    pub backing: String,
}

fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Colexicographic rank of a sorted edge.
#[inline(always)]
fn colex_rank(e: &[u32]) -> u64 {
    if e.len() == 2 {
        let (u, v) = (e[0] as u64, e[1] as u64);
        return v * (v - 1) / 2 + u;
    }
    e.iter().enumerate().map(|(i, &v)| binom(v as u64, i as u64 + 1)).sum()
}

/// Maps `idx` in `0..N-|e|` to the idx-th vertex of `0..N` outside sorted `e`.
#[inline(always)]
fn skip_edge(idx: u32, e: &[u32]) -> u32 {
    let mut v = idx;
    for &u in e {
        if v >= u {
            v += 1;
        } else {
            break;
        }
    }
    v
}

/// Calls `visit` on every sorted `k`-subset of `0..host` in lexicographic order.
pub fn for_each_edge(host: u32, k: usize, mut visit: impl FnMut(&[u32])) {
    if k == 0 || (host as usize) < k {
        return;
    }
    let mut e: Vec<u32> = (0..k as u32).collect();
    loop {
        visit(&e);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if e[i] < host - (k - i) as u32 {
                e[i] += 1;
                for t in i + 1..k {
                    e[t] = e[t - 1] + 1;
                }
                break;
            }
        }
    }
}

impl SetMapping {
    pub fn host(&self) -> u32 {
        self.host
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.backing, Backing::Dense(_))
    }

    pub fn edge_count(&self) -> u64 {
        binom(self.host as u64, self.arity as u64)
    }

    pub fn info(&self) -> MappingInfo {
        let backing = match &self.backing {
            Backing::Dense(_) => "dense".to_string(),
            Backing::Lazy { seed, rule } => match rule {
                LazyRule::UniformDisjoint => format!("lazy:uniform-disjoint:{seed:#x}"),
                LazyRule::IncidentEdge => format!("lazy:incident-edge:{seed:#x}"),
            },
            Backing::Reduced(inner) => format!("reduced({})", inner.info().backing),
        };
        MappingInfo { host: self.host, k: self.arity, ell: self.image_size, a: self.overlap, backing }
    }

    /// Builds a dense mapping from `image`, validating every edge.
    pub fn from_fn(
        host: u32,
        arity: usize,
        image_size: usize,
        overlap: usize,
        mut image: impl FnMut(&[u32]) -> Vec<u32>,
    ) -> Result<Self, MappingError> {
        let total = binom(host as u64, arity as u64).saturating_mul(image_size as u64);
        if total > DENSE_LIMIT {
            return Err(MappingError::TooLarge(total));
        }
        if (host as usize) < arity {
            return Err(MappingError::HostTooSmall { host, reason: format!("fewer than k = {arity} vertices") });
        }
        let mut table = vec![0u32; total as usize];
        let mut failure = None;
        for_each_edge(host, arity, |e| {
            if failure.is_some() {
                return;
            }
            let mut img = image(e);
            img.sort_unstable();
            match check_image(host, image_size, overlap, e, &img) {
                Ok(()) => {
                    let at = colex_rank(e) as usize * image_size;
                    table[at..at + image_size].copy_from_slice(&img);
                }
                Err(err) => failure = Some(err),
            }
        });
        if let Some(err) = failure {
            return Err(err);
        }
        Ok(Self { host, arity, image_size, overlap, backing: Backing::Dense(table) })
    }

    /// The same mapping backed by a dense table.
    pub fn to_dense(&self) -> Result<Self, MappingError> {
        if self.is_dense() {
            return Ok(self.clone());
        }
        let mut buf = Vec::with_capacity(self.image_size);
        Self::from_fn(self.host, self.arity, self.image_size, self.overlap, |e| {
            self.eval_into(e, &mut buf);
            buf.clone()
        })
    }

    /// `f(e)` as a sorted vector, after validating `e`.
    pub fn eval(&self, e: &[u32]) -> Result<Vec<u32>, MappingError> {
        let valid = e.len() == self.arity
            && e.windows(2).all(|w| w[0] < w[1])
            && e.last().is_some_and(|&v| v < self.host);
        if !valid {
            return Err(MappingError::BadEdge(e.to_vec()));
        }
        let mut out = Vec::with_capacity(self.image_size);
        self.eval_into(e, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation into `out` (cleared first). `e` must be sorted,
    /// distinct, in range, and of the mapping's arity.
    #[inline]
    pub fn eval_into(&self, e: &[u32], out: &mut Vec<u32>) {
        debug_assert_eq!(e.len(), self.arity);
        debug_assert!(e.windows(2).all(|w| w[0] < w[1]));
        out.clear();
        match &self.backing {
            Backing::Dense(table) => {
                let at = colex_rank(e) as usize * self.image_size;
                out.extend_from_slice(&table[at..at + self.image_size]);
            }
            Backing::Lazy { seed, rule } => {
                let mut s = KeyedStream::new(mix64(seed ^ mix64(colex_rank(e))));
                match rule {
                    LazyRule::UniformDisjoint => {
                        let range = self.host - self.arity as u32;
                        while out.len() < self.image_size {
                            let v = skip_edge(s.below(range), e);
                            if !out.contains(&v) {
                                out.push(v);
                            }
                        }
                        out.sort_unstable();
                    }
                    LazyRule::IncidentEdge => {
                        let side = e[(s.next_u64() >> 63) as usize];
                        let w = skip_edge(s.below(self.host - 2), e);
                        out.extend_from_slice(&[side.min(w), side.max(w)]);
                    }
                }
            }
            Backing::Reduced(inner) => {
                inner.eval_into(e, out);
                let v = *out.iter().find(|x| !e.contains(x)).expect("reducible image leaves e");
                out.clear();
                out.push(v);
            }
        }
    }

    /// Evaluates on the pair `{u, v}` in either order.
    #[inline]
    pub fn eval_pair_into(&self, u: u32, v: u32, out: &mut Vec<u32>) {
        let e = [u.min(v), u.max(v)];
        self.eval_into(&e, out);
    }

    /// Every `(edge, image)` pair in lexicographic edge order.
    pub fn for_each_image(&self, mut visit: impl FnMut(&[u32], &[u32])) {
        let mut buf = Vec::with_capacity(self.image_size);
        for_each_edge(self.host, self.arity, |e| {
            self.eval_into(e, &mut buf);
            visit(e, &buf);
        });
    }
}

fn check_image(host: u32, image_size: usize, overlap: usize, e: &[u32], img: &[u32]) -> Result<(), MappingError> {
    let bad = |reason: String| Err(MappingError::BadImage { edge: e.to_vec(), reason });
    if img.len() != image_size {
        return bad(format!("has {} vertices, expected {image_size}", img.len()));
    }
    if img.windows(2).any(|w| w[0] == w[1]) {
        return bad("repeats a vertex".into());
    }
    if let Some(&v) = img.iter().find(|&&v| v >= host) {
        return bad(format!("vertex {v} outside 0..{host}"));
    }
    let shared = img.iter().filter(|v| e.contains(v)).count();
    if shared > overlap {
        return bad(format!("overlap: shares {shared} vertices with the edge, budget {overlap}"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Each `f(e)` uniform over `ℓ`-subsets of the complement of `e`.
pub fn gen_uniform_disjoint(
    host: u32,
    arity: usize,
    image_size: usize,
    seed: u64,
    storage: Storage,
) -> Result<SetMapping, MappingError> {
    if (host as usize) < arity + image_size || arity < 1 || image_size < 1 {
        return Err(MappingError::HostTooSmall {
            host,
            reason: format!("need N >= k + ℓ = {}", arity + image_size),
        });
    }
    match storage {
        Storage::Lazy => Ok(SetMapping {
            host,
            arity,
            image_size,
            overlap: 0,
            backing: Backing::Lazy { seed, rule: LazyRule::UniformDisjoint },
        }),
        Storage::Dense => {
            let mut rng = rng_from(seed);
            let outside = host as usize - arity;
            SetMapping::from_fn(host, arity, image_size, 0, |e| {
                index::sample(&mut rng, outside, image_size)
                    .into_iter()
                    .map(|i| skip_edge(i as u32, e))
                    .collect()
            })
        }
    }
}

/// `f(e)` a uniformly random host edge disjoint from `e`.
pub fn gen_random_disjoint_edge(host: u32, seed: u64, storage: Storage) -> Result<SetMapping, MappingError> {
    if host < 4 {
        return Err(MappingError::HostTooSmall { host, reason: "need N >= 4".into() });
    }
    gen_uniform_disjoint(host, 2, 2, seed, storage)
}

/// `f(e)` a uniformly random host edge sharing exactly one vertex with `e`.
pub fn gen_random_incident_edge(host: u32, seed: u64, storage: Storage) -> Result<SetMapping, MappingError> {
    if host < 3 {
        return Err(MappingError::HostTooSmall { host, reason: "need N >= 3".into() });
    }
    match storage {
        Storage::Lazy => Ok(SetMapping {
            host,
            arity: 2,
            image_size: 2,
            overlap: 1,
            backing: Backing::Lazy { seed, rule: LazyRule::IncidentEdge },
        }),
        Storage::Dense => {
            let mut rng = rng_from(seed);
            SetMapping::from_fn(host, 2, 2, 1, |e| {
                let side = e[rng.gen_range(0..2)];
                let w = skip_edge(rng.gen_range(0..host - 2), e);
                vec![side, w]
            })
        }
    }
}

/// `f'(e)` = the smallest vertex of `f(e) \ e`. Needs `ℓ = 2`; the result has
/// `ℓ = 1` and no overlap.
pub fn reduce_to_disjoint(f: &SetMapping) -> Result<SetMapping, MappingError> {
    if f.image_size != 2 {
        return Err(MappingError::NotReducible(format!("image size is {}", f.image_size)));
    }
    match &f.backing {
        Backing::Dense(_) => {
            let mut bad = None;
            f.for_each_image(|e, img| {
                if bad.is_none() && img.iter().all(|v| e.contains(v)) {
                    bad = Some(e.to_vec());
                }
            });
            if let Some(e) = bad {
                return Err(MappingError::NotReducible(format!("f({e:?}) lies inside the edge")));
            }
            let mut buf = Vec::with_capacity(2);
            SetMapping::from_fn(f.host, f.arity, 1, 0, |e| {
                f.eval_into(e, &mut buf);
                vec![*buf.iter().find(|v| !e.contains(v)).expect("checked above")]
            })
        }
        _ if f.overlap <= 1 => Ok(SetMapping {
            host: f.host,
            arity: f.arity,
            image_size: 1,
            overlap: 0,
            backing: Backing::Reduced(Box::new(f.clone())),
        }),
        _ => Err(MappingError::NotReducible(format!("overlap budget is {}", f.overlap))),
    }
}

// ---------------------------------------------------------------------------
// Well-loaded vertices
// ---------------------------------------------------------------------------

/// Host vertices lying in at most `ℓN` images. Always more than half the host.
#[derive(Clone, Debug, Serialize)]
pub struct WellLoadedSet {
    pub members: Vec<u32>,
    pub threshold: u64,
    pub loads: Vec<u64>,
}

impl WellLoadedSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Scans every host edge and counts, for each vertex, the images containing it.
pub fn image_loads(f: &SetMapping) -> Vec<u64> {
    let mut loads = vec![0u64; f.host as usize];
    let mut buf = Vec::with_capacity(f.image_size);
    if let (2, Backing::Lazy { seed, rule: LazyRule::UniformDisjoint }) = (f.arity, &f.backing) {
        // Same draws as `eval_into`, minus the sort and the dispatch.
        let range = f.host - 2;
        let mut rank = 0u64;
        for v in 1..f.host {
            for u in 0..v {
                let mut s = KeyedStream::new(mix64(seed ^ mix64(rank)));
                rank += 1;
                buf.clear();
                while buf.len() < f.image_size {
                    let mut x = s.below(range);
                    if x >= u {
                        x += 1;
                        if x >= v {
                            x += 1;
                        }
                    }
                    if !buf.contains(&x) {
                        buf.push(x);
                        loads[x as usize] += 1;
                    }
                }
            }
        }
    } else if f.arity == 2 {
        for v in 1..f.host {
            for u in 0..v {
                f.eval_into(&[u, v], &mut buf);
                for &x in &buf {
                    loads[x as usize] += 1;
                }
            }
        }
    } else {
        f.for_each_image(|_, img| {
            for &x in img {
                loads[x as usize] += 1;
            }
        });
    }
    loads
}

pub fn well_loaded(f: &SetMapping) -> WellLoadedSet {
    let loads = image_loads(f);
    let threshold = f.image_size as u64 * f.host as u64;
    let members = (0..f.host).filter(|&x| loads[x as usize] <= threshold).collect();
    WellLoadedSet { members, threshold, loads }
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

/// Header `N=<N> k=<k> ell=<ℓ> a=<a>`, then one `u v : w1 .. wℓ` line per
/// host edge in lexicographic order.
pub fn serialize_mapping(f: &SetMapping) -> Result<String, MappingError> {
    if !f.is_dense() {
        return Err(MappingError::Parse { line: 0, msg: "only dense mappings are written to files".into() });
    }
    let mut out = format!("N={} k={} ell={} a={}\n", f.host, f.arity, f.image_size, f.overlap);
    f.for_each_image(|e, img| {
        for (i, v) in e.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
        }
        out.push_str(" :");
        for v in img {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    });
    Ok(out)
}

pub fn parse_mapping(text: &str) -> Result<SetMapping, MappingError> {
    let mut header: Option<(u32, usize, usize, usize)> = None;
    let mut images: BTreeMap<Vec<u32>, Vec<u32>> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let err = |msg: String| MappingError::Parse { line: line_no, msg };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((host, arity, ell, overlap)) = header else {
            header = Some(parse_mapping_header(line).map_err(err)?);
            continue;
        };
        let (lhs, rhs) = line.split_once(':').ok_or_else(|| err("expected `u v : w..`".into()))?;
        let ids = |s: &str| -> Result<Vec<u32>, String> {
            s.split_whitespace().map(|t| t.parse::<u32>().map_err(|e| format!("{t:?}: {e}"))).collect()
        };
        let mut e = ids(lhs).map_err(err)?;
        let mut img = ids(rhs).map_err(err)?;
        e.sort_unstable();
        img.sort_unstable();
        if e.len() != arity || e.windows(2).any(|w| w[0] == w[1]) || e.iter().any(|&v| v >= host) {
            return Err(err(format!("bad edge {e:?}")));
        }
        check_image(host, ell, overlap, &e, &img).map_err(|x| err(x.to_string()))?;
        if images.insert(e.clone(), img).is_some() {
            return Err(err(format!("edge {e:?} listed twice")));
        }
    }
    let (host, arity, ell, overlap) =
        header.ok_or(MappingError::Parse { line: 0, msg: "missing header".into() })?;
    let mut missing = None;
    for_each_edge(host, arity, |e| {
        if missing.is_none() && !images.contains_key(e) {
            missing = Some(e.to_vec());
        }
    });
    if let Some(e) = missing {
        return Err(MappingError::MissingEdge(e));
    }
    SetMapping::from_fn(host, arity, ell, overlap, |e| images[e].clone())
}

fn parse_mapping_header(line: &str) -> Result<(u32, usize, usize, usize), String> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 4 {
        return Err(format!("header needs N k ell a, got {line:?}"));
    }
    let mut vals = [None; 4];
    for (pos, tok) in tokens.iter().enumerate() {
        let (slot, value) = match tok.split_once('=') {
            Some((key, value)) => {
                let slot = match key {
                    "N" | "n" => 0,
                    "k" => 1,
                    "ell" | "ℓ" | "l" => 2,
                    "a" => 3,
                    _ => return Err(format!("unknown header key {key:?}")),
                };
                (slot, value)
            }
            None => (pos, *tok),
        };
        vals[slot] = Some(value.parse::<u64>().map_err(|e| format!("{tok}: {e}"))?);
    }
    let get = |i: usize| vals[i].ok_or_else(|| "incomplete header".to_string());
    let host = u32::try_from(get(0)?).map_err(|_| "N too large".to_string())?;
    Ok((host, get(1)? as usize, get(2)? as usize, get(3)? as usize))
}
