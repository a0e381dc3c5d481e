//! Clean embeddings of bounded-degree `k`-uniform hypergraphs by resampling.
//!
//! Vertex `i` of the pattern gets an independent uniform host vertex `x_i`.
//! Two families of bad events can spoil the result:
//!
//! * `A(i, j)`: `x_i = x_j`, for `i < j`;
//! * `B(e, i)`: `x_i ∈ f({x_j : j ∈ e})`, for an edge `e` and `i ∉ e`.
//!
//! With `N = 10 k² n Δ` the local lemma condition `e p (d + 1) <= 1` holds for
//! `p = k / N` and `d = 3 k Δ n`, and Moser–Tardos resampling finds an
//! assignment avoiding every event.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graphs::{GraphError, Pattern};
use crate::mappings::{gen_uniform_disjoint, MappingError, SetMapping, Storage};
use crate::seed::{derive_seed, rng_from, stream};

#[derive(Debug, Error)]
pub enum LllError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error("pattern has no edges")]
    EmptyPattern,
    #[error("mapping does not fit the pattern: {0}")]
    Mismatch(String),
    #[error("resampling budget of {resamples} exhausted; last violated event {last}")]
    BudgetExhausted { resamples: u64, last: BadEvent, histogram: EventHistogram },
}

/// `10 k² n Δ`.
pub fn required_host_size(p: &Pattern) -> Result<u64, LllError> {
    if let Some(&v) = p.isolated_vertices().first() {
        return Err(GraphError::IsolatedVertex(v).into());
    }
    if p.m() == 0 {
        return Err(LllError::EmptyPattern);
    }
    let (k, n, delta) = (p.k() as u64, p.n() as u64, p.max_degree() as u64);
    Ok(10 * k * k * n * delta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LllCondition {
    /// `k / N`
    pub p: f64,
    /// `3 k Δ n`
    pub d: u64,
    /// `e p (d + 1)`
    pub value: f64,
    pub holds: bool,
}

pub fn lll_condition(pattern: &Pattern, host: u64) -> LllCondition {
    let p = pattern.k() as f64 / host as f64;
    let d = 3 * (pattern.k() * pattern.max_degree() * pattern.n()) as u64;
    let value = std::f64::consts::E * p * (d + 1) as f64;
    LllCondition { p, d, value, holds: value <= 1.0 }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BadEvent {
    Collision { i: usize, j: usize },
    Blocked { edge: usize, vertex: usize },
}

impl fmt::Display for BadEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BadEvent::Collision { i, j } => write!(f, "A({i},{j})"),
            BadEvent::Blocked { edge, vertex } => write!(f, "B(e{edge},{vertex})"),
        }
    }
}

/// Violation counts, per family and per event.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EventHistogram {
    pub collisions: u64,
    pub blocked: u64,
    pub by_event: BTreeMap<String, u64>,
}

impl EventHistogram {
    fn record(&mut self, event: &BadEvent) {
        match event {
            BadEvent::Collision { .. } => self.collisions += 1,
            BadEvent::Blocked { .. } => self.blocked += 1,
        }
        *self.by_event.entry(event.to_string()).or_default() += 1;
    }
}

pub struct LllProblem<'a> {
    pattern: &'a Pattern,
    f: SetMappingRef<'a>,
}

enum SetMappingRef<'a> {
    Borrowed(&'a SetMapping),
    Owned(SetMapping),
}

impl SetMappingRef<'_> {
    fn get(&self) -> &SetMapping {
        match self {
            SetMappingRef::Borrowed(f) => f,
            SetMappingRef::Owned(f) => f,
        }
    }
}

impl<'a> LllProblem<'a> {
    /// `f` must map `k`-sets to disjoint `k`-sets, `k` the pattern's uniformity.
    pub fn new(pattern: &'a Pattern, f: &'a SetMapping) -> Result<Self, LllError> {
        Self::check(pattern, f)?;
        Ok(Self { pattern, f: SetMappingRef::Borrowed(f) })
    }

    /// Host of size [`required_host_size`] with a lazy uniform mapping.
    pub fn auto(pattern: &'a Pattern, seed: u64) -> Result<Self, LllError> {
        let host = required_host_size(pattern)?;
        Self::with_host(pattern, host, seed)
    }

    /// Lazy uniform mapping on `host` vertices.
    pub fn with_host(pattern: &'a Pattern, host: u64, seed: u64) -> Result<Self, LllError> {
        let host = u32::try_from(host).map_err(|_| LllError::Mismatch(format!("host {host} too large")))?;
        let k = pattern.k();
        let f = gen_uniform_disjoint(host, k, k, derive_seed(seed, stream::MAPPING, 0), Storage::Lazy)?;
        Self::check(pattern, &f)?;
        Ok(Self { pattern, f: SetMappingRef::Owned(f) })
    }

    fn check(pattern: &Pattern, f: &SetMapping) -> Result<(), LllError> {
        if pattern.m() == 0 {
            return Err(LllError::EmptyPattern);
        }
        let k = pattern.k();
        if f.arity() != k || f.image_size() != k || f.overlap() != 0 {
            return Err(LllError::Mismatch(format!(
                "need k = ell = {k}, a = 0; got k = {}, ell = {}, a = {}",
                f.arity(),
                f.image_size(),
                f.overlap()
            )));
        }
        if (f.host() as usize) < pattern.n() {
            return Err(LllError::Mismatch(format!("host {} smaller than n = {}", f.host(), pattern.n())));
        }
        Ok(())
    }

    pub fn pattern(&self) -> &Pattern {
        self.pattern
    }

    pub fn mapping(&self) -> &SetMapping {
        self.f.get()
    }

    pub fn host(&self) -> u32 {
        self.mapping().host()
    }

    /// `C(n, 2) + m (n - k)`.
    pub fn event_count(&self) -> u64 {
        let (n, m, k) = (self.pattern.n() as u64, self.pattern.m() as u64, self.pattern.k() as u64);
        n * (n - 1) / 2 + m * (n - k)
    }

    pub fn condition(&self) -> LllCondition {
        lll_condition(self.pattern, self.host() as u64)
    }

    /// Host vertices that event `event` depends on, ascending.
    pub fn event_variables(&self, event: &BadEvent) -> Vec<usize> {
        match *event {
            BadEvent::Collision { i, j } => vec![i, j],
            BadEvent::Blocked { edge, vertex } => {
                let mut vars = self.pattern.edges()[edge].clone();
                vars.push(vertex);
                vars.sort_unstable();
                vars
            }
        }
    }
}

/// First violated event: collisions in `(i, j)` order, then blocked events in
/// `(edge, vertex)` order.
pub fn find_violated_event(x: &[u32], problem: &LllProblem<'_>) -> Option<BadEvent> {
    let n = x.len();
    assert_eq!(n, problem.pattern.n());
    for i in 0..n {
        for j in i + 1..n {
            if x[i] == x[j] {
                return Some(BadEvent::Collision { i, j });
            }
        }
    }
    // x is injective from here on.
    let f = problem.mapping();
    let owner: BTreeMap<u32, usize> = x.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut image_edge = Vec::with_capacity(problem.pattern.k());
    let mut buf = Vec::with_capacity(f.image_size());
    for (idx, e) in problem.pattern.edges().iter().enumerate() {
        image_edge.clear();
        image_edge.extend(e.iter().map(|&v| x[v]));
        image_edge.sort_unstable();
        f.eval_into(&image_edge, &mut buf);
        let hit = buf.iter().filter_map(|z| owner.get(z)).copied().filter(|i| !e.contains(i)).min();
        if let Some(vertex) = hit {
            return Some(BadEvent::Blocked { edge: idx, vertex });
        }
    }
    None
}

/// Moser–Tardos resampling with the first-violated-event schedule.
pub struct MoserTardos<'p, 'a> {
    problem: &'p LllProblem<'a>,
    rng: ChaCha8Rng,
    x: Vec<u32>,
    resamples: u64,
    histogram: EventHistogram,
}

impl<'p, 'a> MoserTardos<'p, 'a> {
    /// Draws the initial assignment uniformly.
    pub fn new(problem: &'p LllProblem<'a>, seed: u64) -> Self {
        let mut rng = rng_from(derive_seed(seed, stream::RESAMPLE, 0));
        let host = problem.host();
        let x = (0..problem.pattern.n()).map(|_| rng.gen_range(0..host)).collect();
        Self { problem, rng, x, resamples: 0, histogram: EventHistogram::default() }
    }

    pub fn assignment(&self) -> &[u32] {
        &self.x
    }

    pub fn resamples(&self) -> u64 {
        self.resamples
    }

    /// Resamples the variables of the first violated event and returns it, or
    /// returns `None` if nothing is violated.
    pub fn step(&mut self) -> Option<BadEvent> {
        let event = find_violated_event(&self.x, self.problem)?;
        let host = self.problem.host();
        for v in self.problem.event_variables(&event) {
            self.x[v] = self.rng.gen_range(0..host);
        }
        self.resamples += 1;
        self.histogram.record(&event);
        Some(event)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MtRun {
    pub assignment: Vec<u32>,
    pub resamples: u64,
    pub histogram: EventHistogram,
}

/// Default budget: 100 times the event count.
pub fn default_budget(problem: &LllProblem<'_>) -> u64 {
    100 * problem.event_count()
}

pub fn moser_tardos(problem: &LllProblem<'_>, seed: u64, max_resamples: u64) -> Result<MtRun, LllError> {
    let mut mt = MoserTardos::new(problem, seed);
    loop {
        if mt.resamples >= max_resamples {
            if let Some(last) = find_violated_event(&mt.x, problem) {
                return Err(LllError::BudgetExhausted { resamples: mt.resamples, last, histogram: mt.histogram });
            }
        }
        if mt.step().is_none() {
            break;
        }
    }
    Ok(MtRun { assignment: mt.x, resamples: mt.resamples, histogram: mt.histogram })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LllReport {
    pub host: u32,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub max_degree: usize,
    pub seed: u64,
    pub condition: LllCondition,
    pub event_count: u64,
    pub budget: u64,
    pub success: bool,
    pub resamples: u64,
    pub assignment: Option<Vec<u32>>,
    pub clean: Option<bool>,
    pub last_event: Option<BadEvent>,
    pub histogram: EventHistogram,
}

/// Runs resampling and verifies the result against the mapping.
pub fn lll_embed(problem: &LllProblem<'_>, seed: u64, budget: u64) -> Result<LllReport, LllError> {
    let mut report = LllReport {
        host: problem.host(),
        k: problem.pattern.k(),
        n: problem.pattern.n(),
        m: problem.pattern.m(),
        max_degree: problem.pattern.max_degree(),
        seed,
        condition: problem.condition(),
        event_count: problem.event_count(),
        budget,
        success: false,
        resamples: 0,
        assignment: None,
        clean: None,
        last_event: None,
        histogram: EventHistogram::default(),
    };
    match moser_tardos(problem, seed, budget) {
        Ok(run) => {
            let verdict = crate::embedder::verify_clean(problem.pattern, &run.assignment, problem.mapping())
                .map_err(|e| LllError::Mismatch(e.to_string()))?;
            report.success = verdict.clean;
            report.clean = Some(verdict.clean);
            report.resamples = run.resamples;
            report.assignment = Some(run.assignment);
            report.histogram = run.histogram;
        }
        Err(LllError::BudgetExhausted { resamples, last, histogram }) => {
            report.resamples = resamples;
            report.last_event = Some(last);
            report.histogram = histogram;
        }
        Err(e) => return Err(e),
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::verify_clean;
    use crate::graphs::{generate, PatternSpec};

    fn smallest_outside(host: u32, k: usize) -> SetMapping {
        SetMapping::from_fn(host, k, k, 0, |e| (0..host).filter(|v| !e.contains(v)).take(k).collect()).unwrap()
    }

    #[test]
    fn host_size_formula() {
        let edge = Pattern::graph(2, &[(0, 1)]).unwrap();
        assert_eq!(required_host_size(&edge).unwrap(), 80);
        let hyper = Pattern::new(3, 6, vec![vec![0, 1, 2], vec![3, 4, 5], vec![0, 1, 3], vec![2, 4, 5]]).unwrap();
        assert_eq!(hyper.max_degree(), 2);
        assert_eq!(required_host_size(&hyper).unwrap(), 1080);
        let cubic = generate(&PatternSpec::Regular { n: 20, d: 3 }, 1).unwrap();
        assert_eq!(required_host_size(&cubic).unwrap(), 2400);
        let lonely = Pattern::graph(3, &[(0, 1)]).unwrap();
        assert!(matches!(required_host_size(&lonely), Err(LllError::Graph(GraphError::IsolatedVertex(2)))));
    }

    #[test]
    fn condition_arithmetic() {
        let edge = Pattern::graph(2, &[(0, 1)]).unwrap();
        let c = lll_condition(&edge, 80);
        assert_eq!((c.p, c.d), (0.025, 12));
        assert_eq!(c.value, std::f64::consts::E * 0.025 * 13.0);
        assert!((c.value - 0.883).abs() < 1e-3 && c.holds);
        let c = lll_condition(&edge, 30);
        assert!((c.value - 2.356).abs() < 1e-3 && !c.holds);
        let cubic = generate(&PatternSpec::Regular { n: 20, d: 3 }, 1).unwrap();
        let c = lll_condition(&cubic, 2400);
        assert_eq!(c.d, 360);
        assert!((c.value - std::f64::consts::E * 361.0 / 1200.0).abs() < 1e-12);
        assert!((c.value - 0.818).abs() < 1e-3 && c.holds);
    }

    #[test]
    fn violated_event_examples() {
        let edge = Pattern::graph(2, &[(0, 1)]).unwrap();
        let f = smallest_outside(8, 2);
        let problem = LllProblem::new(&edge, &f).unwrap();
        assert_eq!(find_violated_event(&[3, 3], &problem), Some(BadEvent::Collision { i: 0, j: 1 }));
        assert_eq!(find_violated_event(&[3, 4], &problem), None);

        let tri = Pattern::graph(3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        let f = SetMapping::from_fn(10, 2, 2, 0, |e| {
            if e == [1, 2] {
                vec![3, 9]
            } else {
                (0..10).rev().filter(|v| !e.contains(v)).take(2).collect()
            }
        })
        .unwrap();
        let problem = LllProblem::new(&tri, &f).unwrap();
        assert_eq!(find_violated_event(&[1, 2, 3], &problem), Some(BadEvent::Blocked { edge: 0, vertex: 2 }));
        assert_eq!(find_violated_event(&[1, 2, 4], &problem), None);
        assert_eq!(problem.event_count(), 3 + 3);
    }

    #[test]
    fn event_count_formula() {
        let cubic = generate(&PatternSpec::Regular { n: 20, d: 3 }, 2).unwrap();
        let problem = LllProblem::auto(&cubic, 0).unwrap();
        assert_eq!(problem.event_count(), 190 + 30 * 18);
        assert_eq!(problem.host(), 2400);
    }

    #[test]
    fn resampling_is_local() {
        let cubic = generate(&PatternSpec::Regular { n: 20, d: 3 }, 2).unwrap();
        let problem = LllProblem::with_host(&cubic, 60, 3).unwrap();
        let mut mt = MoserTardos::new(&problem, 5);
        for _ in 0..200 {
            let before = mt.assignment().to_vec();
            let Some(event) = mt.step() else { break };
            let vars = problem.event_variables(&event);
            for (v, (a, b)) in before.iter().zip(mt.assignment()).enumerate() {
                if !vars.contains(&v) {
                    assert_eq!(a, b, "variable {v} changed outside {event}");
                }
            }
        }
    }

    #[test]
    fn single_edge_terminates_cleanly() {
        let edge = Pattern::graph(2, &[(0, 1)]).unwrap();
        for seed in 0..50 {
            let problem = LllProblem::auto(&edge, seed).unwrap();
            let run = moser_tardos(&problem, seed, default_budget(&problem)).unwrap();
            assert_ne!(run.assignment[0], run.assignment[1]);
            assert_eq!(run.histogram.blocked, 0);
        }
    }

    #[test]
    fn budget_exhaustion_reports_last_event() {
        // On a 3-vertex host every triangle placement is blocked.
        let tri = Pattern::graph(3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        let f = smallest_outside(4, 2);
        let problem = LllProblem::new(&tri, &f).unwrap();
        match moser_tardos(&problem, 1, 50) {
            Err(LllError::BudgetExhausted { resamples, histogram, .. }) => {
                assert_eq!(resamples, 50);
                assert_eq!(histogram.collisions + histogram.blocked, 50);
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn outputs_are_clean_for_graphs_and_triples() {
        let hyper = generate(&PatternSpec::Hyper { k: 3, n: 7, m: 5 }, 4).unwrap();
        let cubic = generate(&PatternSpec::Regular { n: 10, d: 3 }, 4).unwrap();
        for p in [&hyper, &cubic] {
            for seed in 0..10 {
                let problem = LllProblem::auto(p, seed).unwrap();
                let report = lll_embed(&problem, seed, default_budget(&problem)).unwrap();
                assert!(report.success);
                let x = report.assignment.unwrap();
                assert!(verify_clean(p, &x, problem.mapping()).unwrap().clean);
                assert_eq!(find_violated_event(&x, &problem), None);
            }
        }
    }
}
