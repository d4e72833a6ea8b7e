//! Avalanches in the independent hypergraph model.
//!
//! Vertices are `0..m`. Every declared edge of size `k` is an independent
//! uniform `k`-subset. Starting from one infected vertex, any vertex that is
//! the last uninfected vertex of some edge becomes infected.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::trial_seed;

/// Exceedances required at the largest fitted tail point.
pub const TAIL_MIN_EXCEEDANCES: usize = 30;

/// Vertex count and number of edges of each size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSpec {
    pub m: usize,
    pub counts: BTreeMap<usize, usize>,
}

impl DegreeSpec {
    pub fn new(m: usize, counts: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let spec = DegreeSpec { m, counts: counts.into_iter().filter(|&(_, s)| s > 0).collect() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("avalanche needs m >= 1".into()));
        }
        for &k in self.counts.keys() {
            if k < 2 || k > self.m {
                return Err(Error::Config(format!("edge size {k} outside [2, m = {}]", self.m)));
            }
        }
        Ok(())
    }

    pub fn s(&self, k: usize) -> usize {
        self.counts.get(&k).copied().unwrap_or(0)
    }

    pub fn edges(&self) -> usize {
        self.counts.values().sum()
    }

    /// `(1 - 2 s_2 / m)^{-1}`.
    pub fn predicted_mean_d(&self) -> f64 {
        1.0 / (1.0 - 2.0 * self.s(2) as f64 / self.m as f64)
    }

    /// Require `2 s_2 <= (1 - eps1) m`.
    pub fn check_subcritical(&self, eps1: f64) -> Result<()> {
        let lhs = 2.0 * self.s(2) as f64;
        let rhs = (1.0 - eps1) * self.m as f64;
        if lhs > rhs {
            return Err(Error::Config(format!(
                "not subcritical: 2 s_2 = {lhs} exceeds (1 - eps1) m = {rhs} (eps1 = {eps1}); \
                 reduce s_2 below {}",
                (rhs / 2.0).floor()
            )));
        }
        Ok(())
    }
}

/// Edges in declaration order (ascending size) with vertex incidences.
#[derive(Debug, Clone, Default)]
pub struct Hypergraph {
    m: usize,
    edge_start: Vec<u32>,
    edge_verts: Vec<u32>,
    inc_start: Vec<u32>,
    inc_edges: Vec<u32>,
}

impl Hypergraph {
    pub fn from_edges(m: usize, edges: &[Vec<u32>]) -> Result<Self> {
        let mut h = Hypergraph { m, ..Default::default() };
        h.edge_start.push(0);
        for e in edges {
            let mut sorted = e.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != e.len() || sorted.last().is_some_and(|&v| v as usize >= m) {
                return Err(Error::Input(format!("edge {e:?} is not a set of vertices below {m}")));
            }
            h.edge_verts.extend_from_slice(e);
            h.edge_start.push(h.edge_verts.len() as u32);
        }
        h.build_incidence();
        Ok(h)
    }

    /// Resample in place, reusing the buffers.
    pub fn sample_into<R: Rng>(&mut self, spec: &DegreeSpec, rng: &mut R) {
        self.m = spec.m;
        self.edge_start.clear();
        self.edge_verts.clear();
        self.edge_start.push(0);
        for (&k, &s) in &spec.counts {
            for _ in 0..s {
                let base = self.edge_verts.len();
                for j in (spec.m - k)..spec.m {
                    let t = rng.random_range(0..=j) as u32;
                    let v = if self.edge_verts[base..].contains(&t) { j as u32 } else { t };
                    self.edge_verts.push(v);
                }
                self.edge_start.push(self.edge_verts.len() as u32);
            }
        }
        self.build_incidence();
    }

    fn build_incidence(&mut self) {
        self.inc_start.clear();
        self.inc_start.resize(self.m + 1, 0);
        for &v in &self.edge_verts {
            self.inc_start[v as usize + 1] += 1;
        }
        for i in 0..self.m {
            self.inc_start[i + 1] += self.inc_start[i];
        }
        self.inc_edges.clear();
        self.inc_edges.resize(self.edge_verts.len(), 0);
        let mut fill: Vec<u32> = self.inc_start[..self.m].to_vec();
        for e in 0..self.edge_count() {
            for i in self.edge_start[e] as usize..self.edge_start[e + 1] as usize {
                let v = self.edge_verts[i] as usize;
                self.inc_edges[fill[v] as usize] = e as u32;
                fill[v] += 1;
            }
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn edge_count(&self) -> usize {
        self.edge_start.len().saturating_sub(1)
    }

    pub fn edge(&self, e: usize) -> &[u32] {
        &self.edge_verts[self.edge_start[e] as usize..self.edge_start[e + 1] as usize]
    }

    pub fn incident(&self, v: usize) -> &[u32] {
        &self.inc_edges[self.inc_start[v] as usize..self.inc_start[v + 1] as usize]
    }

    pub fn total_size(&self) -> usize {
        self.edge_verts.len()
    }
}

/// Sample a fresh hypergraph from a seed.
pub fn sample_independent(spec: &DegreeSpec, seed: u64) -> Result<Hypergraph> {
    spec.validate()?;
    let mut h = Hypergraph::default();
    h.sample_into(spec, &mut ChaCha8Rng::seed_from_u64(seed));
    Ok(h)
}

/// Statistics of one avalanche.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExplorationResult {
    pub d: usize,
    pub r1: usize,
    /// `delta_k[k]` = number of `k`-edges meeting the infected set.
    pub delta_k: Vec<usize>,
    pub delta_prime: usize,
    /// 2-edges inside the infected set and meeting it in one vertex.
    pub two_inside: usize,
    pub two_once: usize,
    /// Whether `d` reached `ceil(sqrt(m))`.
    pub exceeds_cap: bool,
}

/// Reusable scratch space for explorations.
#[derive(Debug, Clone, Default)]
pub struct Explorer {
    generation: u32,
    infected: Vec<u32>,
    edge_gen: Vec<u32>,
    edge_unc: Vec<u32>,
    pending: Vec<u32>,
    members: Vec<u32>,
    touched: Vec<u32>,
}

impl Explorer {
    pub fn new() -> Self {
        Explorer::default()
    }

    fn reset(&mut self, h: &Hypergraph) {
        if self.infected.len() < h.m() {
            self.infected.resize(h.m(), 0);
        }
        if self.edge_gen.len() < h.edge_count() {
            self.edge_gen.resize(h.edge_count(), 0);
            self.edge_unc.resize(h.edge_count(), 0);
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.infected.fill(0);
            self.edge_gen.fill(0);
            self.generation = 1;
        }
        self.pending.clear();
        self.members.clear();
        self.touched.clear();
    }

    /// Infected vertices of the last closure, in processing order.
    pub fn members(&self) -> &[u32] {
        &self.members
    }

    /// Infection closure from `v`. With `rng`, pending vertices are processed in random order.
    pub fn closure<R: Rng>(&mut self, h: &Hypergraph, v: usize, mut rng: Option<&mut R>) -> ExplorationResult {
        assert!(v < h.m(), "seed vertex out of range");
        self.reset(h);
        let g = self.generation;
        self.infected[v] = g;
        self.pending.push(v as u32);
        while !self.pending.is_empty() {
            let idx = match rng.as_deref_mut() {
                Some(r) => r.random_range(0..self.pending.len()),
                None => self.pending.len() - 1,
            };
            let w = self.pending.swap_remove(idx) as usize;
            self.members.push(w as u32);
            for &e in h.incident(w) {
                let e = e as usize;
                if self.edge_gen[e] != g {
                    self.edge_gen[e] = g;
                    self.edge_unc[e] = h.edge(e).len() as u32;
                    self.touched.push(e as u32);
                }
                self.edge_unc[e] -= 1;
                if self.edge_unc[e] == 1 {
                    if let Some(&u) = h.edge(e).iter().find(|&&u| self.infected[u as usize] != g) {
                        self.infected[u as usize] = g;
                        self.pending.push(u);
                    }
                }
            }
        }
        self.summarize(h)
    }

    fn summarize(&self, h: &Hypergraph) -> ExplorationResult {
        let d = self.members.len();
        let mut r1 = 1;
        let mut delta_k = Vec::new();
        let mut delta_prime = 0;
        let mut two_inside = 0;
        let mut two_once = 0;
        for &e in &self.touched {
            let e = e as usize;
            let k = h.edge(e).len();
            let hits = k - self.edge_unc[e] as usize;
            r1 += hits;
            if delta_k.len() <= k {
                delta_k.resize(k + 1, 0);
            }
            delta_k[k] += 1;
            if k >= 3 && hits >= 2 {
                delta_prime += 1;
            }
            if k == 2 {
                if hits == 2 {
                    two_inside += 1;
                } else {
                    two_once += 1;
                }
            }
        }
        let cap = (h.m() as f64).sqrt().ceil() as usize;
        ExplorationResult { d, r1, delta_k, delta_prime, two_inside, two_once, exceeds_cap: d >= cap }
    }

    /// Round-by-round exploration: each round processes the active vertex with the
    /// smallest discovering edge and visits every vertex that is the only unvisited
    /// vertex of an edge through it. Returns the visited count per round `|V_t|`,
    /// stopping once `cap` vertices are visited if a cap is given.
    pub fn rounds(&mut self, h: &Hypergraph, v: usize, cap: Option<usize>) -> Result<(Vec<usize>, Vec<usize>)> {
        assert!(v < h.m(), "seed vertex out of range");
        self.reset(h);
        let g = self.generation;
        self.infected[v] = g;
        let mut visited = 1usize;
        // active vertices keyed by discovering edge; the seed edge sorts first
        let mut active: BinaryHeap<Reverse<(u64, u32)>> = BinaryHeap::new();
        active.push(Reverse((0, v as u32)));
        let mut v_trace = vec![1usize];
        let mut order = vec![v];
        let mut found: Vec<(u32, u32)> = Vec::new();
        let mut t = 0usize;
        while let Some(Reverse((_, u))) = active.pop() {
            t += 1;
            found.clear();
            for &e in h.incident(u as usize) {
                let mut outside = h.edge(e as usize).iter().filter(|&&w| self.infected[w as usize] != g);
                if let (Some(&w), None) = (outside.next(), outside.next()) {
                    found.push((w, e));
                }
            }
            found.sort_unstable();
            found.dedup_by_key(|p| p.0);
            for &(w, e) in &found {
                if cap.is_some_and(|c| visited >= c) {
                    break;
                }
                self.infected[w as usize] = g;
                visited += 1;
                order.push(w as usize);
                active.push(Reverse((e as u64 + 1, w)));
            }
            v_trace.push(visited);
            if active.len() != visited - t {
                return Err(Error::Input(format!(
                    "active/visited bookkeeping broken at round {t}: |A| = {}, |V| - t = {}",
                    active.len(),
                    visited - t
                )));
            }
        }
        Ok((v_trace, order))
    }
}

/// Closure from `v` with a fresh explorer.
pub fn run_exploration(h: &Hypergraph, v: usize) -> ExplorationResult {
    Explorer::new().closure::<ChaCha8Rng>(h, v, None)
}

/// One trial: sample the hypergraph and a uniform seed vertex.
pub fn run_trial(
    spec: &DegreeSpec,
    master_seed: u64,
    trial: u64,
    graph: &mut Hypergraph,
    explorer: &mut Explorer,
) -> ExplorationResult {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(master_seed, trial));
    graph.sample_into(spec, &mut rng);
    let v = rng.random_range(0..spec.m);
    explorer.closure::<ChaCha8Rng>(graph, v, None)
}

/// Least-squares line `y = a + b t` with coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn fit_line(pts: &[(f64, f64)]) -> Option<LineFit> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit { intercept: my - slope * mx, slope, r2, points: pts.len() })
}

/// Observed versus predicted mean of `delta_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaLine {
    pub k: usize,
    pub mean: f64,
    pub se: f64,
    pub predicted: f64,
}

/// Summary over many trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvalancheReport {
    pub trials: usize,
    pub m: usize,
    pub predicted_mean_d: f64,
    pub mean_d: f64,
    pub var_d: f64,
    pub se_d: f64,
    pub mean_d2: f64,
    pub mean_r1: f64,
    /// `(mean_d - predicted) / se_d`.
    pub z_score: f64,
    /// `(t, P(R1 >= t))` for `2 <= t <= t_max`.
    pub tail: Vec<(usize, f64)>,
    pub t_max: usize,
    pub tail_fit: Option<LineFit>,
    pub delta: Vec<DeltaLine>,
    pub mean_delta_prime: f64,
    pub exceeded_cap: usize,
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64, f64) {
    let nf = n as f64;
    let mean = xs.clone().sum::<f64>() / nf;
    let var = if n > 1 { xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0) } else { 0.0 };
    (mean, var, (var / nf).sqrt())
}

/// Summarize trial results in order.
pub fn summarize(spec: &DegreeSpec, results: &[ExplorationResult]) -> AvalancheReport {
    let n = results.len();
    let (mean_d, var_d, se_d) = mean_se(results.iter().map(|r| r.d as f64), n);
    let mean_d2 = results.iter().map(|r| (r.d * r.d) as f64).sum::<f64>() / n as f64;
    let mean_r1 = results.iter().map(|r| r.r1 as f64).sum::<f64>() / n as f64;
    let predicted = spec.predicted_mean_d();
    let max_r1 = results.iter().map(|r| r.r1).max().unwrap_or(0);
    let mut exceed = vec![0usize; max_r1 + 2];
    for r in results {
        exceed[r.r1] += 1;
    }
    for t in (0..=max_r1).rev() {
        exceed[t] += exceed[t + 1];
    }
    let t_max = (2..=max_r1).rev().find(|&t| exceed[t] >= TAIL_MIN_EXCEEDANCES).unwrap_or(0);
    let tail: Vec<(usize, f64)> = (2..=t_max).map(|t| (t, exceed[t] as f64 / n as f64)).collect();
    let pts: Vec<(f64, f64)> = tail.iter().map(|&(t, p)| (t as f64, p.ln())).collect();
    let delta = spec
        .counts
        .iter()
        .map(|(&k, &s)| {
            let (mean, _, se) = mean_se(results.iter().map(|r| r.delta_k.get(k).copied().unwrap_or(0) as f64), n);
            DeltaLine { k, mean, se, predicted: predicted * (k * s) as f64 / spec.m as f64 }
        })
        .collect();
    AvalancheReport {
        trials: n,
        m: spec.m,
        predicted_mean_d: predicted,
        mean_d,
        var_d,
        se_d,
        mean_d2,
        mean_r1,
        z_score: if se_d > 0.0 {
            (mean_d - predicted) / se_d
        } else if mean_d == predicted {
            0.0
        } else {
            f64::INFINITY
        },
        tail,
        t_max,
        tail_fit: fit_line(&pts),
        delta,
        mean_delta_prime: results.iter().map(|r| r.delta_prime as f64).sum::<f64>() / n as f64,
        exceeded_cap: results.iter().filter(|r| r.exceeds_cap).count(),
    }
}

/// Run `trials` avalanches sequentially and summarize them.
pub fn avalanche_stats(spec: &DegreeSpec, trials: usize, seed: u64, eps1: f64) -> Result<(AvalancheReport, Vec<ExplorationResult>)> {
    spec.validate()?;
    spec.check_subcritical(eps1)?;
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let mut graph = Hypergraph::default();
    let mut explorer = Explorer::new();
    let results: Vec<ExplorationResult> =
        (0..trials as u64).map(|t| run_trial(spec, seed, t, &mut graph, &mut explorer)).collect();
    Ok((summarize(spec, &results), results))
}
