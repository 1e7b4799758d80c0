//! Shortest-path metrics: eccentricity, closeness and betweenness.
//!
//! Eccentricity and closeness come from one multi-source BFS sweep that
//! advances 256 sources at once as bit lanes. Because hop distance is
//! symmetric on an undirected graph, each node accumulates the distances at
//! which it is reached instead of each source keeping its own totals.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{GraphView, UndirectedGraph};
use crate::par;

use super::MetricError;

const WORDS: usize = 4;
const LANES: usize = WORDS * 64;
type Lanes = [u64; WORDS];

#[inline]
fn is_zero(x: &Lanes) -> bool {
    x.iter().all(|&w| w == 0)
}

#[inline]
fn popcount(x: &Lanes) -> u64 {
    x.iter().map(|w| w.count_ones() as u64).sum()
}

/// Per-node eccentricity and total hop distance to every other node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceProfile {
    pub eccentricity: Vec<u32>,
    pub distance_sum: Vec<u64>,
}

impl DistanceProfile {
    pub fn radius(&self) -> Option<u32> {
        self.eccentricity.iter().copied().min()
    }

    pub fn diameter(&self) -> Option<u32> {
        self.eccentricity.iter().copied().max()
    }
}

struct Scratch {
    seen: Vec<Lanes>,
    frontier: Vec<Lanes>,
    next: Vec<Lanes>,
    active: Vec<u32>,
    touched: Vec<u32>,
    ecc: Vec<u32>,
    sum: Vec<u64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            seen: vec![[0; WORDS]; n],
            frontier: vec![[0; WORDS]; n],
            next: vec![[0; WORDS]; n],
            active: Vec::new(),
            touched: Vec::new(),
            ecc: vec![0; n],
            sum: vec![0; n],
        }
    }

    /// BFS from sources `first .. first + LANES` (clipped to `n`).
    fn sweep(&mut self, g: &UndirectedGraph, first: usize) {
        let n = g.node_count();
        let last = (first + LANES).min(n);
        self.active.clear();
        for s in first..last {
            let lane = s - first;
            let bit = 1u64 << (lane % 64);
            self.seen[s][lane / 64] |= bit;
            self.frontier[s][lane / 64] |= bit;
            self.active.push(s as u32);
        }
        let mut level = 0u32;
        while !self.active.is_empty() {
            level += 1;
            self.touched.clear();
            for &v in &self.active {
                let f = self.frontier[v as usize];
                for &w in g.neighbors(v as usize) {
                    let nx = &mut self.next[w as usize];
                    if is_zero(nx) {
                        self.touched.push(w);
                    }
                    for k in 0..WORDS {
                        nx[k] |= f[k];
                    }
                }
            }
            for &v in &self.active {
                self.frontier[v as usize] = [0; WORDS];
            }
            self.active.clear();
            for &w in &self.touched {
                let w = w as usize;
                let mut fresh = [0u64; WORDS];
                for k in 0..WORDS {
                    fresh[k] = self.next[w][k] & !self.seen[w][k];
                    self.seen[w][k] |= fresh[k];
                }
                self.next[w] = [0; WORDS];
                if !is_zero(&fresh) {
                    self.frontier[w] = fresh;
                    self.active.push(w as u32);
                    self.ecc[w] = self.ecc[w].max(level);
                    self.sum[w] += level as u64 * popcount(&fresh);
                }
            }
        }
        // Only `seen` carries state between sweeps.
        for s in self.seen.iter_mut() {
            *s = [0; WORDS];
        }
    }
}

fn require_connected(g: &UndirectedGraph) -> Result<(), MetricError> {
    if g.node_count() == 0 {
        return Err(MetricError::TooFewNodes { needed: 1, got: 0 });
    }
    if !g.is_connected() {
        return Err(MetricError::Disconnected);
    }
    Ok(())
}

/// All-pairs hop distances summarised per node. Requires a connected graph.
pub fn distance_profile(g: &UndirectedGraph) -> Result<DistanceProfile, MetricError> {
    require_connected(g)?;
    let n = g.node_count();
    let sweeps = n.div_ceil(LANES);
    let acc = par::fold_reduce(
        sweeps,
        || None::<Box<Scratch>>,
        |slot, i| {
            let scratch = slot.get_or_insert_with(|| Box::new(Scratch::new(n)));
            scratch.sweep(g, i * LANES);
        },
        |a, b| match (a, b) {
            (Some(mut a), Some(b)) => {
                for v in 0..n {
                    a.ecc[v] = a.ecc[v].max(b.ecc[v]);
                    a.sum[v] += b.sum[v];
                }
                Some(a)
            }
            (a, None) => a,
            (None, b) => b,
        },
    );
    let (eccentricity, distance_sum) = match acc {
        Some(s) => (s.ecc, s.sum),
        None => (vec![0; n], vec![0; n]),
    };
    Ok(DistanceProfile {
        eccentricity,
        distance_sum,
    })
}

/// Maximum hop distance from each node. Requires a connected graph.
pub fn eccentricity_all(g: &UndirectedGraph) -> Result<Vec<u32>, MetricError> {
    Ok(distance_profile(g)?.eccentricity)
}

/// `CC_i = (n - 1) / sum_j dist(j, i)`. Requires a connected graph; a single
/// node gets 0.
pub fn closeness(g: &UndirectedGraph) -> Result<Vec<f64>, MetricError> {
    let profile = distance_profile(g)?;
    Ok(closeness_from_profile(&profile))
}

pub fn closeness_from_profile(profile: &DistanceProfile) -> Vec<f64> {
    let n = profile.distance_sum.len();
    profile
        .distance_sum
        .iter()
        .map(|&s| {
            if s == 0 {
                0.0
            } else {
                (n - 1) as f64 / s as f64
            }
        })
        .collect()
}

/// Which sources feed the Brandes accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetweennessMode {
    Exact,
    /// `pivots` sources drawn uniformly without replacement, rescaled by `n / pivots`.
    Sampled {
        pivots: usize,
        seed: u64,
    },
}

const BC_BLOCK: usize = 32;

struct Brandes {
    dist: Vec<u32>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
    order: Vec<u32>,
    acc: Vec<f64>,
}

impl Brandes {
    fn new(n: usize) -> Self {
        Brandes {
            dist: vec![u32::MAX; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            order: Vec::with_capacity(n),
            acc: vec![0.0; n],
        }
    }

    fn source(&mut self, g: &UndirectedGraph, s: usize) {
        self.order.clear();
        self.dist[s] = 0;
        self.sigma[s] = 1.0;
        self.order.push(s as u32);
        let mut head = 0;
        while head < self.order.len() {
            let v = self.order[head] as usize;
            head += 1;
            let dv = self.dist[v];
            for &w in g.neighbors(v) {
                let w = w as usize;
                if self.dist[w] == u32::MAX {
                    self.dist[w] = dv + 1;
                    self.order.push(w as u32);
                }
                if self.dist[w] == dv + 1 {
                    self.sigma[w] += self.sigma[v];
                }
            }
        }
        for &w in self.order.iter().rev() {
            let w = w as usize;
            let dw = self.dist[w];
            let coeff = (1.0 + self.delta[w]) / self.sigma[w];
            for &v in g.neighbors(w) {
                let v = v as usize;
                if self.dist[v] != u32::MAX && self.dist[v] + 1 == dw {
                    self.delta[v] += self.sigma[v] * coeff;
                }
            }
            if w != s {
                self.acc[w] += self.delta[w];
            }
        }
        for &w in &self.order {
            let w = w as usize;
            self.dist[w] = u32::MAX;
            self.sigma[w] = 0.0;
            self.delta[w] = 0.0;
        }
    }
}

/// Shortest-path betweenness with endpoints excluded, over unordered pairs.
///
/// Normalised values divide by `(n - 1)(n - 2) / 2`; graphs with fewer than
/// three nodes get all zeros. Sources are processed in fixed blocks whose
/// partial sums are merged in block order, so the output does not depend on
/// the thread count.
pub fn betweenness(g: &UndirectedGraph, mode: BetweennessMode, normalized: bool) -> Vec<f64> {
    let n = g.node_count();
    if n < 3 {
        return vec![0.0; n];
    }
    let (sources, scale): (Vec<usize>, f64) = match mode {
        BetweennessMode::Exact => ((0..n).collect(), 1.0),
        BetweennessMode::Sampled { pivots, seed } if pivots < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = sample(&mut rng, n, pivots.max(1)).into_vec();
            picked.sort_unstable();
            let k = picked.len();
            (picked, n as f64 / k as f64)
        }
        BetweennessMode::Sampled { .. } => ((0..n).collect(), 1.0),
    };
    let mut total = vec![0.0f64; n];
    par::fold_blocks_ordered(
        sources.len().div_ceil(BC_BLOCK),
        || None::<Box<Brandes>>,
        |slot, b| {
            let st = slot.get_or_insert_with(|| Box::new(Brandes::new(n)));
            let lo = b * BC_BLOCK;
            for &s in &sources[lo..(lo + BC_BLOCK).min(sources.len())] {
                st.source(g, s);
            }
        },
        &mut total,
        |total, p| {
            if let Some(p) = p {
                for (t, x) in total.iter_mut().zip(&p.acc) {
                    *t += *x;
                }
            }
        },
    );
    // Every unordered pair is seen from both of its endpoints.
    let divisor = if normalized {
        ((n - 1) * (n - 2)) as f64
    } else {
        2.0
    };
    total.iter().map(|&x| x * scale / divisor).collect()
}
