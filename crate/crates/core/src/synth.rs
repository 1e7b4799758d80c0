//! Seeded synthetic graphs, samples and corpora for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::graph::{DirectedGraph, UndirectedGraph};
use crate::ingest::EdgeRecord;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// G(n, p) on unordered pairs.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> UndirectedGraph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if r.random::<f64>() < p {
                edges.push((a as u32, b as u32));
            }
        }
    }
    UndirectedGraph::from_index_edges(n, &edges)
}

/// Directed graph with `m` uniformly drawn arcs; duplicates and loops are dropped.
pub fn gnm_directed(n: usize, m: usize, seed: u64) -> DirectedGraph {
    let mut r = rng(seed);
    let edges: Vec<(u32, u32)> = (0..m)
        .map(|_| (r.random_range(0..n as u32), r.random_range(0..n as u32)))
        .collect();
    DirectedGraph::from_index_edges(n, &edges)
}

/// Sampler over `0..w.len()` proportional to the weights.
struct Weighted {
    cumulative: Vec<f64>,
}

impl Weighted {
    fn new(w: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = w
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        Weighted { cumulative }
    }

    fn draw(&self, r: &mut impl Rng) -> u32 {
        let total = *self.cumulative.last().unwrap();
        let u = r.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1) as u32
    }
}

/// Chung-Lu style directed graph: `m` arcs whose endpoints are drawn in
/// proportion to `weights`, so expected degree tracks weight.
pub fn chung_lu(weights: &[f64], m: usize, seed: u64) -> DirectedGraph {
    let mut r = rng(seed);
    let s = Weighted::new(weights);
    let edges: Vec<(u32, u32)> = (0..m).map(|_| (s.draw(&mut r), s.draw(&mut r))).collect();
    DirectedGraph::from_index_edges(weights.len(), &edges)
}

/// Weights `(i + 1)^{-1/(gamma - 1)}`, giving a degree tail with exponent `gamma`.
pub fn power_law_weights(n: usize, gamma: f64) -> Vec<f64> {
    (0..n)
        .map(|i| ((i + 1) as f64).powf(-1.0 / (gamma - 1.0)))
        .collect()
}

/// Continuous power law on `[x_min, inf)` by inversion.
pub fn pareto(n: usize, gamma: f64, x_min: f64, r: &mut impl Rng) -> Vec<f64> {
    (0..n)
        .map(|_| x_min * (1.0 - r.random::<f64>()).powf(-1.0 / (gamma - 1.0)))
        .collect()
}

/// Integer power law on `[x_min, inf)`, rounding a continuous draw on
/// `[x_min - 1/2, inf)`; close to the zeta law for moderate `x_min`.
pub fn discrete_power_law(n: usize, gamma: f64, x_min: u64, r: &mut impl Rng) -> Vec<u64> {
    let lo = x_min as f64 - 0.5;
    (0..n)
        .map(|_| {
            let x = lo * (1.0 - r.random::<f64>()).powf(-1.0 / (gamma - 1.0)) + 0.5;
            (x.floor() as u64).max(x_min)
        })
        .collect()
}

pub fn lognormal(n: usize, mu: f64, sigma: f64, r: &mut impl Rng) -> Vec<f64> {
    let d = LogNormal::new(mu, sigma).expect("valid lognormal");
    (0..n).map(|_| d.sample(r)).collect()
}

/// A tweet corpus in TSV form plus follow edges.
#[derive(Debug, Clone)]
pub struct Corpus {
    /// `user_id \t text \t lang \t timestamp` lines.
    pub tweets: Vec<String>,
    pub edges: Vec<EdgeRecord>,
    pub users: usize,
}

impl Corpus {
    pub fn tweets_tsv(&self) -> String {
        let mut s = String::with_capacity(self.tweets.len() * 48);
        for t in &self.tweets {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn edges_csv(&self) -> String {
        let mut s = String::from("follower_id,followee_id\n");
        for e in &self.edges {
            s.push_str(&e.follower);
            s.push(',');
            s.push_str(&e.followee);
            s.push('\n');
        }
        s
    }
}

pub fn user_id(i: usize) -> String {
    format!("u{i:07}")
}

/// Corpus with heavy-tailed per-user activity. About 80% of tweets mention the
/// keyword and 90% are tagged `en`; the follow graph attaches preferentially
/// to active users, so higher thresholds keep denser cores.
pub fn corpus(
    users: usize,
    tweets: usize,
    follows_per_user: usize,
    keyword: &str,
    seed: u64,
) -> Corpus {
    let mut r = rng(seed);
    let propensity: Vec<f64> = pareto(users, 2.3, 1.0, &mut r);
    let pick = Weighted::new(&propensity);
    let other = ["storm", "weather", "coffee", "traffic", "news"];
    let mut lines = Vec::with_capacity(tweets);
    for t in 0..tweets {
        let u = pick.draw(&mut r) as usize;
        let text = if r.random::<f64>() < 0.8 {
            format!("hurricane {keyword} update {}", t % 97)
        } else {
            format!("{} report {}", other[t % other.len()], t % 89)
        };
        let lang = if r.random::<f64>() < 0.9 { "en" } else { "es" };
        lines.push(format!(
            "{}\t{}\t{}\t{}",
            user_id(u),
            text,
            lang,
            1_351_000_000 + t as i64
        ));
    }
    let m = users * follows_per_user;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let follower = r.random_range(0..users);
        let followee = pick.draw(&mut r) as usize;
        let followee = if r.random::<f64>() < 0.5 {
            followee
        } else {
            pick.draw(&mut r) as usize
        };
        edges.push(EdgeRecord {
            follower: user_id(follower),
            followee: user_id(followee),
        });
        // Active users also follow each other.
        if r.random::<f64>() < 0.3 {
            let a = pick.draw(&mut r) as usize;
            edges.push(EdgeRecord {
                follower: user_id(a),
                followee: user_id(followee),
            });
        }
    }
    Corpus {
        tweets: lines,
        edges,
        users,
    }
}
