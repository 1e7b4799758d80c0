//! Brute-force reference implementations shared by the integration tests.
//! They work on dense adjacency matrices and share no code with the library.

#![allow(dead_code)]

use activenet::graph::{GraphView, UndirectedGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INF: usize = usize::MAX / 4;

pub struct Dense {
    pub n: usize,
    pub adj: Vec<Vec<bool>>,
}

impl Dense {
    pub fn from_graph(g: &UndirectedGraph) -> Self {
        let n = g.node_count();
        let mut adj = vec![vec![false; n]; n];
        for v in 0..n {
            for &w in g.neighbors(v) {
                adj[v][w as usize] = true;
            }
        }
        Dense { n, adj }
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].iter().filter(|&&b| b).count()
    }

    /// Floyd-Warshall hop distances.
    pub fn distances(&self) -> Vec<Vec<usize>> {
        let n = self.n;
        let mut d = vec![vec![INF; n]; n];
        for i in 0..n {
            d[i][i] = 0;
            for j in 0..n {
                if self.adj[i][j] {
                    d[i][j] = 1;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    /// Number of shortest paths between every pair, counted layer by layer
    /// from the distance matrix.
    pub fn path_counts(&self, d: &[Vec<usize>]) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut sigma = vec![vec![0.0; n]; n];
        for s in 0..n {
            let mut order: Vec<usize> = (0..n).filter(|&t| d[s][t] < INF).collect();
            order.sort_by_key(|&t| d[s][t]);
            for &t in &order {
                sigma[s][t] = if t == s {
                    1.0
                } else {
                    (0..n)
                        .filter(|&u| self.adj[u][t] && d[s][u] + 1 == d[s][t])
                        .map(|u| sigma[s][u])
                        .sum()
                };
            }
        }
        sigma
    }

    /// Betweenness over unordered pairs, endpoints excluded.
    pub fn betweenness(&self) -> Vec<f64> {
        let n = self.n;
        let d = self.distances();
        let sigma = self.path_counts(&d);
        let mut bc = vec![0.0; n];
        for v in 0..n {
            for s in 0..n {
                for t in s + 1..n {
                    if s == v || t == v || d[s][t] >= INF {
                        continue;
                    }
                    if d[s][v] + d[v][t] == d[s][t] {
                        bc[v] += sigma[s][v] * sigma[v][t] / sigma[s][t];
                    }
                }
            }
        }
        bc
    }

    pub fn eccentricity(&self) -> Vec<usize> {
        self.distances()
            .iter()
            .map(|row| *row.iter().max().unwrap())
            .collect()
    }

    pub fn closeness(&self) -> Vec<f64> {
        let d = self.distances();
        (0..self.n)
            .map(|v| {
                let s: usize = d[v].iter().sum();
                if s == 0 {
                    0.0
                } else {
                    (self.n - 1) as f64 / s as f64
                }
            })
            .collect()
    }

    pub fn triangles(&self) -> Vec<usize> {
        let n = self.n;
        let mut t = vec![0; n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if a < b && b < c && self.adj[a][b] && self.adj[b][c] && self.adj[a][c] {
                        t[a] += 1;
                        t[b] += 1;
                        t[c] += 1;
                    }
                }
            }
        }
        t
    }

    pub fn clustering(&self) -> Vec<f64> {
        let t = self.triangles();
        (0..self.n)
            .map(|v| {
                let k = self.degree(v);
                if k < 2 {
                    0.0
                } else {
                    2.0 * t[v] as f64 / (k * (k - 1)) as f64
                }
            })
            .collect()
    }

    pub fn transitivity(&self) -> f64 {
        let closed: usize = self.triangles().iter().sum();
        let triples: usize = (0..self.n)
            .map(|v| self.degree(v) * self.degree(v).saturating_sub(1) / 2)
            .sum();
        if triples == 0 {
            0.0
        } else {
            closed as f64 / triples as f64
        }
    }

    /// Pearson correlation of the degrees at the two ends of each edge,
    /// both orientations, by the two-pass textbook formula.
    pub fn assortativity(&self) -> Option<f64> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for a in 0..self.n {
            for b in 0..self.n {
                if self.adj[a][b] {
                    xs.push(self.degree(a) as f64);
                    ys.push(self.degree(b) as f64);
                }
            }
        }
        if xs.len() < 4 {
            return None;
        }
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        if vx == 0.0 || vy == 0.0 {
            return None;
        }
        Some(cov / (vx * vy).sqrt())
    }

    pub fn neighbor_degree(&self) -> Vec<f64> {
        (0..self.n)
            .map(|v| {
                let k = self.degree(v);
                if k == 0 {
                    0.0
                } else {
                    (0..self.n)
                        .filter(|&w| self.adj[v][w])
                        .map(|w| self.degree(w) as f64)
                        .sum::<f64>()
                        / k as f64
                }
            })
            .collect()
    }
}

/// Connected random graph: a random spanning tree plus G(n, p) edges.
pub fn connected_random_graph(n: usize, p: f64, seed: u64) -> UndirectedGraph {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((r.random_range(0..v) as u32, v as u32));
    }
    for a in 0..n {
        for b in a + 1..n {
            if r.random::<f64>() < p {
                edges.push((a as u32, b as u32));
            }
        }
    }
    UndirectedGraph::from_index_edges(n, &edges)
}

pub fn random_graph(n: usize, p: f64, seed: u64) -> UndirectedGraph {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
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

pub fn complete_graph(n: usize) -> UndirectedGraph {
    let edges: Vec<(u32, u32)> = (0..n as u32)
        .flat_map(|a| (a + 1..n as u32).map(move |b| (a, b)))
        .collect();
    UndirectedGraph::from_index_edges(n, &edges)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// OLS with intercept by normal equations, returning `(beta, sqrt(RSS / n))`,
/// for comparison against the tobit reduction.
pub fn ols(y: &[f64], cols: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let n = y.len();
    let k = cols.len() + 1;
    let x = |i: usize, j: usize| if j == 0 { 1.0 } else { cols[j - 1][i] };
    let xtx = nalgebra::DMatrix::from_fn(k, k, |a, b| (0..n).map(|i| x(i, a) * x(i, b)).sum());
    let xty = nalgebra::DVector::from_fn(k, |a, _| (0..n).map(|i| x(i, a) * y[i]).sum());
    let beta = xtx.lu().solve(&xty).expect("full rank");
    let rss: f64 = (0..n)
        .map(|i| (y[i] - (0..k).map(|j| x(i, j) * beta[j]).sum::<f64>()).powi(2))
        .sum();
    (beta.iter().copied().collect(), (rss / n as f64).sqrt())
}
