//! Eigenvector centrality by damped power iteration.

use crate::graph::{GraphView, UndirectedGraph};
use crate::par;

use super::MetricError;

pub const EIGEN_TOLERANCE: f64 = 1e-10;
pub const EIGEN_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenvector {
    /// L2-normalised, non-negative.
    pub values: Vec<f64>,
    /// Rayleigh quotient of the final iterate.
    pub eigenvalue: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; `values` then holds the last iterate.
    pub converged: bool,
}

fn multiply(g: &UndirectedGraph, x: &[f64], out: &mut [f64]) {
    par::fill_indexed(out, |v| g.neighbors(v).iter().map(|&w| x[w as usize]).sum());
}

fn norm(x: &[f64]) -> f64 {
    par::sum_by(x.len(), |i| x[i] * x[i]).sqrt()
}

/// Principal eigenvector of the adjacency matrix.
///
/// Each step blends the current iterate with the normalised product,
/// `x <- (x + Ax / |Ax|) / |.|`, which is power iteration on `I + A / lambda`
/// and therefore converges on bipartite graphs too. Stops when successive
/// iterates differ by less than [`EIGEN_TOLERANCE`] in max-norm.
pub fn eigenvector_centrality(g: &UndirectedGraph) -> Result<Eigenvector, MetricError> {
    let n = g.node_count();
    if n < 2 {
        return Err(MetricError::TooFewNodes { needed: 2, got: n });
    }
    if !g.is_connected() {
        return Err(MetricError::Disconnected);
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut ax = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < EIGEN_MAX_ITER {
        iterations += 1;
        multiply(g, &x, &mut ax);
        let scale = norm(&ax);
        par::fill_indexed(&mut next, |i| x[i] + ax[i] / scale);
        let blend = norm(&next);
        let mut diff = 0.0f64;
        for (xi, ni) in x.iter_mut().zip(next.iter()) {
            let v = ni / blend;
            diff = diff.max((v - *xi).abs());
            *xi = v;
        }
        if diff < EIGEN_TOLERANCE {
            converged = true;
            break;
        }
    }
    multiply(g, &x, &mut ax);
    let eigenvalue = par::sum_by(n, |i| x[i] * ax[i]) / par::sum_by(n, |i| x[i] * x[i]);
    Ok(Eigenvector {
        values: x,
        eigenvalue,
        iterations,
        converged,
    })
}

/// `max_i |(Ax)_i - lambda x_i|`.
pub fn residual(g: &UndirectedGraph, ev: &Eigenvector) -> f64 {
    let mut ax = vec![0.0; g.node_count()];
    multiply(g, &ev.values, &mut ax);
    ax.iter()
        .zip(&ev.values)
        .map(|(a, x)| (a - ev.eigenvalue * x).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_graph_is_uniform() {
        for n in [2u32, 3, 7, 20] {
            let mut e = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    e.push((a, b));
                }
            }
            let g = UndirectedGraph::from_index_edges(n as usize, &e);
            let ev = eigenvector_centrality(&g).unwrap();
            assert!(ev.converged);
            let u = 1.0 / (n as f64).sqrt();
            assert!(ev.values.iter().all(|&x| (x - u).abs() < 1e-12));
            assert!((ev.eigenvalue - (n - 1) as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn star_converges_despite_bipartiteness() {
        let g = UndirectedGraph::from_index_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let ev = eigenvector_centrality(&g).unwrap();
        assert!(ev.converged);
        assert!((ev.values[0] - 1.0 / 2f64.sqrt()).abs() < 1e-9);
        for &leaf in &ev.values[1..] {
            assert!((leaf - 1.0 / (2.0 * 2f64.sqrt())).abs() < 1e-9);
        }
        assert!((ev.eigenvalue - 2.0).abs() < 1e-9);
        assert!(residual(&g, &ev) < 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(eigenvector_centrality(&UndirectedGraph::from_index_edges(1, &[])).is_err());
        let g = UndirectedGraph::from_index_edges(4, &[(0, 1), (2, 3)]);
        assert!(matches!(
            eigenvector_centrality(&g),
            Err(MetricError::Disconnected)
        ));
    }
}
