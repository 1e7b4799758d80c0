//! Degree-based and triangle-based statistics of an undirected graph.

use crate::graph::{DirectedGraph, GraphView, UndirectedGraph};
use crate::par;

use super::MetricError;

/// `m / (n (n - 1))`.
pub fn density_directed(g: &DirectedGraph) -> Result<f64, MetricError> {
    let n = g.node_count();
    if n < 2 {
        return Err(MetricError::TooFewNodes { needed: 2, got: n });
    }
    Ok(g.edge_count() as f64 / (n as f64 * (n - 1) as f64))
}

/// `2m / (n (n - 1))`.
pub fn density_undirected(g: &UndirectedGraph) -> Result<f64, MetricError> {
    let n = g.node_count();
    if n < 2 {
        return Err(MetricError::TooFewNodes { needed: 2, got: n });
    }
    Ok(2.0 * g.edge_count() as f64 / (n as f64 * (n - 1) as f64))
}

/// Mean degree of each node's neighbours; 0 for isolates.
pub fn avg_neighbor_degree(g: &UndirectedGraph) -> Vec<f64> {
    par::map_range(g.node_count(), |v| {
        let nbrs = g.neighbors(v);
        if nbrs.is_empty() {
            return 0.0;
        }
        let total: u64 = nbrs.iter().map(|&w| g.degree(w as usize) as u64).sum();
        total as f64 / nbrs.len() as f64
    })
}

/// Triangles through each node.
///
/// Edges are oriented from lower to higher `(degree, index)` rank so each
/// triangle is found exactly once from its lowest-ranked corner.
pub fn triangles(g: &UndirectedGraph) -> Vec<u64> {
    let n = g.node_count();
    let rank_lt = |a: usize, b: usize| (g.degree(a), a) < (g.degree(b), b);
    let forward: Vec<Vec<u32>> = par::map_range(n, |v| {
        g.neighbors(v)
            .iter()
            .copied()
            .filter(|&w| rank_lt(v, w as usize))
            .collect()
    });
    struct Acc {
        counts: Vec<u64>,
        mark: Vec<bool>,
    }
    let acc = par::fold_reduce(
        n,
        || Acc {
            counts: vec![0; n],
            mark: vec![false; n],
        },
        |acc, u| {
            let fu = &forward[u];
            if fu.len() < 2 {
                return;
            }
            for &v in fu {
                acc.mark[v as usize] = true;
            }
            for &v in fu {
                for &w in &forward[v as usize] {
                    if acc.mark[w as usize] {
                        acc.counts[u] += 1;
                        acc.counts[v as usize] += 1;
                        acc.counts[w as usize] += 1;
                    }
                }
            }
            for &v in fu {
                acc.mark[v as usize] = false;
            }
        },
        |mut a, b| {
            for (x, y) in a.counts.iter_mut().zip(&b.counts) {
                *x += *y;
            }
            a
        },
    );
    acc.counts
}

/// `cc_i = 2 T_i / (deg_i (deg_i - 1))`, zero when `deg_i <= 1`.
pub fn local_clustering(g: &UndirectedGraph) -> Vec<f64> {
    clustering_from_triangles(g, &triangles(g))
}

pub(crate) fn clustering_from_triangles(g: &UndirectedGraph, tri: &[u64]) -> Vec<f64> {
    tri.iter()
        .enumerate()
        .map(|(v, &t)| {
            let d = g.degree(v) as u64;
            if d < 2 {
                0.0
            } else {
                (2 * t) as f64 / (d * (d - 1)) as f64
            }
        })
        .collect()
}

/// Unweighted mean of local clustering over all nodes.
pub fn avg_clustering(g: &UndirectedGraph) -> f64 {
    let cc = local_clustering(g);
    if cc.is_empty() {
        0.0
    } else {
        par::sum_f64(&cc) / cc.len() as f64
    }
}

/// `3 * triangles / connected triples`; 0 without triples.
pub fn transitivity(g: &UndirectedGraph) -> f64 {
    transitivity_from_triangles(g, &triangles(g))
}

pub(crate) fn transitivity_from_triangles(g: &UndirectedGraph, tri: &[u64]) -> f64 {
    // Each triangle is counted at all three corners, so the sum is 3x the count.
    let closed: u64 = tri.iter().sum();
    let triples: u64 = (0..g.node_count())
        .map(|v| {
            let d = g.degree(v) as u64;
            d * d.saturating_sub(1) / 2
        })
        .sum();
    if triples == 0 {
        0.0
    } else {
        closed as f64 / triples as f64
    }
}

/// Degree Pearson correlation over both orientations of every edge.
///
/// `None` when there are fewer than two edges or the edge-end degrees have
/// zero variance (regular graphs). The moments are accumulated in exact
/// integer arithmetic and only the final ratio is rounded.
pub fn degree_assortativity(g: &UndirectedGraph) -> Option<f64> {
    let m = g.edge_count() as i128;
    if m < 2 {
        return None;
    }
    let ends = 2 * m;
    let (mut sx, mut sxx, mut sxy) = (0i128, 0i128, 0i128);
    for v in 0..g.node_count() {
        let d = g.degree(v) as i128;
        sx += d * d;
        sxx += d * d * d;
        let nbr: i128 = g
            .neighbors(v)
            .iter()
            .map(|&w| g.degree(w as usize) as i128)
            .sum();
        sxy += d * nbr;
    }
    let num = ends * sxy - sx * sx;
    let den = ends * sxx - sx * sx;
    if den == 0 {
        return None;
    }
    Some((num as f64 / den as f64).clamp(-1.0, 1.0))
}

/// `deg_i / (n - 1)`.
pub fn degree_centrality(g: &UndirectedGraph) -> Result<Vec<f64>, MetricError> {
    let n = g.node_count();
    if n < 2 {
        return Err(MetricError::TooFewNodes { needed: 2, got: n });
    }
    let denom = (n - 1) as f64;
    Ok((0..n).map(|v| g.degree(v) as f64 / denom).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(n: u32) -> UndirectedGraph {
        let mut e = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                e.push((a, b));
            }
        }
        UndirectedGraph::from_index_edges(n as usize, &e)
    }

    fn star(leaves: u32) -> UndirectedGraph {
        let e: Vec<_> = (1..=leaves).map(|l| (0, l)).collect();
        UndirectedGraph::from_index_edges(leaves as usize + 1, &e)
    }

    #[test]
    fn densities() {
        assert_eq!(density_undirected(&k(4)).unwrap(), 1.0);
        assert_eq!(
            density_undirected(&UndirectedGraph::from_index_edges(4, &[])).unwrap(),
            0.0
        );
        let d = DirectedGraph::from_index_edges(3, &[(0, 1), (1, 2)]);
        assert!((density_directed(&d).unwrap() - 2.0 / 6.0).abs() < 1e-15);
        assert!(density_undirected(&UndirectedGraph::from_index_edges(1, &[])).is_err());
    }

    #[test]
    fn neighbor_degree_on_star() {
        let z = avg_neighbor_degree(&star(4));
        assert_eq!(z[0], 1.0);
        assert!(z[1..].iter().all(|&x| x == 4.0));
        assert_eq!(
            avg_neighbor_degree(&UndirectedGraph::from_index_edges(2, &[]))[0],
            0.0
        );
    }

    #[test]
    fn clustering_examples() {
        assert!(local_clustering(&k(3)).iter().all(|&c| c == 1.0));
        assert_eq!(local_clustering(&star(4))[0], 0.0);
        assert_eq!(transitivity(&k(3)), 1.0);
        let p3 = UndirectedGraph::from_index_edges(3, &[(0, 1), (1, 2)]);
        assert_eq!(transitivity(&p3), 0.0);
        assert_eq!(avg_clustering(&p3), 0.0);
        assert_eq!(triangles(&k(5)), vec![6; 5]);
    }

    #[test]
    fn assortativity_examples() {
        assert!((degree_assortativity(&star(3)).unwrap() + 1.0).abs() < 1e-15);
        let two_k3 =
            UndirectedGraph::from_index_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
        assert_eq!(degree_assortativity(&two_k3), None);
        assert_eq!(
            degree_assortativity(&UndirectedGraph::from_index_edges(2, &[(0, 1)])),
            None
        );
    }

    #[test]
    fn degree_centrality_examples() {
        assert!(degree_centrality(&k(4)).unwrap().iter().all(|&c| c == 1.0));
        let g = UndirectedGraph::from_index_edges(5, &[(0, 1)]);
        assert_eq!(degree_centrality(&g).unwrap()[4], 0.0);
        assert!(degree_centrality(&UndirectedGraph::from_index_edges(1, &[])).is_err());
    }
}
