//! Graph-level summaries, the activity-threshold sweep and the per-node table.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use serde::Serialize;

use crate::graph::{build_subgraph, DirectedGraph, GraphError, GraphView, UndirectedGraph};
use crate::ingest::{ActivityTable, EdgeRecord};

use super::local::{
    avg_neighbor_degree, clustering_from_triangles, degree_assortativity, density_directed,
    density_undirected, transitivity_from_triangles, triangles,
};
use super::paths::{betweenness, closeness_from_profile, distance_profile, BetweennessMode};
use super::spectral::eigenvector_centrality;
use super::MetricError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSummary {
    pub threshold: u64,
    /// Set when no user reaches the threshold; every other field is then zero or absent.
    pub empty: bool,
    pub n: usize,
    pub m_directed: usize,
    pub m_undirected: usize,
    pub n_lcc: usize,
    pub m_lcc: usize,
    pub n_components: usize,
    pub n_isolates: usize,
    pub density_directed: Option<f64>,
    pub density_undirected: Option<f64>,
    pub avg_degree: f64,
    pub avg_clustering: f64,
    pub transitivity: f64,
    pub assortativity: Option<f64>,
    pub radius: Option<u32>,
    pub diameter: Option<u32>,
}

impl GraphSummary {
    fn empty(threshold: u64) -> Self {
        GraphSummary {
            threshold,
            empty: true,
            n: 0,
            m_directed: 0,
            m_undirected: 0,
            n_lcc: 0,
            m_lcc: 0,
            n_components: 0,
            n_isolates: 0,
            density_directed: None,
            density_undirected: None,
            avg_degree: 0.0,
            avg_clustering: 0.0,
            transitivity: 0.0,
            assortativity: None,
            radius: None,
            diameter: None,
        }
    }

    pub const CSV_HEADER: &'static str = "threshold,empty,n,m_directed,m_undirected,n_lcc,m_lcc,n_components,\
n_isolates,density_directed,density_undirected,avg_degree,avg_clustering,transitivity,assortativity,radius,diameter";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.threshold,
            self.empty,
            self.n,
            self.m_directed,
            self.m_undirected,
            self.n_lcc,
            self.m_lcc,
            self.n_components,
            self.n_isolates,
            opt(self.density_directed),
            opt(self.density_undirected),
            self.avg_degree,
            self.avg_clustering,
            self.transitivity,
            opt(self.assortativity),
            opt(self.radius),
            opt(self.diameter),
        )
    }
}

/// Missing values print as `NA`.
fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub fn write_sweep_csv<W: Write>(rows: &[GraphSummary], mut out: W) -> io::Result<()> {
    writeln!(out, "{}", GraphSummary::CSV_HEADER)?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Graph-level statistics of one subgraph. Radius and diameter are measured on
/// the undirected largest component and skipped when `with_distances` is off.
pub fn summarize(g: &DirectedGraph, threshold: u64, with_distances: bool) -> GraphSummary {
    let n = g.node_count();
    if n == 0 {
        return GraphSummary::empty(threshold);
    }
    let u = g.to_undirected();
    let comps = u.weak_components();
    let lcc = u.largest_component();
    let tri = triangles(&u);
    let cc = clustering_from_triangles(&u, &tri);
    let (radius, diameter) = if with_distances {
        let p = distance_profile(&lcc).expect("largest component is connected");
        (p.radius(), p.diameter())
    } else {
        (None, None)
    };
    GraphSummary {
        threshold,
        empty: false,
        n,
        m_directed: g.edge_count(),
        m_undirected: u.edge_count(),
        n_lcc: lcc.node_count(),
        m_lcc: lcc.edge_count(),
        n_components: comps.count(),
        n_isolates: comps.components().iter().filter(|&&(_, s)| s == 1).count(),
        density_directed: density_directed(g).ok(),
        density_undirected: density_undirected(&u).ok(),
        avg_degree: 2.0 * u.edge_count() as f64 / n as f64,
        avg_clustering: cc.iter().sum::<f64>() / n as f64,
        transitivity: transitivity_from_triangles(&u, &tri),
        assortativity: degree_assortativity(&u),
        radius,
        diameter,
    }
}

/// One summary per threshold. The lowest threshold's graph is built once and
/// restricted for the others, which is exact because the node sets nest.
pub fn threshold_sweep(
    edges: &[EdgeRecord],
    activity: &ActivityTable,
    thresholds: &[u64],
    with_distances: bool,
) -> Result<Vec<GraphSummary>, MetricError> {
    if thresholds.is_empty() {
        return Ok(Vec::new());
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) || thresholds[0] == 0 {
        return Err(MetricError::BadThresholds);
    }
    let base = match build_subgraph(edges, activity, thresholds[0]) {
        Ok(g) => g,
        Err(GraphError::EmptyThreshold(_)) => {
            return Ok(thresholds.iter().map(|&t| GraphSummary::empty(t)).collect());
        }
        Err(e) => return Err(e.into()),
    };
    Ok(sweep_graph(&base, thresholds, with_distances))
}

/// Sweep over an already-built graph whose activity values drive the thresholds.
pub fn sweep_graph(
    base: &DirectedGraph,
    thresholds: &[u64],
    with_distances: bool,
) -> Vec<GraphSummary> {
    thresholds
        .iter()
        .map(|&t| match base.restrict(t) {
            Ok(g) => summarize(&g, t, with_distances),
            Err(_) => GraphSummary::empty(t),
        })
        .collect()
}

/// One row of the per-node table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeMetrics {
    pub user_id: String,
    pub af: u64,
    pub deg: usize,
    pub in_deg: usize,
    pub out_deg: usize,
    pub znd: f64,
    pub cc: f64,
    pub ecc: u32,
    pub bc: f64,
    pub cc_close: f64,
    pub ec: f64,
    pub dc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeMetricOptions {
    /// `None` skips betweenness; the column is then written as `NA`.
    pub betweenness: Option<BetweennessMode>,
    pub normalized_betweenness: bool,
}

impl Default for NodeMetricOptions {
    fn default() -> Self {
        NodeMetricOptions {
            betweenness: Some(BetweennessMode::Exact),
            normalized_betweenness: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeMetricsTable {
    pub rows: Vec<NodeMetrics>,
    pub eigen_converged: bool,
    pub eigen_iterations: usize,
    pub eigenvalue: f64,
}

pub const NODE_CSV_HEADER: &str = "user_id,af,deg,in_deg,out_deg,znd,cc,ecc,bc,cc_close,ec,dc";

/// Every per-node metric on a weakly connected directed graph (callers pass
/// the largest component). Degrees by direction come from the directed graph;
/// everything else from its undirected view.
pub fn compute_node_metrics(
    g: &DirectedGraph,
    opts: &NodeMetricOptions,
) -> Result<NodeMetricsTable, MetricError> {
    let u = g.to_undirected();
    let n = u.node_count();
    if n < 2 {
        return Err(MetricError::TooFewNodes { needed: 2, got: n });
    }
    let profile = distance_profile(&u)?;
    let close = closeness_from_profile(&profile);
    let znd = avg_neighbor_degree(&u);
    let cc = clustering_from_triangles(&u, &triangles(&u));
    let bc = match opts.betweenness {
        Some(mode) => betweenness(&u, mode, opts.normalized_betweenness),
        None => vec![f64::NAN; n],
    };
    let ev = eigenvector_centrality(&u)?;
    let denom = (n - 1) as f64;
    let rows = (0..n)
        .map(|v| NodeMetrics {
            user_id: u.id(v).to_string(),
            af: u.activity()[v],
            deg: u.degree(v),
            in_deg: g.in_degree(v),
            out_deg: g.out_degree(v),
            znd: znd[v],
            cc: cc[v],
            ecc: profile.eccentricity[v],
            bc: bc[v],
            cc_close: close[v],
            ec: ev.values[v],
            dc: u.degree(v) as f64 / denom,
        })
        .collect();
    Ok(NodeMetricsTable {
        rows,
        eigen_converged: ev.converged,
        eigen_iterations: ev.iterations,
        eigenvalue: ev.eigenvalue,
    })
}

impl NodeMetricsTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{NODE_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.user_id,
                r.af,
                r.deg,
                r.in_deg,
                r.out_deg,
                r.znd,
                r.cc,
                r.ecc,
                opt(Some(r.bc).filter(|b| !b.is_nan())),
                r.cc_close,
                r.ec,
                r.dc
            )?;
        }
        Ok(())
    }
}

/// Numeric columns of a node metrics CSV keyed by header name, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricColumns {
    pub names: Vec<String>,
    pub ids: Vec<String>,
    columns: HashMap<String, Vec<f64>>,
}

impl MetricColumns {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Reads any CSV whose first column is an id and the rest numeric.
    pub fn read_csv<R: BufRead>(source: R) -> Result<Self, MetricError> {
        let mut lines = source.lines();
        let header = match lines.next() {
            Some(h) => h.map_err(|e| MetricError::Csv(e.to_string()))?,
            None => return Err(MetricError::Csv("empty file".into())),
        };
        let header: Vec<String> = header
            .trim_end_matches('\r')
            .split(',')
            .map(str::to_string)
            .collect();
        if header.len() < 2 {
            return Err(MetricError::Csv(
                "expected an id column plus numeric columns".into(),
            ));
        }
        let names = header[1..].to_vec();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        let mut ids = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| MetricError::Csv(e.to_string()))?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != header.len() {
                return Err(MetricError::Csv(format!(
                    "line {}: expected {} fields",
                    i + 2,
                    header.len()
                )));
            }
            ids.push(fields[0].to_string());
            for (c, f) in fields[1..].iter().enumerate() {
                let v = if *f == "NA" {
                    f64::NAN
                } else {
                    f.parse().map_err(|_| {
                        MetricError::Csv(format!("line {}: bad number `{f}`", i + 2))
                    })?
                };
                cols[c].push(v);
            }
        }
        let columns = names.iter().cloned().zip(cols).collect();
        Ok(MetricColumns {
            names,
            ids,
            columns,
        })
    }
}

/// Undirected degree sequence, isolates dropped (for tail fitting).
pub fn positive_degrees(u: &UndirectedGraph) -> Vec<u64> {
    (0..u.node_count())
        .map(|v| u.degree(v) as u64)
        .filter(|&d| d > 0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(follower: &str, followee: &str) -> EdgeRecord {
        EdgeRecord {
            follower: follower.into(),
            followee: followee.into(),
        }
    }

    #[test]
    fn edgeless_threshold_row() {
        let mut act = ActivityTable::new();
        for (u, n) in [("a", 5), ("b", 5), ("c", 1)] {
            act.record(u, n);
        }
        let rows = threshold_sweep(&[edge("a", "c")], &act, &[1, 2, 9], true).unwrap();
        assert_eq!(rows[1].n, 2);
        assert_eq!(rows[1].m_directed, 0);
        assert_eq!(rows[1].density_directed, Some(0.0));
        assert_eq!(rows[1].n_isolates, 2);
        assert!(rows[2].empty);
        assert!(rows[2].csv_row().contains("NA"));
        assert!(threshold_sweep(&[], &act, &[2, 1], false).is_err());
    }

    #[test]
    fn node_table_columns() {
        let g = DirectedGraph::from_index_edges(4, &[(0, 1), (1, 0), (1, 2), (2, 3), (3, 1)]);
        let t = compute_node_metrics(&g, &NodeMetricOptions::default()).unwrap();
        assert_eq!(t.rows.len(), 4);
        let r1 = &t.rows[1];
        assert_eq!((r1.deg, r1.in_deg, r1.out_deg), (3, 2, 2));
        assert_eq!(r1.ecc, 1);
        assert_eq!(r1.dc, 1.0);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let cols = MetricColumns::read_csv(&buf[..]).unwrap();
        assert_eq!(cols.names.len(), 11);
        assert_eq!(cols.get("in_deg").unwrap(), &[1.0, 2.0, 1.0, 1.0]);
        assert_eq!(cols.get("ec").unwrap()[1], t.rows[1].ec);
    }
}
