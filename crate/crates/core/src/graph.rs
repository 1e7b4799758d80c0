//! Activity-thresholded follower graphs in compressed sparse row form.
//!
//! Node indices are dense and assigned in ascending external-id order, so any
//! two builds from the same inputs produce identical arrays. Edges point from
//! followee to follower (the direction information travels).

use std::collections::{HashMap, VecDeque};
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::ingest::{ActivityTable, EdgeRecord};
use crate::par;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("threshold AF >= {0} excludes all users")]
    EmptyThreshold(u64),
    #[error("threshold must be at least 1")]
    ZeroThreshold,
    #[error("graph cache: {0}")]
    Cache(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Offsets plus sorted neighbour arrays.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Csr {
    /// Builds from `(src, dst)` pairs sorted by `(src, dst)` with no duplicates.
    fn from_sorted_pairs(n: usize, pairs: &[(u32, u32)]) -> Csr {
        let mut offsets = vec![0usize; n + 1];
        for &(s, _) in pairs {
            offsets[s as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Csr {
            offsets,
            targets: pairs.iter().map(|&(_, d)| d).collect(),
        }
    }

    /// Reverses every edge. Each output row comes out sorted because rows are
    /// scanned in ascending source order.
    fn transpose(&self) -> Csr {
        let n = self.node_count();
        let mut offsets = vec![0usize; n + 1];
        for &t in &self.targets {
            offsets[t as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![0u32; self.targets.len()];
        for v in 0..n {
            for &t in self.row(v) {
                targets[cursor[t as usize]] = v as u32;
                cursor[t as usize] += 1;
            }
        }
        Csr { offsets, targets }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn entry_count(&self) -> usize {
        self.targets.len()
    }

    #[inline]
    pub fn row(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn row_len(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn targets(&self) -> &[u32] {
        &self.targets
    }

    fn validate(&self, n: usize) -> Result<(), String> {
        if self.offsets.len() != n + 1
            || self.offsets[0] != 0
            || *self.offsets.last().unwrap() != self.targets.len()
        {
            return Err("offset array shape".into());
        }
        for v in 0..n {
            if self.offsets[v] > self.offsets[v + 1] {
                return Err(format!("offsets decrease at node {v}"));
            }
            let row = self.row(v);
            if row.windows(2).any(|w| w[0] >= w[1])
                || row.iter().any(|&t| t as usize >= n || t as usize == v)
            {
                return Err(format!(
                    "row {v} is unsorted, duplicated, self-looped or out of range"
                ));
            }
        }
        Ok(())
    }
}

/// Width used for synthetic ids, so that string order equals numeric order.
fn index_id(i: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len();
    format!("{i:0width$}")
}

/// Operations shared by the directed and undirected views.
pub trait GraphView: Sized {
    fn node_count(&self) -> usize;
    fn ids(&self) -> &[String];
    fn activity(&self) -> &[u64];
    /// Neighbours ignoring direction; a node may be reported twice for a
    /// reciprocal directed pair.
    fn for_each_neighbor(&self, v: usize, f: impl FnMut(usize));
    /// Subgraph induced on the nodes where `keep` is true, order preserved.
    fn induced(&self, keep: &[bool]) -> Self;

    fn id(&self, v: usize) -> &str {
        &self.ids()[v]
    }

    fn index_of(&self, id: &str) -> Option<usize> {
        self.ids()
            .binary_search_by(|probe| probe.as_str().cmp(id))
            .ok()
    }

    /// Weak components; each label is the smallest dense index in its component.
    fn weak_components(&self) -> ComponentLabeling {
        let n = self.node_count();
        let mut labels = vec![u32::MAX; n];
        let mut sizes = Vec::new();
        let mut queue = VecDeque::new();
        for s in 0..n {
            if labels[s] != u32::MAX {
                continue;
            }
            labels[s] = s as u32;
            queue.push_back(s);
            let mut size = 0usize;
            while let Some(v) = queue.pop_front() {
                size += 1;
                self.for_each_neighbor(v, |w| {
                    if labels[w] == u32::MAX {
                        labels[w] = s as u32;
                        queue.push_back(w);
                    }
                });
            }
            sizes.push((s as u32, size));
        }
        ComponentLabeling::new(labels, sizes)
    }

    /// Nodes with no incident edge.
    fn isolates(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&v| {
                let mut any = false;
                self.for_each_neighbor(v, |_| any = true);
                !any
            })
            .collect()
    }

    /// Induced subgraph on the largest weak component. Equal sizes are broken
    /// by the smallest minimum external id.
    fn largest_component(&self) -> Self {
        let comps = self.weak_components();
        match comps.largest() {
            Some((label, _)) => {
                let keep: Vec<bool> = comps.labels().iter().map(|&l| l == label).collect();
                self.induced(&keep)
            }
            None => self.induced(&[]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    labels: Vec<u32>,
    /// `(label, size)` in ascending label order.
    sizes: Vec<(u32, usize)>,
    largest: Option<usize>,
}

impl ComponentLabeling {
    fn new(labels: Vec<u32>, sizes: Vec<(u32, usize)>) -> Self {
        // Labels ascend, so the first maximum has the smallest label.
        let mut largest: Option<usize> = None;
        for (i, &(_, sz)) in sizes.iter().enumerate() {
            if largest.is_none_or(|j| sz > sizes[j].1) {
                largest = Some(i);
            }
        }
        ComponentLabeling {
            labels,
            sizes,
            largest,
        }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn components(&self) -> &[(u32, usize)] {
        &self.sizes
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// `(label, size)` of the largest component.
    pub fn largest(&self) -> Option<(u32, usize)> {
        self.largest.map(|i| self.sizes[i])
    }
}

fn induce_csr(csr: &Csr, keep: &[bool], remap: &[u32]) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    for v in 0..csr.node_count() {
        if !keep[v] {
            continue;
        }
        for &t in csr.row(v) {
            if keep[t as usize] {
                pairs.push((remap[v], remap[t as usize]));
            }
        }
    }
    pairs
}

fn remap_for(keep: &[bool]) -> Vec<u32> {
    let mut next = 0u32;
    keep.iter()
        .map(|&k| {
            let r = next;
            if k {
                next += 1;
            }
            r
        })
        .collect()
}

fn pick<T: Clone>(items: &[T], keep: &[bool]) -> Vec<T> {
    items
        .iter()
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(x, _)| x.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    ids: Vec<String>,
    activity: Vec<u64>,
    forward: Csr,
    reverse: Csr,
}

const EDGE_CHUNK: usize = 1 << 16;

/// Builds the subgraph of users with `AF >= threshold`, with an edge
/// followee -> follower whenever both ends qualify. Users with no edge rows
/// are kept as isolates; self-edges and duplicate rows are dropped.
pub fn build_subgraph(
    edges: &[EdgeRecord],
    activity: &ActivityTable,
    threshold: u64,
) -> Result<DirectedGraph, GraphError> {
    if threshold == 0 {
        return Err(GraphError::ZeroThreshold);
    }
    let mut nodes: Vec<(&str, u64)> = activity.iter().filter(|&(_, af)| af >= threshold).collect();
    if nodes.is_empty() {
        return Err(GraphError::EmptyThreshold(threshold));
    }
    nodes.sort_unstable_by(|a, b| a.0.cmp(b.0));
    let index: HashMap<&str, u32> = nodes
        .iter()
        .enumerate()
        .map(|(i, &(u, _))| (u, i as u32))
        .collect();

    let chunks = par::map_range(edges.len().div_ceil(EDGE_CHUNK), |c| {
        let lo = c * EDGE_CHUNK;
        let hi = (lo + EDGE_CHUNK).min(edges.len());
        edges[lo..hi]
            .iter()
            .filter_map(|e| {
                let src = *index.get(e.followee.as_str())?;
                let dst = *index.get(e.follower.as_str())?;
                (src != dst).then_some((src, dst))
            })
            .collect::<Vec<_>>()
    });
    let mut pairs: Vec<(u32, u32)> = chunks.into_iter().flatten().collect();
    par::sort_unstable(&mut pairs);
    pairs.dedup();

    let ids = nodes.iter().map(|&(u, _)| u.to_string()).collect();
    let activity = nodes.iter().map(|&(_, af)| af).collect();
    Ok(DirectedGraph::from_sorted(ids, activity, &pairs))
}

impl DirectedGraph {
    fn from_sorted(ids: Vec<String>, activity: Vec<u64>, pairs: &[(u32, u32)]) -> Self {
        let forward = Csr::from_sorted_pairs(ids.len(), pairs);
        let reverse = forward.transpose();
        DirectedGraph {
            ids,
            activity,
            forward,
            reverse,
        }
    }

    /// Graph over nodes `0..n` with zero-padded numeric ids and unit activity.
    /// Self-loops and duplicate pairs are discarded.
    pub fn from_index_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut pairs: Vec<_> = edges.iter().copied().filter(|&(a, b)| a != b).collect();
        assert!(
            pairs
                .iter()
                .all(|&(a, b)| (a as usize) < n && (b as usize) < n),
            "edge endpoint out of range"
        );
        pairs.sort_unstable();
        pairs.dedup();
        let ids = (0..n).map(|i| index_id(i, n)).collect();
        Self::from_sorted(ids, vec![1; n], &pairs)
    }

    /// Replaces the per-node activity values.
    pub fn with_activity(mut self, activity: Vec<u64>) -> Self {
        assert_eq!(activity.len(), self.ids.len());
        self.activity = activity;
        self
    }

    pub fn edge_count(&self) -> usize {
        self.forward.entry_count()
    }

    pub fn out_neighbors(&self, v: usize) -> &[u32] {
        self.forward.row(v)
    }

    pub fn in_neighbors(&self, v: usize) -> &[u32] {
        self.reverse.row(v)
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.forward.row_len(v)
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.reverse.row_len(v)
    }

    pub fn forward(&self) -> &Csr {
        &self.forward
    }

    pub fn reverse(&self) -> &Csr {
        &self.reverse
    }

    /// All edges as `(src, dst)` in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count())
            .flat_map(move |v| self.out_neighbors(v).iter().map(move |&t| (v, t as usize)))
    }

    /// Subgraph on nodes with `AF >= threshold`.
    pub fn restrict(&self, threshold: u64) -> Result<DirectedGraph, GraphError> {
        let keep: Vec<bool> = self.activity.iter().map(|&a| a >= threshold).collect();
        if !keep.iter().any(|&k| k) {
            return Err(GraphError::EmptyThreshold(threshold));
        }
        Ok(self.induced(&keep))
    }

    /// Undirected view: `{u, v}` whenever `u -> v` or `v -> u`.
    pub fn to_undirected(&self) -> UndirectedGraph {
        let n = self.node_count();
        let rows = par::map_range(n, |v| {
            let (a, b) = (self.out_neighbors(v), self.in_neighbors(v));
            let mut merged = Vec::with_capacity(a.len() + b.len());
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                let next = match (a.get(i), b.get(j)) {
                    (Some(&x), Some(&y)) if x == y => {
                        i += 1;
                        j += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        i += 1;
                        x
                    }
                    (Some(_), Some(&y)) => {
                        j += 1;
                        y
                    }
                    (Some(&x), None) => {
                        i += 1;
                        x
                    }
                    (None, Some(&y)) => {
                        j += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                merged.push(next);
            }
            merged
        });
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut targets = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        for r in rows {
            targets.extend_from_slice(&r);
            offsets.push(targets.len());
        }
        UndirectedGraph {
            ids: self.ids.clone(),
            activity: self.activity.clone(),
            adj: Csr { offsets, targets },
        }
    }

    pub fn write_cache<W: Write>(&self, out: W) -> io::Result<()> {
        cache::write(self, out)
    }

    pub fn read_cache<R: Read>(input: R) -> Result<DirectedGraph, GraphError> {
        cache::read(input)
    }

    /// Attributed edge list `src,dst,src_af,dst_af` in followee -> follower direction.
    pub fn write_edge_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "src,dst,src_af,dst_af")?;
        for (s, d) in self.edges() {
            writeln!(
                out,
                "{},{},{},{}",
                self.ids[s], self.ids[d], self.activity[s], self.activity[d]
            )?;
        }
        Ok(())
    }
}

impl GraphView for DirectedGraph {
    fn node_count(&self) -> usize {
        self.ids.len()
    }

    fn ids(&self) -> &[String] {
        &self.ids
    }

    fn activity(&self) -> &[u64] {
        &self.activity
    }

    fn for_each_neighbor(&self, v: usize, mut f: impl FnMut(usize)) {
        self.out_neighbors(v)
            .iter()
            .chain(self.in_neighbors(v))
            .for_each(|&w| f(w as usize));
    }

    fn induced(&self, keep: &[bool]) -> Self {
        let keep = pad_mask(keep, self.node_count());
        let remap = remap_for(&keep);
        let pairs = induce_csr(&self.forward, &keep, &remap);
        Self::from_sorted(pick(&self.ids, &keep), pick(&self.activity, &keep), &pairs)
    }
}

fn pad_mask(keep: &[bool], n: usize) -> Vec<bool> {
    let mut k = keep.to_vec();
    k.resize(n, false);
    k
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    ids: Vec<String>,
    activity: Vec<u64>,
    adj: Csr,
}

impl UndirectedGraph {
    /// Graph over nodes `0..n` with zero-padded numeric ids and unit activity.
    pub fn from_index_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut pairs = Vec::with_capacity(edges.len() * 2);
        for &(a, b) in edges {
            assert!(
                (a as usize) < n && (b as usize) < n,
                "edge endpoint out of range"
            );
            if a != b {
                pairs.push((a, b));
                pairs.push((b, a));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let ids = (0..n).map(|i| index_id(i, n)).collect();
        UndirectedGraph {
            ids,
            activity: vec![1; n],
            adj: Csr::from_sorted_pairs(n, &pairs),
        }
    }

    pub fn with_activity(mut self, activity: Vec<u64>) -> Self {
        assert_eq!(activity.len(), self.ids.len());
        self.activity = activity;
        self
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        self.adj.row(v)
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.adj.row_len(v)
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.node_count()).map(|v| self.degree(v)).collect()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.adj.entry_count() / 2
    }

    pub fn adjacency(&self) -> &Csr {
        &self.adj
    }

    /// Each edge once as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |v| {
            self.neighbors(v)
                .iter()
                .filter(move |&&t| (t as usize) > v)
                .map(move |&t| (v, t as usize))
        })
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() > 0 && self.weak_components().count() == 1
    }
}

impl GraphView for UndirectedGraph {
    fn node_count(&self) -> usize {
        self.ids.len()
    }

    fn ids(&self) -> &[String] {
        &self.ids
    }

    fn activity(&self) -> &[u64] {
        &self.activity
    }

    fn for_each_neighbor(&self, v: usize, mut f: impl FnMut(usize)) {
        self.neighbors(v).iter().for_each(|&w| f(w as usize));
    }

    fn induced(&self, keep: &[bool]) -> Self {
        let keep = pad_mask(keep, self.node_count());
        let remap = remap_for(&keep);
        let pairs = induce_csr(&self.adj, &keep, &remap);
        let n = keep.iter().filter(|&&k| k).count();
        UndirectedGraph {
            ids: pick(&self.ids, &keep),
            activity: pick(&self.activity, &keep),
            adj: Csr::from_sorted_pairs(n, &pairs),
        }
    }
}

/// Binary cache layout, all integers little-endian:
///
/// ```text
/// magic    8 bytes  "AFGRAPH\0"
/// version  u32      1
/// reserved u32      0
/// n        u64      node count
/// m        u64      directed edge count
/// ids      n x (u32 byte length, UTF-8 bytes), ascending
/// activity n x u64
/// forward  (n + 1) x u64 offsets, then m x u32 targets
/// reverse  (n + 1) x u64 offsets, then m x u32 targets
/// ```
pub mod cache {
    use super::*;

    pub const MAGIC: &[u8; 8] = b"AFGRAPH\0";
    pub const VERSION: u32 = 1;

    fn put_csr<W: Write>(out: &mut W, csr: &Csr) -> io::Result<()> {
        for &o in &csr.offsets {
            out.write_all(&(o as u64).to_le_bytes())?;
        }
        for &t in &csr.targets {
            out.write_all(&t.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn write<W: Write>(g: &DirectedGraph, out: W) -> io::Result<()> {
        let mut out = io::BufWriter::new(out);
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&0u32.to_le_bytes())?;
        out.write_all(&(g.node_count() as u64).to_le_bytes())?;
        out.write_all(&(g.edge_count() as u64).to_le_bytes())?;
        for id in &g.ids {
            out.write_all(&(id.len() as u32).to_le_bytes())?;
            out.write_all(id.as_bytes())?;
        }
        for &a in &g.activity {
            out.write_all(&a.to_le_bytes())?;
        }
        put_csr(&mut out, &g.forward)?;
        put_csr(&mut out, &g.reverse)?;
        out.flush()
    }

    struct Reader<R> {
        inner: R,
    }

    impl<R: Read> Reader<R> {
        fn bytes<const N: usize>(&mut self) -> Result<[u8; N], GraphError> {
            let mut b = [0u8; N];
            self.inner
                .read_exact(&mut b)
                .map_err(|e| GraphError::Cache(format!("truncated: {e}")))?;
            Ok(b)
        }
        fn u32(&mut self) -> Result<u32, GraphError> {
            Ok(u32::from_le_bytes(self.bytes()?))
        }
        fn u64(&mut self) -> Result<u64, GraphError> {
            Ok(u64::from_le_bytes(self.bytes()?))
        }
        fn csr(&mut self, n: usize, m: usize) -> Result<Csr, GraphError> {
            let offsets = (0..=n)
                .map(|_| self.u64().map(|o| o as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let targets = (0..m).map(|_| self.u32()).collect::<Result<Vec<_>, _>>()?;
            let csr = Csr { offsets, targets };
            csr.validate(n).map_err(GraphError::Cache)?;
            Ok(csr)
        }
    }

    pub fn read<R: Read>(input: R) -> Result<DirectedGraph, GraphError> {
        let mut r = Reader {
            inner: io::BufReader::new(input),
        };
        if &r.bytes::<8>()? != MAGIC {
            return Err(GraphError::Cache("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(GraphError::Cache(format!("unsupported version {version}")));
        }
        let _reserved = r.u32()?;
        let n = r.u64()? as usize;
        let m = r.u64()? as usize;
        let mut ids = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let len = r.u32()? as usize;
            let mut buf = vec![0u8; len];
            r.inner
                .read_exact(&mut buf)
                .map_err(|e| GraphError::Cache(format!("truncated: {e}")))?;
            ids.push(
                String::from_utf8(buf).map_err(|_| GraphError::Cache("id is not UTF-8".into()))?,
            );
        }
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GraphError::Cache("ids not strictly ascending".into()));
        }
        let activity = (0..n).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
        let forward = r.csr(n, m)?;
        let reverse = r.csr(n, m)?;
        if forward.transpose() != reverse {
            return Err(GraphError::Cache(
                "forward and reverse arrays disagree".into(),
            ));
        }
        let mut probe = [0u8; 1];
        if r.inner.read(&mut probe)? != 0 {
            return Err(GraphError::Cache("trailing bytes".into()));
        }
        Ok(DirectedGraph {
            ids,
            activity,
            forward,
            reverse,
        })
    }
}
