//! Minimum spanning trees over dense distance matrices, the single-linkage
//! merge sequence they induce, and flat cuts at a fixed radius.
//!
//! Edges are totally ordered by `(weight, smaller endpoint, larger endpoint)`.
//! Under that order the MST is unique, so Prim's growth from vertex 0 and a
//! Kruskal-style sort agree edge for edge, and ties between equal weights
//! always resolve the same way.

use std::cmp::Ordering;
use std::io::{Read, Write};

use thiserror::Error;

use crate::dbscan::{FlatError, FlatPartition};
use crate::metric::{CoreDistances, DistanceMatrix};
use crate::union_find::UnionFind;

#[derive(Debug, Error)]
pub enum MstError {
    #[error("cannot build a spanning tree over zero points")]
    Empty,
    #[error("core distances cover {core} points but the tree spans {tree}")]
    Shape { tree: usize, core: usize },
    #[error(transparent)]
    Flat(#[from] FlatError),
    #[error("invalid linkage: {0}")]
    Linkage(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// Smaller endpoint.
    pub u: usize,
    /// Larger endpoint.
    pub v: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(a: usize, b: usize, weight: f64) -> Self {
        Self {
            u: a.min(b),
            v: a.max(b),
            weight,
        }
    }

    pub fn tie_order(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then(self.u.cmp(&other.u))
            .then(self.v.cmp(&other.v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimumSpanningTree {
    pub n: usize,
    /// `n - 1` edges in ascending tie order.
    pub edges: Vec<Edge>,
}

impl MinimumSpanningTree {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }
}

/// Dense Prim: repeatedly attach the frontier vertex with the cheapest link.
pub fn build_mst(d: &DistanceMatrix) -> Result<MinimumSpanningTree, MstError> {
    let n = d.len();
    if n == 0 {
        return Err(MstError::Empty);
    }
    let mut in_tree = vec![false; n];
    // Best known link into the tree for each outside vertex.
    let mut best: Vec<Option<Edge>> = vec![None; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let row = d.row(current);
        let mut pick: Option<(usize, Edge)> = None;
        for x in 0..n {
            if in_tree[x] {
                continue;
            }
            let cand = Edge::new(current, x, row[x]);
            let slot = &mut best[x];
            if slot.is_none_or(|b| cand.tie_order(&b) == Ordering::Less) {
                *slot = Some(cand);
            }
            let b = slot.unwrap();
            if pick.is_none_or(|(_, p)| b.tie_order(&p) == Ordering::Less) {
                pick = Some((x, b));
            }
        }
        let (next, edge) = pick.expect("a frontier vertex remains while the tree is incomplete");
        in_tree[next] = true;
        edges.push(edge);
        current = next;
    }
    edges.sort_by(Edge::tie_order);
    Ok(MinimumSpanningTree { n, edges })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Single-linkage merge sequence; merge `k` creates node `n + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkageTree {
    pub n: usize,
    pub merges: Vec<Merge>,
}

impl LinkageTree {
    /// Number of leaves beneath `node`.
    pub fn node_size(&self, node: usize) -> usize {
        if node < self.n {
            1
        } else {
            self.merges[node - self.n].size
        }
    }

    pub fn root(&self) -> usize {
        if self.merges.is_empty() {
            0
        } else {
            self.n + self.merges.len() - 1
        }
    }

    pub fn validate(&self) -> Result<(), MstError> {
        if self.n == 0 {
            return Err(MstError::Linkage("zero points".into()));
        }
        if self.merges.len() != self.n - 1 {
            return Err(MstError::Linkage(format!(
                "{} merges for {} points",
                self.merges.len(),
                self.n
            )));
        }
        let mut used = vec![false; 2 * self.n - 1];
        let mut prev = f64::NEG_INFINITY;
        for (k, m) in self.merges.iter().enumerate() {
            let id = self.n + k;
            for c in [m.left, m.right] {
                if c >= id || used[c] {
                    return Err(MstError::Linkage(format!("merge {k} reuses or forward-references node {c}")));
                }
                used[c] = true;
            }
            if !(m.height >= prev) || !m.height.is_finite() {
                return Err(MstError::Linkage(format!("merge {k} height out of order")));
            }
            if m.size != self.node_size(m.left) + self.node_size(m.right) {
                return Err(MstError::Linkage(format!("merge {k} size mismatch")));
            }
            prev = m.height;
        }
        Ok(())
    }

    /// CSV dump with header `left,right,height,size`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MstError> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["left", "right", "height", "size"])?;
        for m in &self.merges {
            w.write_record([
                m.left.to_string(),
                m.right.to_string(),
                m.height.to_string(),
                m.size.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, MstError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut merges = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("").trim().to_string();
            let parse_err = |what: &str| MstError::Linkage(format!("row {}: bad {what}", merges.len()));
            merges.push(Merge {
                left: field(0).parse().map_err(|_| parse_err("left"))?,
                right: field(1).parse().map_err(|_| parse_err("right"))?,
                height: field(2).parse().map_err(|_| parse_err("height"))?,
                size: field(3).parse().map_err(|_| parse_err("size"))?,
            });
        }
        let link = Self {
            n: merges.len() + 1,
            merges,
        };
        link.validate()?;
        Ok(link)
    }
}

/// Kruskal pass over the (already ordered) MST edges.
pub fn mst_to_linkage(mst: &MinimumSpanningTree) -> LinkageTree {
    let n = mst.n;
    let mut uf = UnionFind::new(n);
    // Current dendrogram node for each union-find root.
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut edges = mst.edges.clone();
    edges.sort_by(Edge::tie_order);
    for e in edges {
        let (ru, rv) = (uf.find(e.u), uf.find(e.v));
        let (left, right) = (node_of[ru], node_of[rv]);
        let size = uf.size_of(ru) + uf.size_of(rv);
        let root = uf.union(ru, rv).expect("spanning tree edges never close a cycle");
        node_of[root] = n + merges.len();
        merges.push(Merge {
            left,
            right,
            height: e.weight,
            size,
        });
    }
    LinkageTree { n, merges }
}

/// Flat clusters at radius `eps`: drop MST edges heavier than `eps` and treat
/// points whose core distance exceeds `eps` as noise.
pub fn flat_cut(
    mst: &MinimumSpanningTree,
    core: &CoreDistances,
    eps: f64,
) -> Result<FlatPartition, MstError> {
    if !(eps > 0.0) {
        return Err(FlatError::NonPositiveEps(eps).into());
    }
    if core.len() != mst.n {
        return Err(MstError::Shape {
            tree: mst.n,
            core: core.len(),
        });
    }
    let mut uf = UnionFind::new(mst.n);
    for e in mst.edges.iter().filter(|e| e.weight <= eps) {
        uf.union(e.u, e.v);
    }
    let assignment = (0..mst.n)
        .map(|i| (core.values[i] <= eps).then(|| uf.find(i)))
        .collect();
    Ok(FlatPartition::from_components(assignment))
}
