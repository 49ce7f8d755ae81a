//! Reference flat DBSCAN over a base distance matrix.
//!
//! Only core points are labelled; border points stay noise. This is the
//! variant whose output coincides with cutting the mutual-reachability MST,
//! so it serves as the oracle for [`crate::mst::flat_cut`].

use std::collections::VecDeque;

use thiserror::Error;

use crate::metric::DistanceMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum FlatError {
    #[error("eps must be positive, got {0}")]
    NonPositiveEps(f64),
}

/// A single-level clustering; `None` marks noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatPartition {
    pub assignment: Vec<Option<usize>>,
    pub cluster_count: usize,
}

impl FlatPartition {
    /// Relabels components so ids follow the smallest member index.
    pub(crate) fn from_components(assignment: Vec<Option<usize>>) -> Self {
        let mut remap: Vec<Option<usize>> = Vec::new();
        let mut next = 0;
        let assignment = assignment
            .into_iter()
            .map(|a| {
                a.map(|c| {
                    if remap.len() <= c {
                        remap.resize(c + 1, None);
                    }
                    *remap[c].get_or_insert_with(|| {
                        next += 1;
                        next - 1
                    })
                })
            })
            .collect();
        Self {
            assignment,
            cluster_count: next,
        }
    }

    pub fn noise(&self) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_none())
            .map(|(i, _)| i)
            .collect()
    }

    /// Clusters as sorted member lists, indexed by cluster id.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count];
        for (i, a) in self.assignment.iter().enumerate() {
            if let Some(c) = a {
                out[*c].push(i);
            }
        }
        out
    }
}

/// Flat DBSCAN: `i` is core iff at least `min_pts` other points lie within `eps`.
pub fn dbscan_flat(d: &DistanceMatrix, eps: f64, min_pts: usize) -> Result<FlatPartition, FlatError> {
    if !(eps > 0.0) {
        return Err(FlatError::NonPositiveEps(eps));
    }
    let n = d.len();
    let range_query = |p: usize| -> Vec<usize> {
        (0..n).filter(|&q| q != p && d.get(p, q) <= eps).collect()
    };
    let is_core: Vec<bool> = (0..n).map(|p| range_query(p).len() >= min_pts).collect();

    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for p in 0..n {
        if label[p].is_some() || !is_core[p] {
            continue;
        }
        let c = next;
        next += 1;
        label[p] = Some(c);
        let mut seeds = VecDeque::from([p]);
        while let Some(q) = seeds.pop_front() {
            for r in range_query(q) {
                if is_core[r] && label[r].is_none() {
                    label[r] = Some(c);
                    seeds.push_back(r);
                }
            }
        }
    }
    Ok(FlatPartition {
        assignment: label,
        cluster_count: next,
    })
}
