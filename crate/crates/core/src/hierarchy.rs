//! Condensed cluster hierarchy built from a single-linkage merge sequence.
//!
//! Walking merges from the largest height down, a cluster splits only when
//! both sides hold at least `min_cluster_size` points. Otherwise the smaller
//! side is shed and the cluster carries on. A node's members are every point
//! beneath it at birth, shed points included.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mst::LinkageTree;

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("min_cluster_size must be in 1..={n}, got {got}")]
    MinClusterSize { got: usize, n: usize },
    #[error(transparent)]
    Linkage(#[from] crate::mst::MstError),
    #[error("malformed hierarchy: {0}")]
    Malformed(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// `count` points leave a node once ε drops below `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shed {
    pub eps: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// `f64::INFINITY` for the root.
    pub birth_eps: f64,
    pub death_eps: f64,
    pub size: usize,
    pub members: Vec<usize>,
    /// Ordered by decreasing ε.
    pub shed: Vec<Shed>,
}

impl ClusterNode {
    pub fn birth_lambda(&self) -> f64 {
        1.0 / self.birth_eps
    }

    /// Step profile `(eps, width)`: the width holds from `eps` downwards
    /// until the next step. The last step is the width handed to children.
    pub fn width_steps(&self) -> Vec<(f64, usize)> {
        let mut width = self.size;
        let mut steps = vec![(self.birth_eps, width)];
        for s in &self.shed {
            width -= s.count;
            steps.push((s.eps, width));
        }
        steps
    }

    fn push_shed(&mut self, eps: f64, count: usize) {
        match self.shed.last_mut() {
            Some(last) if last.eps == eps => last.count += count,
            _ => self.shed.push(Shed { eps, count }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterHierarchy {
    pub n: usize,
    pub min_cluster_size: usize,
    pub root: usize,
    pub nodes: BTreeMap<usize, ClusterNode>,
    has_members: bool,
}

fn leaves_under(link: &LinkageTree, node: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(link.node_size(node));
    let mut stack = vec![node];
    while let Some(x) = stack.pop() {
        if x < link.n {
            out.push(x);
        } else {
            let m = &link.merges[x - link.n];
            stack.push(m.left);
            stack.push(m.right);
        }
    }
    out.sort_unstable();
    out
}

pub fn build_hierarchy(
    link: &LinkageTree,
    min_cluster_size: usize,
) -> Result<ClusterHierarchy, HierarchyError> {
    link.validate()?;
    let n = link.n;
    if min_cluster_size == 0 || min_cluster_size > n {
        return Err(HierarchyError::MinClusterSize {
            got: min_cluster_size,
            n,
        });
    }
    let mut nodes = BTreeMap::new();
    // (cluster id, parent, birth eps, linkage node)
    let mut queue = VecDeque::from([(0usize, None, f64::INFINITY, link.root())]);
    let mut next_id = 1;
    while let Some((id, parent, birth_eps, start)) = queue.pop_front() {
        let mut node = ClusterNode {
            id,
            parent,
            children: Vec::new(),
            birth_eps,
            death_eps: 0.0,
            size: link.node_size(start),
            members: leaves_under(link, start),
            shed: Vec::new(),
        };
        let mut cur = start;
        while cur >= n {
            let m = link.merges[cur - n];
            let (sl, sr) = (link.node_size(m.left), link.node_size(m.right));
            match (sl >= min_cluster_size, sr >= min_cluster_size) {
                (true, true) => {
                    node.death_eps = m.height;
                    for side in [m.left, m.right] {
                        node.children.push(next_id);
                        queue.push_back((next_id, Some(id), m.height, side));
                        next_id += 1;
                    }
                    break;
                }
                (true, false) => {
                    node.push_shed(m.height, sr);
                    cur = m.left;
                }
                (false, true) => {
                    node.push_shed(m.height, sl);
                    cur = m.right;
                }
                (false, false) => {
                    node.push_shed(m.height, sl + sr);
                    node.death_eps = m.height;
                    break;
                }
            }
        }
        nodes.insert(id, node);
    }
    Ok(ClusterHierarchy {
        n,
        min_cluster_size,
        root: 0,
        nodes,
        has_members: true,
    })
}

impl ClusterHierarchy {
    pub fn node(&self, id: usize) -> Option<&ClusterNode> {
        self.nodes.get(&id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// False when loaded from JSON written without member lists.
    pub fn has_members(&self) -> bool {
        self.has_members
    }

    pub fn check_invariants(&self) -> Result<(), HierarchyError> {
        let bad = |msg: String| Err(HierarchyError::Malformed(msg));
        let Some(root) = self.nodes.get(&self.root) else {
            return bad("root missing".into());
        };
        if root.parent.is_some() {
            return bad("root has a parent".into());
        }
        for node in self.nodes.values() {
            if !(node.death_eps <= node.birth_eps) {
                return bad(format!("node {} dies above its birth", node.id));
            }
            let shed: usize = node.shed.iter().map(|s| s.count).sum();
            if shed > node.size {
                return bad(format!("node {} sheds more points than it holds", node.id));
            }
            let mut child_total = 0;
            for c in &node.children {
                let Some(child) = self.nodes.get(c) else {
                    return bad(format!("node {} lists missing child {c}", node.id));
                };
                if child.parent != Some(node.id) {
                    return bad(format!("child {c} does not point back to {}", node.id));
                }
                if child.birth_eps != node.death_eps {
                    return bad(format!("child {c} is not born at its parent's split"));
                }
                child_total += child.size;
            }
            // Only leaves that survive down to ε = 0 may keep points at death.
            let settled = if node.children.is_empty() && node.death_eps == 0.0 {
                shed <= node.size
            } else {
                child_total + shed == node.size
            };
            if !settled {
                return bad(format!("node {} loses track of members", node.id));
            }
            if self.has_members {
                if node.members.len() != node.size {
                    return bad(format!("node {} size disagrees with members", node.id));
                }
                for pair in node.children.windows(2) {
                    let (a, b) = (&self.nodes[&pair[0]].members, &self.nodes[&pair[1]].members);
                    if sorted_overlap(a, b) {
                        return bad(format!("siblings {} and {} overlap", pair[0], pair[1]));
                    }
                }
            }
        }
        Ok(())
    }

    /// Every node holding at least `min_match_size` points, ordered by id.
    pub fn clusters_for_matching(&self, min_match_size: usize) -> Vec<Cluster> {
        self.nodes
            .values()
            .filter(|node| node.size >= min_match_size)
            .map(|node| Cluster {
                id: node.id,
                members: node.members.clone(),
            })
            .collect()
    }

    /// Keeps the root and every node with more than `threshold` points.
    /// Dropped children are shed from their parent at the split.
    pub fn prune_for_display(&self, threshold: usize) -> ClusterHierarchy {
        let mut nodes = BTreeMap::new();
        for node in self.nodes.values() {
            if node.id != self.root && node.size <= threshold {
                continue;
            }
            // Removing a node removes its whole subtree, so a kept node's
            // parent is always kept too.
            let mut kept = node.clone();
            let mut dropped = 0;
            kept.children.retain(|c| {
                let keep = self.nodes[c].size > threshold;
                if !keep {
                    dropped += self.nodes[c].size;
                }
                keep
            });
            if dropped > 0 {
                kept.push_shed(kept.death_eps, dropped);
            }
            nodes.insert(kept.id, kept);
        }
        ClusterHierarchy {
            n: self.n,
            min_cluster_size: self.min_cluster_size,
            root: self.root,
            nodes,
            has_members: self.has_members,
        }
    }

    pub fn to_json(&self, emit_members: bool) -> Result<String, HierarchyError> {
        let doc = HierarchyDoc {
            n: self.n,
            min_cluster_size: self.min_cluster_size,
            nodes: self
                .nodes
                .values()
                .map(|node| NodeRecord {
                    id: node.id,
                    parent: node.parent,
                    children: node.children.clone(),
                    birth_eps: node.birth_eps.is_finite().then_some(node.birth_eps),
                    death_eps: node.death_eps,
                    size: node.size,
                    shed: node.shed.clone(),
                    members: (emit_members && self.has_members).then(|| node.members.clone()),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self, HierarchyError> {
        let doc: HierarchyDoc = serde_json::from_str(text)?;
        let has_members = doc.nodes.iter().all(|r| r.members.is_some());
        let mut nodes = BTreeMap::new();
        let mut root = None;
        for r in doc.nodes {
            if r.parent.is_none() {
                if root.is_some() {
                    return Err(HierarchyError::Malformed("more than one root".into()));
                }
                root = Some(r.id);
            }
            let node = ClusterNode {
                id: r.id,
                parent: r.parent,
                children: r.children,
                birth_eps: r.birth_eps.unwrap_or(f64::INFINITY),
                death_eps: r.death_eps,
                size: r.size,
                members: if has_members { r.members.unwrap_or_default() } else { Vec::new() },
                shed: r.shed,
            };
            if nodes.insert(node.id, node).is_some() {
                return Err(HierarchyError::Malformed(format!("duplicate node id {}", r.id)));
            }
        }
        let h = ClusterHierarchy {
            n: doc.n,
            min_cluster_size: doc.min_cluster_size,
            root: root.ok_or_else(|| HierarchyError::Malformed("no root".into()))?,
            nodes,
            has_members,
        };
        h.check_invariants()?;
        Ok(h)
    }
}

fn sorted_overlap(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

#[derive(Serialize, Deserialize)]
struct HierarchyDoc {
    n: usize,
    min_cluster_size: usize,
    nodes: Vec<NodeRecord>,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: usize,
    parent: Option<usize>,
    children: Vec<usize>,
    /// `null` for the root, whose birth radius is unbounded.
    birth_eps: Option<f64>,
    death_eps: f64,
    size: usize,
    #[serde(default)]
    shed: Vec<Shed>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    members: Option<Vec<usize>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding_io::EmbeddingSet;
    use crate::metric::pairwise_distance;
    use crate::mst::{build_mst, mst_to_linkage, Merge};

    fn linkage(points: &[f64]) -> LinkageTree {
        let ids = (0..points.len()).map(|i| format!("p{i}")).collect();
        let set = EmbeddingSet::new(ids, points.to_vec(), 1).unwrap();
        mst_to_linkage(&build_mst(&pairwise_distance(&set).unwrap()).unwrap())
    }

    #[test]
    fn three_points_full_tree() {
        let h = build_hierarchy(&linkage(&[0.0, 1.0, 3.0]), 1).unwrap();
        h.check_invariants().unwrap();
        assert_eq!(h.len(), 5);
        let root = h.node(0).unwrap();
        assert_eq!(root.birth_eps, f64::INFINITY);
        assert_eq!(root.death_eps, 2.0);
        assert_eq!(root.members, vec![0, 1, 2]);
        let pair = h.node(root.children[0]).unwrap();
        assert_eq!((pair.members.clone(), pair.birth_eps, pair.death_eps), (vec![0, 1], 2.0, 1.0));
        let lone = h.node(root.children[1]).unwrap();
        assert_eq!((lone.members.clone(), lone.birth_eps, lone.death_eps), (vec![2], 2.0, 0.0));
    }

    #[test]
    fn three_points_min_size_two() {
        let h = build_hierarchy(&linkage(&[0.0, 1.0, 3.0]), 2).unwrap();
        h.check_invariants().unwrap();
        assert_eq!(h.len(), 1);
        let root = h.node(0).unwrap();
        assert_eq!(root.members, vec![0, 1, 2]);
        assert_eq!(root.death_eps, 1.0);
        assert_eq!(root.shed, vec![Shed { eps: 2.0, count: 1 }, Shed { eps: 1.0, count: 2 }]);
        assert_eq!(root.width_steps(), vec![(f64::INFINITY, 3), (2.0, 2), (1.0, 0)]);
    }

    #[test]
    fn full_tree_has_two_n_minus_one_nodes() {
        let points: Vec<f64> = (0..17).map(|i| ((i * 37) % 23) as f64 * 0.7).collect();
        let h = build_hierarchy(&linkage(&points), 1).unwrap();
        assert_eq!(h.len(), 2 * 17 - 1);
        h.check_invariants().unwrap();
    }

    #[test]
    fn min_cluster_size_bounds() {
        let link = linkage(&[0.0, 1.0]);
        assert!(build_hierarchy(&link, 0).is_err());
        assert!(build_hierarchy(&link, 3).is_err());
        assert!(build_hierarchy(&link, 2).is_ok());
    }

    #[test]
    fn single_point_hierarchy() {
        let h = build_hierarchy(&linkage(&[1.0]), 1).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.node(0).unwrap().members, vec![0]);
    }

    #[test]
    fn matching_clusters() {
        let h = build_hierarchy(&linkage(&[0.0, 1.0, 3.0]), 1).unwrap();
        let k = h.clusters_for_matching(2);
        assert_eq!(k.iter().map(|c| c.members.clone()).collect::<Vec<_>>(), vec![vec![0, 1, 2], vec![0, 1]]);
        assert_eq!(h.clusters_for_matching(3).len(), 1);
        let two = build_hierarchy(&linkage(&[0.0, 4.0]), 1).unwrap();
        assert_eq!(two.clusters_for_matching(2).len(), 1);
    }

    /// Hand-built linkage: ((0,1),(2,3)) at 1 and 2, (4,5) at 1.5, join at 10.
    /// Sizes: root 6, left 4 with children of 2 and 2, right 2.
    fn three_level() -> ClusterHierarchy {
        let link = LinkageTree {
            n: 6,
            merges: vec![
                Merge { left: 0, right: 1, height: 1.0, size: 2 },
                Merge { left: 2, right: 3, height: 1.0, size: 2 },
                Merge { left: 4, right: 5, height: 1.5, size: 2 },
                Merge { left: 6, right: 7, height: 2.0, size: 4 },
                Merge { left: 9, right: 8, height: 10.0, size: 6 },
            ],
        };
        build_hierarchy(&link, 2).unwrap()
    }

    #[test]
    fn prune_counts() {
        let h = three_level();
        h.check_invariants().unwrap();
        let sizes: Vec<usize> = h.nodes.values().map(|n| n.size).collect();
        assert_eq!(sizes, vec![6, 4, 2, 2, 2]);
        assert_eq!(h.prune_for_display(0), h);
        let p = h.prune_for_display(2);
        assert_eq!(p.nodes.keys().copied().collect::<Vec<_>>(), vec![0, 1]);
        p.check_invariants().unwrap();
        assert_eq!(p.node(0).unwrap().shed, vec![Shed { eps: 10.0, count: 2 }]);
        assert_eq!(p.node(1).unwrap().width_steps(), vec![(10.0, 4), (2.0, 0)]);
        let r = h.prune_for_display(6);
        assert_eq!(r.len(), 1);
        r.check_invariants().unwrap();
    }

    #[test]
    fn json_round_trip() {
        let h = three_level();
        let with = ClusterHierarchy::from_json(&h.to_json(true).unwrap()).unwrap();
        assert_eq!(with, h);
        let text = h.to_json(false).unwrap();
        assert!(!text.contains("members"));
        let without = ClusterHierarchy::from_json(&text).unwrap();
        assert!(!without.has_members());
        assert_eq!(without.to_json(false).unwrap(), text);
        assert!(text.contains("\"birth_eps\": null"));
    }

    #[test]
    fn malformed_json_is_rejected() {
        let h = three_level();
        let text = h.to_json(false).unwrap().replace("\"size\": 4", "\"size\": 5");
        assert!(ClusterHierarchy::from_json(&text).is_err());
    }
}
