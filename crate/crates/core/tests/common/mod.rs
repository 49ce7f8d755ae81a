//! Test-only oracles, written independently of the library's algorithms.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use hccm::{EmbeddingSet, FlatPartition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_set(n: usize, dim: usize, seed: u64) -> EmbeddingSet {
    let mut rng = rng(seed);
    let ids = (0..n).map(|i| format!("p{i}")).collect();
    let data = (0..n * dim).map(|_| rng.random_range(0.0..10.0)).collect();
    EmbeddingSet::new(ids, data, dim).unwrap()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Naive agglomerative single linkage: repeatedly merge the two closest
/// clusters, tracking inter-cluster distances as the minimum over members.
/// Returns merge heights in order.
pub fn naive_slink_heights(set: &EmbeddingSet) -> Vec<f64> {
    let n = set.len();
    let mut dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| euclid(set.row(i), set.row(j))).collect())
        .collect();
    let mut alive: Vec<bool> = vec![true; n];
    let mut heights = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for j in (i + 1)..n {
                if alive[j] && dist[i][j] < best.0 {
                    best = (dist[i][j], i, j);
                }
            }
        }
        let (h, a, b) = best;
        heights.push(h);
        alive[b] = false;
        for k in 0..n {
            let m = dist[a][k].min(dist[b][k]);
            dist[a][k] = m;
            dist[k][a] = m;
        }
    }
    heights
}

/// Connected components of the graph joining points closer than or equal to `h`.
pub fn naive_threshold_partition(set: &EmbeddingSet, h: f64) -> BTreeSet<BTreeSet<usize>> {
    let n = set.len();
    let mut label: Vec<usize> = (0..n).collect();
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if euclid(set.row(i), set.row(j)) <= h && label[j] < label[i] {
                    label[i] = label[j];
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut groups: std::collections::BTreeMap<usize, BTreeSet<usize>> = Default::default();
    for (i, l) in label.into_iter().enumerate() {
        groups.entry(l).or_default().insert(i);
    }
    groups.into_values().collect()
}

pub fn partition_sets(p: &FlatPartition) -> (BTreeSet<BTreeSet<usize>>, BTreeSet<usize>) {
    let mut clusters: std::collections::BTreeMap<usize, BTreeSet<usize>> = Default::default();
    let mut noise = BTreeSet::new();
    for (i, a) in p.assignment.iter().enumerate() {
        match a {
            Some(c) => {
                clusters.entry(*c).or_default().insert(i);
            }
            None => {
                noise.insert(i);
            }
        }
    }
    (clusters.into_values().collect(), noise)
}

#[derive(Debug, Clone)]
pub struct OracleClass {
    pub name: String,
    pub members: HashSet<usize>,
}

#[derive(Debug, Clone)]
pub struct OracleCluster {
    pub id: usize,
    pub members: HashSet<usize>,
}

/// `(f, l)` from raw set sizes.
pub fn oracle_scores(c: &HashSet<usize>, k: &HashSet<usize>) -> (f64, f64) {
    let i = c.intersection(k).count() as f64;
    let (cs, ks) = (c.len() as f64, k.len() as f64);
    (2.0 * i / (cs + ks), (i / ks).min(i / cs))
}

/// Step-by-step exhaustive argmax over remaining classes × all clusters.
/// Returns `(class name, cluster id, score)` per rank.
pub fn brute_force_hccm(
    classes: &[OracleClass],
    clusters: &[OracleCluster],
    use_l: bool,
) -> Vec<(String, usize, f64)> {
    let mut remaining: Vec<&OracleClass> = classes.iter().collect();
    let mut out = Vec::new();
    while !remaining.is_empty() {
        let mut best: Option<(usize, usize, f64)> = None;
        for (ri, c) in remaining.iter().enumerate() {
            for (kj, k) in clusters.iter().enumerate() {
                let (f, l) = oracle_scores(&c.members, &k.members);
                let s = if use_l { l } else { f };
                let wins = match best {
                    None => true,
                    Some((bi, bj, bs)) => {
                        let bc = remaining[bi];
                        if s != bs {
                            s > bs
                        } else if c.members.len() != bc.members.len() {
                            c.members.len() > bc.members.len()
                        } else if c.name != bc.name {
                            c.name < bc.name
                        } else {
                            k.id < clusters[bj].id
                        }
                    }
                };
                if wins {
                    best = Some((ri, kj, s));
                }
            }
        }
        let (ri, kj, s) = best.unwrap();
        out.push((remaining[ri].name.clone(), clusters[kj].id, s));
        remaining.remove(ri);
    }
    out
}
