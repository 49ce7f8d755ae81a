//! Cluster–class matching: pair scores, the overall matching degree of a
//! clustering against one category, conjunctive classes, and the greedy
//! hierarchical matcher.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding_io::{ClassDivision, DivisionKind};
use crate::hierarchy::Cluster;

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("empty member set")]
    EmptySet,
    #[error("no class divisions supplied")]
    NoClasses,
    #[error("no clusters supplied")]
    NoClusters,
    #[error("both division lists come from category {0:?}")]
    SameCategory(String),
    #[error("every intersection is empty; the divisions look like one category")]
    AllEmpty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Harmonic mean of precision and recall.
    F,
    /// Minimum of precision and recall.
    L,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::F => "f",
            Metric::L => "l",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f" => Ok(Metric::F),
            "l" => Ok(Metric::L),
            other => Err(format!("unknown metric {other:?}; expected f or l")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitingFactor {
    Precision,
    Recall,
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScore {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub l_score: f64,
    pub limiting_factor: LimitingFactor,
}

impl PairScore {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::F => self.f_score,
            Metric::L => self.l_score,
        }
    }

    /// Scores a pair from the three counts `|c|`, `|k|` and `|c ∩ k|`.
    pub fn from_counts(class_size: usize, cluster_size: usize, overlap: usize) -> Self {
        let (c, k, i) = (class_size as f64, cluster_size as f64, overlap as f64);
        let precision = i / k;
        let recall = i / c;
        let limiting_factor = match cluster_size.cmp(&class_size) {
            _ if overlap == 0 => LimitingFactor::Balanced,
            // A larger cluster dilutes precision.
            Ordering::Greater => LimitingFactor::Precision,
            Ordering::Less => LimitingFactor::Recall,
            Ordering::Equal => LimitingFactor::Balanced,
        };
        Self {
            precision,
            recall,
            f_score: 2.0 * i / (c + k),
            l_score: precision.min(recall),
            limiting_factor,
        }
    }
}

/// Size of the intersection of two sorted index lists.
pub fn overlap(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Precision is measured against the cluster, recall against the class.
pub fn pair_score(class: &[usize], cluster: &[usize]) -> Result<PairScore, MatchError> {
    if class.is_empty() || cluster.is_empty() {
        return Err(MatchError::EmptySet);
    }
    Ok(PairScore::from_counts(class.len(), cluster.len(), overlap(class, cluster)))
}

/// Dense `|classes| × |clusters|` intersection counts.
///
/// Each point touches only the few classes containing it, so counting per
/// cluster member is far cheaper than pairwise set intersection.
fn overlap_table(classes: &[ClassDivision], clusters: &[Cluster]) -> Vec<Vec<usize>> {
    let n = classes
        .iter()
        .flat_map(|c| c.members.last())
        .chain(clusters.iter().flat_map(|k| k.members.last()))
        .max()
        .map_or(0, |m| m + 1);
    let mut classes_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ci, c) in classes.iter().enumerate() {
        for &p in &c.members {
            classes_of[p].push(ci);
        }
    }
    let mut table = vec![vec![0usize; clusters.len()]; classes.len()];
    let mut counts = vec![0usize; classes.len()];
    for (kj, k) in clusters.iter().enumerate() {
        counts.iter_mut().for_each(|c| *c = 0);
        for &p in &k.members {
            for &ci in &classes_of[p] {
                counts[ci] += 1;
            }
        }
        for (ci, &count) in counts.iter().enumerate() {
            table[ci][kj] = count;
        }
    }
    table
}

/// Best cluster for one class: highest score, lowest cluster id on ties.
fn best_cluster(
    class: &ClassDivision,
    overlaps: &[usize],
    clusters: &[Cluster],
    metric: Metric,
) -> (usize, PairScore) {
    let mut best: Option<(usize, PairScore)> = None;
    for (kj, k) in clusters.iter().enumerate() {
        let s = PairScore::from_counts(class.len(), k.members.len(), overlaps[kj]);
        let better = match best {
            None => true,
            Some((bj, b)) => match s.get(metric).total_cmp(&b.get(metric)) {
                Ordering::Greater => true,
                Ordering::Equal => k.id < clusters[bj].id,
                Ordering::Less => false,
            },
        };
        if better {
            best = Some((kj, s));
        }
    }
    best.expect("clusters are non-empty")
}

/// Size-weighted average over classes of each class's best score.
///
/// Weights use the total size of `classes`, which equals the point count
/// when the divisions partition the point set.
pub fn ccm_overall(classes: &[ClassDivision], clusters: &[Cluster], metric: Metric) -> Result<f64, MatchError> {
    if classes.is_empty() {
        return Err(MatchError::NoClasses);
    }
    if clusters.is_empty() {
        return Err(MatchError::NoClusters);
    }
    if classes.iter().any(|c| c.is_empty()) || clusters.iter().any(|k| k.members.is_empty()) {
        return Err(MatchError::EmptySet);
    }
    let table = overlap_table(classes, clusters);
    let total: usize = classes.iter().map(ClassDivision::len).sum();
    // Summing size-weighted scores before the single division keeps a
    // perfect match at exactly 1.0.
    let weighted: f64 = classes
        .iter()
        .zip(&table)
        .map(|(c, row)| c.len() as f64 * best_cluster(c, row, clusters, metric).1.get(metric))
        .sum();
    Ok(weighted / total as f64)
}

/// All non-empty intersections `a ∩ b`, named `a&b` and ordered by name.
pub fn conjunctive_divisions(
    a: &[ClassDivision],
    b: &[ClassDivision],
) -> Result<Vec<ClassDivision>, MatchError> {
    let (Some(fa), Some(fb)) = (a.first(), b.first()) else {
        return Err(MatchError::NoClasses);
    };
    if fa.category == fb.category {
        return Err(MatchError::SameCategory(fa.category.clone()));
    }
    let category = format!("{}&{}", fa.category, fb.category);
    let mut out = Vec::new();
    for ca in a {
        for cb in b {
            let members = intersect(&ca.members, &cb.members);
            if !members.is_empty() {
                out.push(ClassDivision {
                    name: format!("{}&{}", ca.name, cb.name),
                    category: category.clone(),
                    kind: DivisionKind::Conjunctive,
                    members,
                });
            }
        }
    }
    if out.is_empty() {
        return Err(MatchError::AllEmpty);
    }
    out.sort_by(|x, y| x.name.cmp(&y.name));
    Ok(out)
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j, mut out) = (0, 0, Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub rank: usize,
    pub class: String,
    pub kind: DivisionKind,
    pub class_size: usize,
    pub cluster_id: usize,
    pub score: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub l_score: f64,
    pub limiting_factor: LimitingFactor,
    /// Set when an earlier pair already claimed this cluster.
    pub reused_cluster: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub metric: Metric,
    /// Point count of the hierarchy the clusters came from.
    pub n: usize,
    pub individual_classes: usize,
    pub conjunctive_classes: usize,
    pub pairs: Vec<MatchPair>,
}

impl MatchReport {
    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Greedy matcher: each round picks the best (class, cluster) pair among the
/// remaining classes and all clusters, then retires the class. Clusters are
/// never retired.
///
/// Ties go to the larger class, then the smaller class name, then the
/// smaller cluster id.
pub fn hccm_match(
    pool: &[ClassDivision],
    clusters: &[Cluster],
    metric: Metric,
    n: usize,
) -> Result<MatchReport, MatchError> {
    if pool.is_empty() {
        return Err(MatchError::NoClasses);
    }
    if clusters.is_empty() {
        return Err(MatchError::NoClusters);
    }
    if pool.iter().any(|c| c.is_empty()) || clusters.iter().any(|k| k.members.is_empty()) {
        return Err(MatchError::EmptySet);
    }
    let table = overlap_table(pool, clusters);
    // The best cluster of a class never changes because clusters are not consumed.
    let best: Vec<(usize, PairScore)> = pool
        .iter()
        .zip(&table)
        .map(|(c, row)| best_cluster(c, row, clusters, metric))
        .collect();

    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let mut used = vec![false; clusters.len()];
    let mut pairs = Vec::with_capacity(pool.len());
    while !remaining.is_empty() {
        let (pos, &ci) = remaining
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| {
                let (sa, sb) = (best[a].1.get(metric), best[b].1.get(metric));
                sb.total_cmp(&sa)
                    .then(pool[b].len().cmp(&pool[a].len()))
                    .then(pool[a].name.cmp(&pool[b].name))
                    .then(clusters[best[a].0].id.cmp(&clusters[best[b].0].id))
            })
            .expect("remaining is non-empty");
        remaining.remove(pos);
        let (kj, s) = best[ci];
        pairs.push(MatchPair {
            rank: pairs.len() + 1,
            class: pool[ci].name.clone(),
            kind: pool[ci].kind,
            class_size: pool[ci].len(),
            cluster_id: clusters[kj].id,
            score: s.get(metric),
            precision: s.precision,
            recall: s.recall,
            f_score: s.f_score,
            l_score: s.l_score,
            limiting_factor: s.limiting_factor,
            reused_cluster: used[kj],
        });
        used[kj] = true;
    }
    Ok(MatchReport {
        metric,
        n,
        individual_classes: pool.iter().filter(|c| c.kind == DivisionKind::Individual).count(),
        conjunctive_classes: pool.iter().filter(|c| c.kind == DivisionKind::Conjunctive).count(),
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn div(name: &str, category: &str, members: &[usize]) -> ClassDivision {
        ClassDivision {
            name: name.into(),
            category: category.into(),
            kind: DivisionKind::Individual,
            members: members.to_vec(),
        }
    }

    fn clusters(sets: &[&[usize]]) -> Vec<Cluster> {
        sets.iter()
            .enumerate()
            .map(|(id, m)| Cluster { id, members: m.to_vec() })
            .collect()
    }

    #[test]
    fn precision_recall_example() {
        // |c| = 8100, |k| = 7300, |c ∩ k| = 5913 gives p = 0.81 and r = 0.73.
        let s = PairScore::from_counts(8100, 7300, 5913);
        assert!((s.precision - 0.81).abs() < 1e-12);
        assert!((s.recall - 0.73).abs() < 1e-12);
        assert_eq!(s.l_score, s.recall);
        assert_eq!(s.limiting_factor, LimitingFactor::Recall);
        let harmonic = 2.0 * 0.81 * 0.73 / (0.81 + 0.73);
        assert!((s.f_score - harmonic).abs() < 1e-12);
        assert!((s.f_score - 0.768).abs() < 5e-4);
    }

    #[test]
    fn identity_and_disjoint_pairs() {
        let s = pair_score(&[1, 2, 3], &[1, 2, 3]).unwrap();
        assert_eq!((s.precision, s.recall, s.f_score, s.l_score), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(s.limiting_factor, LimitingFactor::Balanced);
        let s = pair_score(&[1, 2], &[3, 4, 5]).unwrap();
        assert_eq!((s.precision, s.recall, s.f_score, s.l_score), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(pair_score(&[], &[1]), Err(MatchError::EmptySet));
    }

    #[test]
    fn precision_limited_pair() {
        let s = pair_score(&[0, 1], &[0, 1, 2, 3]).unwrap();
        assert_eq!((s.precision, s.recall), (0.5, 1.0));
        assert_eq!(s.limiting_factor, LimitingFactor::Precision);
        assert_eq!(s.l_score, 0.5);
    }

    #[test]
    fn ccm_perfect_and_hand_values() {
        let classes = vec![div("a", "g", &[0, 1, 2]), div("b", "g", &[3, 4, 5])];
        let exact = clusters(&[&[0, 1, 2, 3, 4, 5], &[0, 1, 2], &[3, 4, 5]]);
        assert_eq!(ccm_overall(&classes, &exact, Metric::F).unwrap(), 1.0);
        assert_eq!(ccm_overall(&classes, &exact, Metric::L).unwrap(), 1.0);

        let all = clusters(&[&[0, 1, 2, 3, 4, 5]]);
        let f = ccm_overall(&classes, &all, Metric::F).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ccm_overall(&classes, &all, Metric::L).unwrap(), 0.5);

        assert_eq!(ccm_overall(&[], &all, Metric::F), Err(MatchError::NoClasses));
        assert_eq!(ccm_overall(&classes, &[], Metric::F), Err(MatchError::NoClusters));
    }

    #[test]
    fn conjunctive_example() {
        let genders = vec![div("F", "gender", &[2, 3]), div("M", "gender", &[0, 1])];
        let nations = vec![div("UK", "nation", &[0, 2]), div("US", "nation", &[1, 3])];
        let conj = conjunctive_divisions(&genders, &nations).unwrap();
        let got: Vec<(&str, Vec<usize>)> = conj.iter().map(|c| (c.name.as_str(), c.members.clone())).collect();
        assert_eq!(
            got,
            vec![("F&UK", vec![2]), ("F&US", vec![3]), ("M&UK", vec![0]), ("M&US", vec![1])]
        );
        assert!(conj.iter().all(|c| c.kind == DivisionKind::Conjunctive && c.category == "gender&nation"));
    }

    #[test]
    fn conjunctive_rejects_one_category() {
        let genders = vec![div("F", "gender", &[2, 3]), div("M", "gender", &[0, 1])];
        assert_eq!(
            conjunctive_divisions(&genders, &genders),
            Err(MatchError::SameCategory("gender".into()))
        );
        // Mislabelled categories still fail because nothing intersects.
        let other: Vec<_> = genders.iter().map(|d| div(&d.name, "x", &[])).collect();
        assert_eq!(conjunctive_divisions(&genders, &other), Err(MatchError::AllEmpty));
    }

    #[test]
    fn identity_matching() {
        let k = clusters(&[&[0, 1], &[2, 3], &[0, 1, 2, 3]]);
        let pool: Vec<_> = k
            .iter()
            .map(|c| div(&format!("c{}", c.id), "g", &c.members))
            .collect();
        let r = hccm_match(&pool, &k, Metric::L, 4).unwrap();
        assert_eq!(r.pairs.len(), 3);
        assert!(r.pairs.iter().all(|p| p.score == 1.0));
        // Larger class first on ties.
        assert_eq!(r.pairs[0].class, "c2");
    }

    #[test]
    fn shared_best_cluster_is_reused() {
        let k = clusters(&[&[0, 1, 2, 3], &[4, 5]]);
        let pool = vec![div("x", "a", &[0, 1, 2]), div("y", "b", &[0, 1, 2, 3])];
        let r = hccm_match(&pool, &k, Metric::F, 6).unwrap();
        assert_eq!(r.pairs[0].cluster_id, 0);
        assert_eq!(r.pairs[1].cluster_id, 0);
        assert!(!r.pairs[0].reused_cluster);
        assert!(r.pairs[1].reused_cluster);
    }

    #[test]
    fn report_json_round_trip() {
        let k = clusters(&[&[0, 1, 2, 3], &[4, 5]]);
        let pool = vec![div("x", "a", &[0, 1, 2]), div("y", "b", &[4, 5])];
        let r = hccm_match(&pool, &k, Metric::L, 6).unwrap();
        let text = r.to_json().unwrap();
        assert!(text.contains("\"metric\": \"l\""));
        assert!(text.contains("\"limiting_factor\": \"precision\""));
        let back = MatchReport::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json().unwrap(), text);
    }
}
