//! Stage functions shared by the command-line subcommands.

use std::fmt::Write as _;

use thiserror::Error;

use crate::embedding_io::{divisions_from_labels, ClassDivision, DivisionKind, EmbeddingSet, IoError, LabelTable};
use crate::hierarchy::{build_hierarchy, ClusterHierarchy, HierarchyError};
use crate::matching::{ccm_overall, conjunctive_divisions, hccm_match, MatchError, MatchReport, Metric};
use crate::metric::{core_distances, mutual_reachability, pairwise_distance, CoreDistances, MetricError};
use crate::mst::{build_mst, mst_to_linkage, LinkageTree, MinimumSpanningTree, MstError};

/// Default sweep: plain single linkage plus the HDBSCAN settings
/// 2, 4, 6, 8, 12, 16, 21 and 27.
pub const DEFAULT_MIN_PTS: [usize; 9] = [0, 2, 4, 6, 8, 12, 16, 21, 27];
pub const DEFAULT_MIN_MATCH_SIZE: usize = 2;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Mst(#[from] MstError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("{0}")]
    Input(String),
}

/// `slink` for `min_pts = 0`, `hdbscan_mpts{k}` otherwise.
pub fn run_tag(min_pts: usize) -> String {
    if min_pts == 0 {
        "slink".to_string()
    } else {
        format!("hdbscan_mpts{min_pts}")
    }
}

#[derive(Debug, Clone)]
pub struct ClusterRun {
    pub min_pts: usize,
    pub core: CoreDistances,
    pub mst: MinimumSpanningTree,
    pub linkage: LinkageTree,
    pub hierarchy: ClusterHierarchy,
}

impl ClusterRun {
    pub fn tag(&self) -> String {
        run_tag(self.min_pts)
    }
}

/// Distances, MST in the mutual-reachability space, merge sequence and
/// condensed hierarchy for one `min_pts`.
pub fn cluster(set: &EmbeddingSet, min_pts: usize, min_cluster_size: usize) -> Result<ClusterRun, PipelineError> {
    let base = pairwise_distance(set)?;
    cluster_from_base(&base, min_pts, min_cluster_size)
}

pub fn cluster_from_base(
    base: &crate::metric::DistanceMatrix,
    min_pts: usize,
    min_cluster_size: usize,
) -> Result<ClusterRun, PipelineError> {
    let core = core_distances(base, min_pts)?;
    let mr = mutual_reachability(base, &core)?;
    let mst = build_mst(&mr)?;
    let linkage = mst_to_linkage(&mst);
    let hierarchy = build_hierarchy(&linkage, min_cluster_size)?;
    Ok(ClusterRun {
        min_pts,
        core,
        mst,
        linkage,
        hierarchy,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcmRow {
    pub min_pts: usize,
    pub category: String,
    pub metric: Metric,
    pub degree: f64,
}

/// One matching degree per (category, metric) for a clustering run.
pub fn evaluate(
    set: &EmbeddingSet,
    labels: &LabelTable,
    run: &ClusterRun,
    categories: &[String],
    metrics: &[Metric],
    min_match_size: usize,
) -> Result<Vec<CcmRow>, PipelineError> {
    let clusters = run.hierarchy.clusters_for_matching(min_match_size);
    let mut rows = Vec::new();
    for category in categories {
        let divisions = divisions_from_labels(labels, set, category)?;
        for &metric in metrics {
            rows.push(CcmRow {
                min_pts: run.min_pts,
                category: category.clone(),
                metric,
                degree: ccm_overall(&divisions, &clusters, metric)?,
            });
        }
    }
    Ok(rows)
}

pub fn ccm_csv(rows: &[CcmRow]) -> String {
    let mut out = String::from("min_pts,algorithm,category,metric,degree\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.min_pts,
            if r.min_pts == 0 { "slink" } else { "hdbscan" },
            r.category,
            r.metric,
            r.degree
        );
    }
    out
}

/// Which category pairs contribute conjunctive classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Conjunctions {
    None,
    /// Every pair of distinct categories, in column order.
    All,
    Pairs(Vec<(String, String)>),
}

impl std::str::FromStr for Conjunctions {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "none" => Ok(Conjunctions::None),
            "all" => Ok(Conjunctions::All),
            list => list
                .split(',')
                .map(|pair| {
                    let (a, b) = pair
                        .split_once(':')
                        .ok_or_else(|| format!("expected `a:b`, got {pair:?}"))?;
                    Ok((a.trim().to_string(), b.trim().to_string()))
                })
                .collect::<Result<_, String>>()
                .map(Conjunctions::Pairs),
        }
    }
}

/// Individual classes of every category followed by the requested
/// conjunctive classes.
///
/// A conjunction equal to one of its two constituents (one class nested in
/// the other, such as a speaker inside their gender) names nothing new and is
/// left out.
pub fn interpretation_pool(
    set: &EmbeddingSet,
    labels: &LabelTable,
    conjunctions: &Conjunctions,
) -> Result<Vec<ClassDivision>, PipelineError> {
    let categories = labels.categories();
    let mut per_category = Vec::with_capacity(categories.len());
    for c in categories {
        per_category.push(divisions_from_labels(labels, set, c)?);
    }
    let mut pool: Vec<ClassDivision> = per_category.iter().flatten().cloned().collect();

    let pairs: Vec<(usize, usize)> = match conjunctions {
        Conjunctions::None => Vec::new(),
        Conjunctions::All => {
            if categories.len() < 2 {
                return Err(PipelineError::Input(format!(
                    "conjunctive classes need at least two label categories, found {}; pass --conjunctions none",
                    categories.len()
                )));
            }
            (0..categories.len())
                .flat_map(|a| ((a + 1)..categories.len()).map(move |b| (a, b)))
                .collect()
        }
        Conjunctions::Pairs(list) => {
            if categories.len() < 2 {
                return Err(PipelineError::Input(
                    "conjunctive classes need at least two label categories".into(),
                ));
            }
            let find = |name: &str| {
                categories
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| PipelineError::Io(IoError::UnknownCategory(name.to_string())))
            };
            list.iter()
                .map(|(a, b)| Ok((find(a)?, find(b)?)))
                .collect::<Result<_, PipelineError>>()?
        }
    };
    for (a, b) in pairs {
        let conj = conjunctive_divisions(&per_category[a], &per_category[b])?;
        // Divisions within a category are disjoint, so matching any of them
        // means matching the constituent itself.
        let redundant = |c: &ClassDivision| {
            per_category[a]
                .iter()
                .chain(&per_category[b])
                .any(|d| d.members == c.members)
        };
        pool.extend(conj.into_iter().filter(|c| !redundant(c)));
    }
    Ok(pool)
}

pub fn interpret(
    pool: &[ClassDivision],
    run: &ClusterRun,
    metric: Metric,
    min_match_size: usize,
) -> Result<MatchReport, PipelineError> {
    let clusters = run.hierarchy.clusters_for_matching(min_match_size);
    Ok(hccm_match(pool, &clusters, metric, run.hierarchy.n)?)
}

pub fn count_kind(pool: &[ClassDivision], kind: DivisionKind) -> usize {
    pool.iter().filter(|c| c.kind == kind).count()
}
