mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use hccm::hierarchy::Cluster;
use hccm::pipeline::cluster;
use hccm::*;
use rand::seq::SliceRandom;
use rand::Rng;

#[test]
fn hierarchy_flattening_matches_flat_cut() {
    // With min_cluster_size 1 nothing is shed, so the nodes alive at a radius
    // are exactly the MST components there, minus isolated non-core points.
    for seed in 0..5 {
        let set = random_set(60, 3, seed);
        let run = cluster(&set, 4, 1).unwrap();
        let mut rng = rng(seed + 7);
        for _ in 0..8 {
            let eps = rng.random_range(0.05..6.0);
            let (expected, _) = partition_sets(&flat_cut(&run.mst, &run.core, eps).unwrap());
            let got: BTreeSet<BTreeSet<usize>> = run
                .hierarchy
                .nodes
                .values()
                .filter(|node| node.death_eps <= eps && eps < node.birth_eps)
                .filter(|node| !(node.size == 1 && run.core.values[node.members[0]] > eps))
                .map(|node| {
                    assert!(node.shed.is_empty());
                    node.members.iter().copied().collect()
                })
                .collect();
            assert_eq!(got, expected, "seed {seed} eps {eps}");
        }
    }
}

#[test]
fn heights_scale_with_the_embeddings() {
    let set = random_set(40, 4, 3);
    let a = cluster(&set, 3, 1).unwrap();
    let b = cluster(&set.scaled(4.0), 3, 1).unwrap();
    assert_eq!(a.linkage.merges.len(), b.linkage.merges.len());
    for (x, y) in a.linkage.merges.iter().zip(&b.linkage.merges) {
        assert_eq!((x.left, x.right, x.size), (y.left, y.right, y.size));
        assert_eq!(x.height * 4.0, y.height);
    }
}

#[test]
fn row_order_does_not_change_the_clustering() {
    let set = random_set(50, 2, 9);
    let mut order: Vec<usize> = (0..50).collect();
    order.shuffle(&mut rng(1));
    let ids: Vec<String> = order.iter().map(|&i| set.ids()[i].clone()).collect();
    let data: Vec<f64> = order.iter().flat_map(|&i| set.row(i).to_vec()).collect();
    let shuffled = EmbeddingSet::new(ids, data, 2).unwrap();
    let a = cluster(&set, 0, 1).unwrap();
    let b = cluster(&shuffled, 0, 1).unwrap();
    let heights = |r: &hccm::pipeline::ClusterRun| r.linkage.merges.iter().map(|m| m.height).collect::<Vec<_>>();
    assert_eq!(heights(&a), heights(&b));
    let by_id = |s: &EmbeddingSet, p: &FlatPartition| -> BTreeSet<BTreeSet<String>> {
        p.clusters()
            .into_iter()
            .map(|c| c.into_iter().map(|i| s.ids()[i].clone()).collect())
            .collect()
    };
    let zeros = CoreDistances::zeros(50);
    let h = heights(&a)[30];
    assert_eq!(
        by_id(&set, &flat_cut(&a.mst, &zeros, h).unwrap()),
        by_id(&shuffled, &flat_cut(&b.mst, &zeros, h).unwrap())
    );
}

#[test]
fn label_permutation_keeps_scores() {
    // Renaming classes permutes the divisions but not their matching degrees.
    let set = random_set(30, 2, 4);
    let run = cluster(&set, 0, 1).unwrap();
    let clusters = run.hierarchy.clusters_for_matching(2);
    let names = ["red", "green", "blue"];
    let renamed = ["zeta", "alpha", "mid"];
    let table = |names: &[&str]| {
        let entries = set
            .ids()
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), vec![names[i % 3].to_string()]))
            .collect();
        LabelTable::new(vec!["colour".into()], entries).unwrap()
    };
    let a = divisions_from_labels(&table(&names), &set, "colour").unwrap();
    let b = divisions_from_labels(&table(&renamed), &set, "colour").unwrap();
    for metric in [Metric::F, Metric::L] {
        assert_eq!(
            ccm_overall(&a, &clusters, metric).unwrap(),
            ccm_overall(&b, &clusters, metric).unwrap()
        );
        let score_of = |divs: &[ClassDivision], map: &[&str]| -> BTreeMap<usize, f64> {
            let r = hccm_match(divs, &clusters, metric, set.len()).unwrap();
            r.pairs
                .iter()
                .map(|p| (map.iter().position(|n| *n == p.class).unwrap(), p.score))
                .collect()
        };
        assert_eq!(score_of(&a, &names), score_of(&b, &renamed));
    }
}

#[test]
fn cluster_order_does_not_change_matching() {
    let mut rng = rng(5);
    for _ in 0..20 {
        let n = 30;
        let classes: Vec<ClassDivision> = (0..5)
            .map(|i| ClassDivision {
                name: format!("c{i}"),
                category: "x".into(),
                kind: DivisionKind::Individual,
                members: {
                    let mut m: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
                    if m.is_empty() {
                        m.push(i);
                    }
                    m
                },
            })
            .collect();
        let mut clusters: Vec<Cluster> = (0..8)
            .map(|id| Cluster {
                id,
                members: (0..n).filter(|_| rng.random_bool(0.4)).chain([id]).collect::<BTreeSet<_>>().into_iter().collect(),
            })
            .collect();
        let a = hccm_match(&classes, &clusters, Metric::L, n).unwrap();
        clusters.shuffle(&mut rng);
        let b = hccm_match(&classes, &clusters, Metric::L, n).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn class_sizes_sum_to_the_point_count() {
    // 40 speakers, 2 genders, 12 nationalities over 1000 points.
    let n = 1000;
    let ids: Vec<String> = (0..n).map(|i| format!("u{i}")).collect();
    let set = EmbeddingSet::new(ids.clone(), vec![0.0; n], 1).unwrap();
    let entries = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let speaker = i % 40;
            (
                id.clone(),
                vec![format!("spk{speaker:02}"), format!("g{}", speaker % 2), format!("nat{}", speaker % 12)],
            )
        })
        .collect();
    let labels = LabelTable::new(vec!["identity".into(), "gender".into(), "nationality".into()], entries).unwrap();
    let mut total = 0;
    for (cat, count) in [("identity", 40), ("gender", 2), ("nationality", 12)] {
        let divs = divisions_from_labels(&labels, &set, cat).unwrap();
        assert_eq!(divs.len(), count);
        assert_eq!(divs.iter().map(|d| d.len()).sum::<usize>(), n);
        total += divs.len();
    }
    assert_eq!(total, 54);
}

#[test]
fn synthetic_top_split_separates_genders() {
    let (set, labels) = generate(&SynthConfig { points_per_identity: 6, ..SynthConfig::default() }).unwrap();
    let run = cluster(&set, 0, 1).unwrap();
    let root = run.hierarchy.node(run.hierarchy.root).unwrap();
    assert_eq!(root.children.len(), 2);
    for child in &root.children {
        let node = run.hierarchy.node(*child).unwrap();
        let genders: BTreeSet<&str> = node
            .members
            .iter()
            .map(|&i| labels.label(&set.ids()[i], "gender").unwrap())
            .collect();
        assert_eq!(genders.len(), 1);
        assert_eq!(node.size, set.len() / 2);
    }
}

#[test]
fn hierarchy_json_round_trips_through_render() {
    let (set, labels) = generate(&SynthConfig { points_per_identity: 4, ..SynthConfig::default() }).unwrap();
    let run = cluster(&set, 2, 1).unwrap();
    let text = run.hierarchy.to_json(false).unwrap();
    let back = ClusterHierarchy::from_json(&text).unwrap();
    let pool = hccm::pipeline::interpretation_pool(&set, &labels, &hccm::pipeline::Conjunctions::All).unwrap();
    let report = hccm::pipeline::interpret(&pool, &run, Metric::L, 2).unwrap();
    let spec = RenderSpec { display_size_threshold: 3, ..RenderSpec::default() };
    assert_eq!(
        render_svg(&run.hierarchy, &report, &spec).unwrap(),
        render_svg(&back, &report, &spec).unwrap()
    );
}
