mod common;

use common::*;
use graph_calib::graph::{
    agree_disagree_split, homophily_ratio, k_index, test_edge_subset, Graph, Labels, NodePartition,
};
use graph_calib::marginals::{
    edge_predictions, mean_field_edge_marginals, node_predictions, NodeMarginals, ValidationMode,
};
use graph_calib::metrics::{
    accuracy_edgewise, ece, edgewise_ece, full_report, nll_edgewise, nodewise_ece,
};
use graph_calib::synth::{
    gen_graph, gen_mask, gen_predictions, GraphKind, MiscalibrationSpec, SynthSpec,
};
use proptest::prelude::*;

#[test]
fn sbm_test_edges_match_brute_force_filter() {
    let mut spec = SynthSpec::new(GraphKind::Sbm, 600, 4, 21);
    spec.density = 6.0;
    let (g, labels) = gen_graph(&spec).unwrap();
    let mask = gen_mask(600, 0.85, 21).unwrap();
    let s = test_edge_subset(&g, &mask).unwrap();
    let brute = brute_test_edges(&g, mask.mask());
    assert_eq!(s.edges(), brute.as_slice());

    let (a, d) = agree_disagree_split(&s, &labels).unwrap();
    let brute_agree = brute
        .iter()
        .filter(|&&(i, j)| labels.get(i) == labels.get(j))
        .count();
    assert_eq!(a.len(), brute_agree);
    assert_eq!(d.len(), brute.len() - brute_agree);

    let h = homophily_ratio(&s, &labels).unwrap();
    assert_eq!(h, brute_agree as f64 / brute.len() as f64);
    assert_eq!(h + d.len() as f64 / s.len() as f64, 1.0);

    for sub in [&s, &a, &d] {
        let k = k_index(sub, &mask).unwrap();
        assert_eq!(k, incidence_k(sub.edges(), mask.mask()));
        assert!((0.0..=1.0).contains(&k));
    }
}

#[test]
fn sbm_realized_homophily_tracks_target() {
    for (h, seed) in [(0.8, 1u64), (0.5, 2), (0.2, 3)] {
        let mut spec = SynthSpec::new(GraphKind::Sbm, 2000, 3, seed);
        spec.homophily = h;
        let (g, labels) = gen_graph(&spec).unwrap();
        let all = test_edge_subset(&g, &NodePartition::all_test(2000)).unwrap();
        let realized = homophily_ratio(&all, &labels).unwrap();
        assert!(
            (realized - h).abs() < 0.05,
            "target {h}, realized {realized}"
        );
    }
}

#[test]
fn softened_sbm_predictions_match_naive_ece() {
    let spec = SynthSpec::new(GraphKind::Sbm, 2000, 3, 5);
    let (g, labels) = gen_graph(&spec).unwrap();
    let mask = gen_mask(2000, 0.85, 5).unwrap();
    let nm = gen_predictions(&labels, &MiscalibrationSpec::new(2.0, 0.1, 5)).unwrap();
    let probs: Vec<Vec<f64>> = nm.rows().map(<[f64]>::to_vec).collect();
    for m in [1, 7, 20] {
        let r = full_report(&g, &labels, &mask, &nm, None, m).unwrap();
        let (c, ok) = node_items(&probs, labels.values(), mask.mask());
        assert!((r.nodewise_ece.unwrap() - naive_ece(&c, &ok, m)).abs() < 1e-12);
        let edges = brute_test_edges(&g, mask.mask());
        let (c, ok) = product_edge_items(&probs, labels.values(), &edges);
        assert!((r.edgewise_ece.unwrap() - naive_ece(&c, &ok, m)).abs() < 1e-12);
        let agree: Vec<_> = edges
            .iter()
            .copied()
            .filter(|&(i, j)| labels.get(i) == labels.get(j))
            .collect();
        let (c, ok) = product_edge_items(&probs, labels.values(), &agree);
        assert!((r.agree_ece.unwrap() - naive_ece(&c, &ok, m)).abs() < 1e-12);
    }
}

#[test]
fn chain_single_bin_agree_disagree() {
    // one agreeing edge and one disagreeing edge, both with confidence 4/9
    assert!((naive_ece(&[4.0 / 9.0], &[true], 1) - 5.0 / 9.0).abs() < 1e-15);
    assert!((naive_ece(&[4.0 / 9.0], &[false], 1) - 4.0 / 9.0).abs() < 1e-15);
    let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
    let labels = Labels::new(vec![0, 1, 1], 2).unwrap();
    let p = 2.0 / 3.0;
    let nm = NodeMarginals::from_rows(vec![vec![1.0 - p, p]; 3], ValidationMode::Strict).unwrap();
    let r = full_report(&g, &labels, &NodePartition::all_test(3), &nm, None, 1).unwrap();
    assert!((r.agree_ece.unwrap() - 5.0 / 9.0).abs() < 1e-12);
    assert!((r.disagree_ece.unwrap() - 4.0 / 9.0).abs() < 1e-12);
}

fn probs_strategy(n: usize, c: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.001f64..1.0, c), n).prop_map(|rows| {
        rows.into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|x| x / s).collect()
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn reliability_rows_reproduce_ece(
        items in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..200),
        m in 1usize..40,
    ) {
        let (conf, ok): (Vec<f64>, Vec<bool>) = items.into_iter().unzip();
        let t = ece(&conf, &ok, m).unwrap();
        prop_assert_eq!(t.bins.iter().map(|b| b.count).sum::<usize>(), conf.len());
        prop_assert!((t.weighted_gap() - t.ece).abs() < 1e-12);
        prop_assert!((t.ece - naive_ece(&conf, &ok, m)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&t.ece));
    }

    #[test]
    fn product_form_properties(probs in probs_strategy(6, 3)) {
        let g = Graph::new(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)]).unwrap();
        let nm = NodeMarginals::from_rows(probs.clone(), ValidationMode::Strict).unwrap();
        let s = test_edge_subset(&g, &NodePartition::all_test(6)).unwrap();
        let em = mean_field_edge_marginals(&nm, &s).unwrap();
        let np = node_predictions(&nm);
        let ep = edge_predictions(&em);
        for (k, &(i, j)) in s.edges().iter().enumerate() {
            // max of an outer product is the product of maxes
            prop_assert!((ep[k].confidence - np[i].confidence * np[j].confidence).abs() < 1e-15);
            prop_assert_eq!(ep[k].labels, (np[i].label, np[j].label));
            let first = em.first_marginal(k);
            let second = em.second_marginal(k);
            for a in 0..3 {
                prop_assert!((first[a] - probs[i][a]).abs() < 1e-12);
                prop_assert!((second[a] - probs[j][a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn renormalization_is_idempotent(rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 4), 1..20)) {
        let once = NodeMarginals::from_rows(rows, ValidationMode::Renormalize).unwrap();
        let again = NodeMarginals::from_flat(4, once.as_flat().to_vec(), ValidationMode::Renormalize).unwrap();
        prop_assert!(max_abs_diff(once.as_flat(), again.as_flat()) < 1e-15);
        let strict = NodeMarginals::from_flat(4, once.as_flat().to_vec(), ValidationMode::Strict);
        prop_assert!(strict.is_ok());
    }

    #[test]
    fn edge_order_does_not_matter(seed in 0u64..1000) {
        let inst = random_instance(seed, 9, 3, 0.4);
        let mut shuffled = inst.raw_edges.clone();
        shuffled.reverse();
        let flipped: Vec<_> = shuffled.iter().map(|&(a, b)| (b, a)).collect();
        let g2 = Graph::new(9, flipped).unwrap();
        prop_assert_eq!(&g2, &inst.graph);
        let r1 = full_report(&inst.graph, &inst.labels, &inst.partition, &inst.marginals, None, 10).unwrap();
        let r2 = full_report(&g2, &inst.labels, &inst.partition, &inst.marginals, None, 10).unwrap();
        prop_assert_eq!(r1, r2);
    }

    #[test]
    fn metric_ranges(seed in 0u64..1000) {
        let inst = random_instance(seed, 10, 3, 0.35);
        let r = full_report(&inst.graph, &inst.labels, &inst.partition, &inst.marginals, None, 15).unwrap();
        for (name, v) in r.values() {
            if let Some(v) = v {
                prop_assert!(v >= 0.0, "{} = {}", name, v);
                if name.contains("ece") || name.contains("accuracy") || name.starts_with("k_") || name == "homophily" {
                    prop_assert!(v <= 1.0, "{} = {}", name, v);
                }
                if name.contains("brier") {
                    prop_assert!(v <= 2.0, "{} = {}", name, v);
                }
            }
        }
        // recount edgewise accuracy
        let edges = brute_test_edges(&inst.graph, inst.partition.mask());
        if !edges.is_empty() {
            let (_, ok) = product_edge_items(&inst.probs, inst.labels.values(), &edges);
            let acc = ok.iter().filter(|&&b| b).count() as f64 / ok.len() as f64;
            let preds = node_predictions(&inst.marginals);
            let s = test_edge_subset(&inst.graph, &inst.partition).unwrap();
            prop_assert!((accuracy_edgewise(&preds, &inst.labels, &s).unwrap() - acc).abs() < 1e-15);
        }
    }
}

#[test]
fn perfect_forecast_zeroes_everything() {
    let spec = SynthSpec::new(GraphKind::Sbm, 400, 3, 8);
    let (g, labels) = gen_graph(&spec).unwrap();
    let mask = gen_mask(400, 0.85, 8).unwrap();
    let rows: Vec<Vec<f64>> = labels
        .values()
        .iter()
        .map(|&y| (0..3).map(|k| if k == y { 1.0 } else { 0.0 }).collect())
        .collect();
    let nm = NodeMarginals::from_rows(rows, ValidationMode::Strict).unwrap();
    for m in [1, 10, 20] {
        let r = full_report(&g, &labels, &mask, &nm, None, m).unwrap();
        for (name, v) in r.values() {
            let v = v.unwrap();
            if name.contains("ece") || name.contains("nll") || name.contains("brier") {
                assert_eq!(v, 0.0, "{name}");
            }
            if name.contains("accuracy") {
                assert_eq!(v, 1.0, "{name}");
            }
        }
    }
}

#[test]
fn nodewise_and_edgewise_entry_points_agree_with_report() {
    let inst = random_instance(99, 12, 4, 0.3);
    let s = test_edge_subset(&inst.graph, &inst.partition).unwrap();
    let em = mean_field_edge_marginals(&inst.marginals, &s).unwrap();
    let preds = node_predictions(&inst.marginals);
    let r = full_report(
        &inst.graph,
        &inst.labels,
        &inst.partition,
        &inst.marginals,
        None,
        5,
    )
    .unwrap();
    assert_eq!(
        nodewise_ece(&inst.marginals, &inst.labels, &inst.partition, 5)
            .unwrap()
            .ece,
        r.nodewise_ece.unwrap()
    );
    assert_eq!(
        edgewise_ece(&em, &preds, &inst.labels, &s, 5).unwrap().ece,
        r.edgewise_ece.unwrap()
    );
    assert_eq!(
        nll_edgewise(&em, &inst.labels, &s).unwrap(),
        r.edgewise_nll.unwrap()
    );
}
