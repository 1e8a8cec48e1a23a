use lili::clustering::{cluster, coleaf_counts, prune_single_group, TraversalOrder};
use lili::data::{generate_synthetic, preprocess, SyntheticSpec};
use lili::estimate::{cluster_diameter, overall_ate};
use lili::forest::{fit_forest, forest_ate};
use lili::tolerance::{tolerance_threshold, ToleranceFn};
use lili::tree::TreeParams;

#[test]
fn constant_effect_end_to_end() {
    let synth = generate_synthetic(&SyntheticSpec::constant(3000, 5, 2.0), 11).unwrap();
    let ds = preprocess(&synth.dataset);
    let k = 30;
    let forest = fit_forest(&ds, k, &TreeParams::with_min_leaf(40), 5).unwrap();
    let counts = coleaf_counts(&forest, &ds).unwrap();
    let threshold = tolerance_threshold(k, &ToleranceFn::Sqrt).unwrap();
    let raw = cluster(&counts, threshold, &TraversalOrder::Row.permutation(ds.n())).unwrap();
    let clustering = prune_single_group(raw, ds.treatment());
    let (ate, mut report) = overall_ate(&clustering, &ds).unwrap();
    report.attach_losses(&ds).unwrap();

    assert!((ate - 2.0).abs() < 0.3, "lili ate {ate}");
    assert!((forest_ate(&forest, &ds).unwrap() - 2.0).abs() < 0.3);
    assert!(report.available_fraction > 0.1 && report.cluster_count > 10);
    assert_eq!(report.per_instance_ite.len(), ds.n());
    assert!(report.l1_ate_loss.unwrap() < 0.3);
    for c in &clustering.clusters {
        assert!(cluster_diameter(c, &ds).unwrap() <= ds.d() as f64);
    }
}

#[test]
fn leaf_occupancy_within_alpha_window() {
    let synth = generate_synthetic(&SyntheticSpec::constant(2000, 6, 1.0), 4).unwrap();
    let l = 30;
    let forest = fit_forest(&synth.dataset, 10, &TreeParams::with_min_leaf(l), 9).unwrap();
    for tree in forest.trees() {
        let s = tree.sample_size() as f64;
        for leaf in tree.leaves().iter().filter(|leaf| !leaf.degenerate) {
            let q = leaf.members.len() as f64 / s;
            assert!(q >= l as f64 / s && q <= (2 * l - 1) as f64 / s);
        }
    }
}

#[test]
fn stricter_tolerance_keeps_fewer_instances_together() {
    let synth = generate_synthetic(&SyntheticSpec::constant(800, 4, 1.0), 2).unwrap();
    let forest = fit_forest(&synth.dataset, 40, &TreeParams::with_min_leaf(20), 1).unwrap();
    let counts = coleaf_counts(&forest, &synth.dataset).unwrap();
    let order = TraversalOrder::Row.permutation(800);
    let loose = cluster(&counts, tolerance_threshold(40, &ToleranceFn::LinearGap(20.0)).unwrap(), &order).unwrap();
    let strict = cluster(&counts, tolerance_threshold(40, &ToleranceFn::Sqrt).unwrap(), &order).unwrap();
    assert!(loose.clusters.len() <= strict.clusters.len());
}
