mod common;

use std::collections::BTreeMap;

use common::{brute_mi, pairwise_auc, rng};
use mtfwfm::metrics::scored_samples;
use mtfwfm::mi::{
    export_heatmaps, matrix_csv, mutual_information, pearson, top_k_pairs, ContingencyCounts, CountOptions,
};
use mtfwfm::{auc, report, Error, ModelConfig, ModelKind, ModelParams, ScoredSample, SparseInstance, TypeWeights};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn sample(score: f64, label: bool, conv_type: u32) -> ScoredSample {
    ScoredSample { score, label, conv_type }
}

/// Scores drawn from a small grid so ties are frequent.
fn tied_samples(g: &mut ChaCha8Rng, n: usize, types: u32) -> Vec<ScoredSample> {
    let levels = g.random_range(2..50);
    (0..n)
        .map(|_| {
            sample(
                f64::from(g.random_range(0..levels)) / f64::from(levels),
                g.random_bool(0.3),
                g.random_range(0..types),
            )
        })
        .collect()
}

#[test]
fn auc_reference_cases() {
    assert_eq!(auc(&[sample(0.9, true, 0), sample(0.1, false, 0)]).unwrap(), 1.0);
    assert_eq!(auc(&[sample(0.1, true, 0), sample(0.9, false, 0)]).unwrap(), 0.0);
    let flat: Vec<_> = (0..10).map(|i| sample(0.3, i % 3 == 0, 0)).collect();
    assert_eq!(auc(&flat).unwrap(), 0.5);
    assert!(matches!(
        auc(&[sample(0.2, true, 0), sample(0.4, true, 0)]),
        Err(Error::SingleClass { positives: 2, negatives: 0 })
    ));
}

#[test]
fn auc_matches_pairwise_oracle_with_ties() {
    let mut g = rng(40);
    for _ in 0..20 {
        let n = g.random_range(2..=1000);
        let s = tied_samples(&mut g, n, 1);
        if let Some(expected) = pairwise_auc(&s) {
            assert!((auc(&s).unwrap() - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn weighted_auc_reference_cases() {
    let mut s = vec![sample(0.9, true, 0), sample(0.1, false, 0)];
    s.extend([sample(0.5, true, 1), sample(0.5, false, 1)]);
    let equal = report(&s, &TypeWeights::uniform([0, 1])).unwrap();
    assert_eq!(equal.auc_per_type[&0], 1.0);
    assert_eq!(equal.auc_per_type[&1], 0.5);
    assert!((equal.auc_weighted - 0.75).abs() < 1e-15);
    let skewed = report(&s, &TypeWeights(BTreeMap::from([(0, 3.0), (1, 1.0)]))).unwrap();
    assert!((skewed.auc_weighted - 0.875).abs() < 1e-15);
    assert!((equal.auc_overall - pairwise_auc(&s).unwrap()).abs() < 1e-15);
}

#[test]
fn single_class_types_are_excluded_from_the_weighted_mean() {
    let s = vec![
        sample(0.9, true, 0),
        sample(0.1, false, 0),
        sample(0.4, false, 1),
        sample(0.6, false, 1),
    ];
    let r = report(&s, &TypeWeights::from_counts(&s)).unwrap();
    assert_eq!(r.excluded_types, vec![1]);
    assert_eq!(r.auc_weighted, 1.0);
    let only_negatives = vec![sample(0.4, false, 1), sample(0.6, false, 2)];
    assert!(report(&only_negatives, &TypeWeights::uniform([1, 2])).is_err());
    let all_negative_types = vec![sample(0.9, true, 0), sample(0.4, false, 1), sample(0.6, false, 2)];
    assert!(matches!(
        report(&all_negative_types, &TypeWeights::uniform([0, 1, 2])),
        Err(Error::NoComputableType)
    ));
}

#[test]
fn scored_samples_follow_the_data() {
    let data = vec![SparseInstance::new(vec![0], 1, true), SparseInstance::new(vec![0], 0, false)];
    let s = scored_samples(&[0.7, 0.2], &data);
    assert_eq!(s, vec![sample(0.7, true, 1), sample(0.2, false, 0)]);
}

fn random_data(g: &mut ChaCha8Rng, n: usize, fields: usize, card: u32, types: u32) -> Vec<SparseInstance> {
    (0..n)
        .map(|_| {
            let active = (0..fields as u32).map(|f| f * card + g.random_range(0..card)).collect();
            SparseInstance::new(active, g.random_range(0..types), g.random_bool(0.3))
        })
        .collect()
}

fn mi_of(data: &[SparseInstance], n: usize, t: usize) -> mtfwfm::mi::MiTable {
    mutual_information(&ContingencyCounts::count_with(data, n, t, CountOptions::default()).unwrap())
}

#[test]
fn one_sample_fills_one_cell_per_pair() {
    let data = vec![SparseInstance::new(vec![0, 3, 5], 0, true)];
    let c = ContingencyCounts::count_with(&data, 3, 1, CountOptions::default()).unwrap();
    for pair in &c.types[0].pairs {
        assert_eq!(pair.cells.len(), 1);
        assert_eq!(pair.cells.values().next(), Some(&[0, 1]));
    }
}

#[test]
fn duplicated_data_doubles_every_count() {
    let mut g = rng(41);
    let data = random_data(&mut g, 300, 4, 3, 2);
    let twice: Vec<_> = data.iter().chain(&data).cloned().collect();
    let a = ContingencyCounts::count_with(&data, 4, 2, CountOptions::default()).unwrap();
    let b = ContingencyCounts::count_with(&twice, 4, 2, CountOptions::default()).unwrap();
    for (ta, tb) in a.types.iter().zip(&b.types) {
        assert_eq!(2 * ta.total, tb.total);
        for (pa, pb) in ta.pairs.iter().zip(&tb.pairs) {
            for (key, c) in &pa.cells {
                assert_eq!(pb.cells[key], [2 * c[0], 2 * c[1]]);
            }
        }
    }
    // MI is a function of frequencies only.
    let (ma, mb) = (mi_of(&data, 4, 2), mi_of(&twice, 4, 2));
    for t in 0..2 {
        for (x, y) in ma.matrix(t).unwrap().iter().zip(mb.matrix(t).unwrap()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn cell_marginals_reconstruct_type_totals() {
    let mut g = rng(42);
    let data = random_data(&mut g, 500, 4, 4, 3);
    let c = ContingencyCounts::count_par(&data, 4, 3, CountOptions::default()).unwrap();
    for (t, tc) in c.types.iter().enumerate() {
        let expected = data.iter().filter(|s| s.conv_type == t as u32).count() as u64;
        let pos = data.iter().filter(|s| s.conv_type == t as u32 && s.label).count() as u64;
        assert_eq!(tc.total, expected);
        assert_eq!(tc.label_counts, [expected - pos, pos]);
        for pair in &tc.pairs {
            let sum: u64 = pair.cells.values().map(|c| c[0] + c[1]).sum();
            assert_eq!(sum, expected);
        }
    }
    assert_eq!(c, ContingencyCounts::count_with(&data, 4, 3, CountOptions::default()).unwrap());
}

#[test]
fn independent_label_gives_zero_mi() {
    // Every (a, b) combination appears once with each label.
    let mut data = Vec::new();
    for a in 0..3 {
        for b in 0..4 {
            for label in [false, true] {
                data.push(SparseInstance::new(vec![a, 3 + b], 0, label));
            }
        }
    }
    assert!(mi_of(&data, 2, 1).get(0, 0, 1).unwrap().abs() < 1e-12);
}

#[test]
fn label_copying_a_fair_field_gives_ln2() {
    let mut data = Vec::new();
    for a in 0..2u32 {
        for b in 0..3u32 {
            for c in 0..2u32 {
                data.push(SparseInstance::new(vec![a, 2 + b, 5 + c], 0, a == 0));
            }
        }
    }
    let mi = mi_of(&data, 3, 1);
    let ln2 = std::f64::consts::LN_2;
    assert!((mi.get(0, 0, 1).unwrap() - ln2).abs() < 1e-12);
    assert!((mi.get(0, 0, 2).unwrap() - ln2).abs() < 1e-12);
    assert!(mi.get(0, 1, 2).unwrap().abs() < 1e-12);
    let brute = brute_mi(&data, 3, 1);
    assert!((brute[0].as_ref().unwrap()[1] - ln2).abs() < 1e-12);
}

#[test]
fn absent_types_have_no_matrix() {
    let data = vec![SparseInstance::new(vec![0, 1], 0, true), SparseInstance::new(vec![0, 1], 0, false)];
    let mi = mi_of(&data, 2, 2);
    assert!(mi.matrix(1).is_none());
    assert!(top_k_pairs(&mi, 1, 1).is_err());
}

#[test]
fn top_k_edge_cases() {
    let mut data = Vec::new();
    for a in 0..2u32 {
        for label in [false, true] {
            data.push(SparseInstance::new(vec![a, 2, 3, 4], 0, label));
        }
    }
    let mi = mi_of(&data, 4, 1);
    assert!(top_k_pairs(&mi, 0, 0).unwrap().is_empty());
    // All-zero matrix ranks pairs lexicographically.
    let ranked: Vec<_> = top_k_pairs(&mi, 0, 3).unwrap().iter().map(|r| (r.p, r.q)).collect();
    assert_eq!(ranked, vec![(0, 1), (0, 2), (0, 3)]);
    assert_eq!(top_k_pairs(&mi, 0, 100).unwrap().len(), 6);
}

#[test]
fn cell_cap_flags_pairs_as_excluded() {
    let mut g = rng(43);
    let data = random_data(&mut g, 400, 3, 6, 1);
    let capped = ContingencyCounts::count_with(&data, 3, 1, CountOptions { max_cells_per_pair: Some(4) }).unwrap();
    let mi = mutual_information(&capped);
    assert_eq!(mi.excluded.len(), 3);
}

#[test]
fn heatmap_export_writes_symmetric_csvs_and_correlations() {
    let mut g = rng(44);
    let data = random_data(&mut g, 2000, 4, 3, 2);
    let mi = mi_of(&data, 4, 2);
    let config = ModelConfig::new(ModelKind::MtFwfm, vec![3; 4], 2, 2).unwrap();
    let mut params = ModelParams::zeros(config).unwrap();
    // |r| = 5 * MI gives a perfect correlation.
    for t in 0..2 {
        for p in 0..4 {
            for q in p + 1..4 {
                let sign = if (p + q) % 2 == 0 { 1.0 } else { -1.0 };
                params.set_r(t, p, q, sign * 5.0 * mi.get(t as u32, p, q).unwrap()).unwrap();
            }
        }
    }
    let names: Vec<String> = (0..4).map(|i| format!("f{i}")).collect();
    let dir = tempfile::tempdir().unwrap();
    let out = export_heatmaps(&mi, &params, &names, dir.path()).unwrap();
    for t in 0..2u32 {
        assert!((out.correlations[&t].unwrap() - 1.0).abs() < 1e-9);
    }
    for name in ["mi_type0.csv", "mi_type1.svg", "r_type0.csv", "r_type1.svg", "correlations.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let csv = std::fs::read_to_string(dir.path().join("r_type1.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').skip(1).collect()).collect();
    for p in 0..4 {
        for q in 0..4 {
            assert_eq!(rows[p][q], rows[q][p]);
        }
    }
    assert_eq!(csv, matrix_csv(&params.interaction_matrix(1).iter().map(|r| r.abs()).collect::<Vec<_>>(), &names));
    let blocked = dir.path().join("r_type0.csv").join("nested");
    assert!(export_heatmaps(&mi, &params, &names, &blocked).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn auc_oracle_property(seed in any::<u64>(), n in 2usize..400) {
        let mut g = rng(seed);
        let s = tied_samples(&mut g, n, 3);
        match pairwise_auc(&s) {
            Some(expected) => prop_assert!((auc(&s).unwrap() - expected).abs() < 1e-12),
            None => prop_assert!(auc(&s).is_err()),
        }
    }

    #[test]
    fn auc_is_invariant_under_monotone_maps(seed in any::<u64>(), n in 2usize..300) {
        let mut g = rng(seed);
        let s = tied_samples(&mut g, n, 1);
        let mapped: Vec<_> = s.iter().map(|x| sample((3.0 * x.score).exp() - 7.0, x.label, x.conv_type)).collect();
        if let (Ok(a), Ok(b)) = (auc(&s), auc(&mapped)) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn mi_matches_brute_force_and_is_nonnegative(seed in any::<u64>()) {
        let mut g = rng(seed);
        let n = g.random_range(2..=5);
        let card = g.random_range(1..=4);
        let data = random_data(&mut g, 300, n, card, 2);
        let fast = mi_of(&data, n, 2);
        let slow = brute_mi(&data, n, 2);
        for t in 0..2 {
            match (fast.matrix(t as u32), &slow[t]) {
                (Some(a), Some(b)) => {
                    for (x, y) in a.iter().zip(b) {
                        prop_assert!((x - y).abs() < 1e-12);
                        prop_assert!(*x >= -1e-15);
                    }
                }
                (None, None) => {}
                _ => prop_assert!(false, "presence differs for type {}", t),
            }
        }
    }

    #[test]
    fn pearson_of_affine_copies(xs in proptest::collection::vec(-10.0f64..10.0, 3..30), a in 0.1f64..5.0, b in -3.0f64..3.0) {
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        if let Some(r) = pearson(&xs, &ys) {
            prop_assert!((r - 1.0).abs() < 1e-9);
        }
    }
}
