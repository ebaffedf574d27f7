mod common;

use common::{dataset_from, labels_from_bools, oracle_auprc, oracle_curve, small_dataset};
use prc_forest::prc::{
    auprc_trapezoid, compute_pr_curve, harmonic_mean, select_feature, select_threshold,
};
use prc_forest::Dataset;
use proptest::prelude::*;

fn negated(d: &Dataset) -> Dataset {
    let rows: Vec<Vec<f64>> = d.rows().map(|r| r.iter().map(|v| -v).collect()).collect();
    Dataset::new("neg", d.feature_names().to_vec(), rows, d.labels().to_vec()).unwrap()
}

#[test]
fn exhaustive_label_assignments_match_oracle() {
    let value_sets: [&[f64]; 4] = [
        &[1.0, 2.0, 3.0, 4.0],
        &[0.5, 0.5, 1.0, 2.0, 2.0, 3.0],
        &[3.0, 1.0, 2.0, 1.0, 3.0, 2.0, 5.0, 0.0],
        &[7.0, -1.0, 2.0, 2.0, 9.0, 4.0, 4.0, 4.0, 0.0, 1.0, 3.0, 8.0],
    ];
    for values in value_sets {
        let n = values.len();
        for mask in 1u32..(1 << n) - 1 {
            let positive: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let curve = compute_pr_curve(values, &labels_from_bools(&positive)).unwrap();
            let (t, r, p) = oracle_curve(values, &positive);
            assert_eq!(curve.thresholds, t);
            for j in 0..t.len() {
                assert!((curve.recall[j] - r[j]).abs() <= 1e-12);
                assert!((curve.precision[j] - p[j]).abs() <= 1e-12);
            }
            let got = auprc_trapezoid(&curve);
            let want = oracle_auprc(values, &positive);
            assert!(
                (got - want).abs() <= 1e-12,
                "{values:?} {mask:b}: {got} vs {want}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn curve_matches_oracle((rows, positive) in small_dataset(2..=12, 1..=3)) {
        let labels = labels_from_bools(&positive);
        for j in 0..rows[0].len() {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let curve = compute_pr_curve(&column, &labels).unwrap();
            let want = oracle_auprc(&column, &positive);
            prop_assert!((auprc_trapezoid(&curve) - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn curve_shape_and_flip_guarantee((rows, positive) in small_dataset(2..=12, 1..=1)) {
        let column: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let curve = compute_pr_curve(&column, &labels_from_bools(&positive)).unwrap();
        let n = positive.len();
        let pos = positive.iter().filter(|&&p| p).count();
        prop_assert_eq!(curve.baseline, pos as f64 / n as f64);
        prop_assert!(curve.thresholds.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(curve.recall.len(), curve.len());
        prop_assert_eq!(curve.precision.len(), curve.len());
        for (&r, &p) in curve.recall.iter().zip(&curve.precision) {
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(p >= curve.baseline);
        }
    }

    #[test]
    fn threshold_is_a_curve_point((rows, positive) in small_dataset(2..=12, 1..=1)) {
        let column: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let curve = compute_pr_curve(&column, &labels_from_bools(&positive)).unwrap();
        let (t, f1) = select_threshold(&curve);
        prop_assert!(curve.thresholds.contains(&t));
        let best = curve
            .recall
            .iter()
            .zip(&curve.precision)
            .map(|(&r, &p)| harmonic_mean(r, p))
            .fold(0.0, f64::max);
        prop_assert_eq!(f1, best);
    }

    #[test]
    fn harmonic_mean_bounds(r in 0.0..=1.0f64, p in 0.0..=1.0f64) {
        let h = harmonic_mean(r, p);
        prop_assert_eq!(h, harmonic_mean(p, r));
        prop_assert!(h >= 0.0);
        prop_assert!(h <= 2.0 * r.min(p) + 1e-15);
        prop_assert!((harmonic_mean(r, r) - r).abs() <= 1e-15);
    }

    #[test]
    fn selection_is_symmetric_under_negation((rows, positive) in small_dataset(2..=12, 1..=3)) {
        let d = dataset_from(rows, &positive);
        let all: Vec<usize> = (0..d.n_features()).collect();
        let a = select_feature(&d, &all);
        let b = select_feature(&negated(&d), &all);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert!((a.auprc - b.auprc).abs() <= 1e-9),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a.map(|s| s.auprc), b.map(|s| s.auprc)),
        }
    }
}

#[test]
fn monotone_examples_are_symmetric_under_negation() {
    let cases: [(&[f64], &[bool]); 3] = [
        (&[1.0, 2.0, 3.0, 4.0], &[true, true, false, false]),
        (
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            &[false, false, false, true, true, true],
        ),
        (
            &[1.0, 2.0, 3.0, 4.0, 5.0],
            &[true, false, true, false, false],
        ),
    ];
    for (values, positive) in cases {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        let d = dataset_from(rows, positive);
        let a = select_feature(&d, &[0]).unwrap().auprc;
        let b = select_feature(&negated(&d), &[0]).unwrap().auprc;
        assert!((a - b).abs() <= 1e-9, "{values:?}: {a} vs {b}");
    }
}

#[test]
fn separating_feature_beats_noise() {
    use rand::{Rng, SeedableRng};
    for seed in 0..20u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let positive: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let rows: Vec<Vec<f64>> = positive
            .iter()
            .map(|&p| {
                let mut row: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
                row[2] = if p { 2.0 } else { -2.0 } + rng.gen_range(0.0..1.0);
                row
            })
            .collect();
        let d = dataset_from(rows, &positive);
        let chosen = select_feature(&d, &[0, 1, 2, 3]).unwrap();
        assert_eq!(chosen.feature_index, 2, "seed {seed}");
        for j in [0, 1, 3] {
            assert!(select_feature(&d, &[j]).unwrap().auprc <= chosen.auprc);
        }
    }
}
