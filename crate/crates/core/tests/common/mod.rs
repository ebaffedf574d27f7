#![allow(dead_code)]

use prc_forest::autoencoder::{ae_init, Activation, AeConfig};
use prc_forest::{Dataset, Label};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct line-by-line evaluation of the PR curve and its trapezoid sum:
/// every prefix set is re-counted from scratch, nothing is shared with the
/// library's sweep.
pub fn oracle_curve(values: &[f64], positive: &[bool]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = values.len();
    let total_pos = positive.iter().filter(|&&p| p).count();
    let baseline = total_pos as f64 / n as f64;
    let mut uniq = values.to_vec();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();

    let (mut thresholds, mut recall, mut precision) = (vec![], vec![], vec![]);
    for &v in &uniq {
        let indice: Vec<usize> = (0..n).filter(|&i| values[i] <= v).collect();
        let tp = indice.iter().filter(|&&i| positive[i]).count();
        let mut r = tp as f64 / total_pos as f64;
        let mut p = tp as f64 / indice.len() as f64;
        if p < baseline {
            if n == indice.len() {
                r = 0.0;
                p = baseline;
            } else {
                r = 1.0 - r;
                p = (total_pos - tp) as f64 / (n - indice.len()) as f64;
            }
        }
        thresholds.push(v);
        recall.push(r);
        precision.push(p);
    }
    (thresholds, recall, precision)
}

pub fn oracle_auprc(values: &[f64], positive: &[bool]) -> f64 {
    let (_, r, p) = oracle_curve(values, positive);
    let mut auprc = 0.0;
    for j in 0..r.len() {
        if j == 0 {
            auprc += r[0] * (1.0 + p[0]) / 2.0;
        } else {
            auprc += (r[j] - r[j - 1]) * (p[j] + p[j - 1]) / 2.0;
        }
    }
    auprc
}

pub fn labels_from_bools(positive: &[bool]) -> Vec<Label> {
    positive
        .iter()
        .map(|&p| if p { Label::Positive } else { Label::Negative })
        .collect()
}

pub fn dataset_from(rows: Vec<Vec<f64>>, positive: &[bool]) -> Dataset {
    let p = rows[0].len();
    Dataset::new(
        "generated",
        (0..p).map(|j| format!("x{j}")).collect(),
        rows,
        labels_from_bools(positive),
    )
    .unwrap()
}

/// Rows of small integers (so ties are common) with both classes present.
pub fn small_dataset(
    rows: std::ops::RangeInclusive<usize>,
    features: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>)> {
    (rows, features).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(prop::collection::vec((-4i32..=4).prop_map(f64::from), p), n),
            prop::collection::vec(any::<bool>(), n).prop_filter("both classes", |l| {
                l.iter().any(|&b| b) && l.iter().any(|&b| !b)
            }),
        )
    })
}

/// Two-class data where the first feature carries the signal and the rest
/// are noise; `minority` is the expected positive fraction.
pub fn signal_dataset(n: usize, p: usize, minority: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut positive = Vec::with_capacity(n);
    for i in 0..n {
        let is_pos = if i < 2 {
            i == 0
        } else {
            rng.gen_bool(minority)
        };
        let mut row: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..1.0)).collect();
        row[0] = if is_pos { 1.0 } else { 0.0 } + rng.gen_range(-0.6..0.6);
        rows.push(row);
        positive.push(is_pos);
    }
    dataset_from(rows, &positive)
}

/// `n_inliers` rows drawn uniformly within 0.02 of (0.5, ..., 0.5) followed by
/// `n_outliers` rows whose coordinates are a random sign times U(3, 5).
/// Labels are positive with probability 0.2 independent of the group.
pub fn cluster_with_outliers(
    n_inliers: usize,
    n_outliers: usize,
    width: usize,
    seed: u64,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for _ in 0..n_inliers {
        rows.push(
            (0..width)
                .map(|_| 0.5 + rng.gen_range(-0.02..0.02))
                .collect(),
        );
    }
    for _ in 0..n_outliers {
        rows.push(
            (0..width)
                .map(|_| {
                    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    sign * rng.gen_range(3.0..5.0)
                })
                .collect::<Vec<f64>>(),
        );
    }
    let n = rows.len();
    let mut labels: Vec<Label> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.2) {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    labels[0] = Label::Positive;
    labels[1] = Label::Negative;
    Dataset::new(
        "cluster",
        (0..width).map(|j| format!("x{j}")).collect(),
        rows,
        labels,
    )
    .unwrap()
}

/// Random configuration with widths bounded by [6, 4, 2], random activations,
/// random parameters and up to 8 rows. Returns the largest relative error
/// between the analytic gradient and central differences with step 1e-5,
/// over parameters whose gradient exceeds 1e-8 in magnitude.
pub fn gradient_check_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = rng.gen_range(2..=6);
    let mid = rng.gen_range(1..=input.min(4));
    let mut widths = vec![input, mid];
    if mid > 1 && rng.gen_bool(0.5) {
        widths.push(rng.gen_range(1..=mid.min(2)));
    }
    let layers = 2 * (widths.len() - 1);
    let choices = [Activation::Sigmoid, Activation::Relu, Activation::Identity];
    let mut config = AeConfig::with_widths(widths);
    config.activations = (0..layers).map(|_| choices[rng.gen_range(0..3)]).collect();
    let mut model = ae_init(&config, input).unwrap();
    let params: Vec<f64> = (0..model.n_params())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    model.set_parameters(&params).unwrap();
    let n_rows = rng.gen_range(1..=8);
    let rows: Vec<Vec<f64>> = (0..n_rows)
        .map(|_| (0..input).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();

    let (_, grad) = model.loss_gradient(&rows).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..params.len() {
        let mut probe = model.clone();
        let mut p = params.clone();
        p[k] = params[k] + h;
        probe.set_parameters(&p).unwrap();
        let up = probe.batch_loss(&rows).unwrap();
        p[k] = params[k] - h;
        probe.set_parameters(&p).unwrap();
        let down = probe.batch_loss(&rows).unwrap();
        let numeric = (up - down) / (2.0 * h);
        if grad[k].abs() > 1e-8 {
            let rel = (grad[k] - numeric).abs() / grad[k].abs().max(numeric.abs());
            worst = worst.max(rel);
        }
    }
    worst
}
