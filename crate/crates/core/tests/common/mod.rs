//! Random instances and independent reference computations shared by the
//! integration tests. Nothing here calls the library's metric formulas.

#![allow(dead_code)]

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use metricopt::confusion::{ClassMatrix, ProbabilityField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random `K x K` confusion with unit mass and every entry at least `floor / K^2`.
pub fn random_confusion(rng: &mut ChaCha8Rng, k: usize, floor: f64) -> Array2<f64> {
    let raw = Array2::from_shape_fn((k, k), |_| rng.random::<f64>() + floor);
    let total = raw.sum();
    raw / total
}

/// Random point on the simplex, each coordinate bounded away from zero.
pub fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.01).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

pub fn random_probs(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize) -> ProbabilityField {
    let mut values = Array3::zeros((n, m, k));
    for i in 0..n {
        for j in 0..m {
            for (c, p) in random_simplex(rng, k).into_iter().enumerate() {
                values[[i, j, c]] = p;
            }
        }
    }
    ProbabilityField::new(values).unwrap()
}

pub fn random_classes(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize) -> ClassMatrix {
    let values = Array2::from_shape_fn((n, m), |_| rng.random_range(0..k));
    ClassMatrix::new(values, k).unwrap()
}

/// Labels drawn from the rows of `probs`.
pub fn sample_labels(rng: &mut ChaCha8Rng, probs: &ProbabilityField) -> ClassMatrix {
    let (n, m, k) = probs.values().dim();
    let values = Array2::from_shape_fn((n, m), |(i, j)| {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for c in 0..k {
            acc += probs.values()[[i, j, c]];
            if u < acc {
                return c;
            }
        }
        k - 1
    });
    ClassMatrix::new(values, k).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// Reference metric formulas, written out with plain loops.

pub fn ref_ordinal(c: &Array2<f64>) -> f64 {
    let k = c.nrows();
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            let w = 1.0 - (i as f64 - j as f64).abs() / (k as f64 - 1.0);
            total += w * c[[i, j]];
        }
    }
    total
}

/// Micro-F1 with 0-based negative class `neg`: precision and recall pooled over
/// the other classes.
pub fn ref_micro_f1(c: &Array2<f64>, neg: usize) -> f64 {
    let k = c.nrows();
    let mut tp = 0.0;
    let mut predicted_pos = 0.0;
    let mut actual_pos = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != neg {
                actual_pos += c[[i, j]];
            }
            if j != neg {
                predicted_pos += c[[i, j]];
            }
            if i == j && i != neg {
                tp += c[[i, j]];
            }
        }
    }
    2.0 * tp / (predicted_pos + actual_pos)
}

pub fn ref_macro_f1(c: &Array2<f64>) -> f64 {
    let k = c.nrows();
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..k {
        let mut row = 0.0;
        let mut col = 0.0;
        for j in 0..k {
            row += c[[i, j]];
            col += c[[j, i]];
        }
        if row + col > 0.0 {
            total += 2.0 * c[[i, i]] / (row + col);
            count += 1;
        }
    }
    total / count as f64
}

pub fn ref_weighted_exp(c: &Array2<f64>, gamma: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..c.nrows() {
        total += (-gamma * (i + 1) as f64).exp() * c[[i, i]];
    }
    total
}

/// Central finite-difference gradient of `f` at `c`.
pub fn fd_gradient(f: impl Fn(&Array2<f64>) -> f64, c: &Array2<f64>, h: f64) -> Array2<f64> {
    let mut grad = Array2::zeros(c.dim());
    for idx in 0..c.len() {
        let (i, j) = (idx / c.ncols(), idx % c.ncols());
        let mut up = c.clone();
        up[[i, j]] += h;
        let mut down = c.clone();
        down[[i, j]] -= h;
        grad[[i, j]] = (f(&up) - f(&down)) / (2.0 * h);
    }
    grad
}

/// `(1/N) sum_n eta[n, i] 1{pred[n] = j}` for a single output, by loops.
pub fn ref_expected_confusion(eta: &[Vec<f64>], preds: &[usize], k: usize) -> Array2<f64> {
    let n = eta.len() as f64;
    let mut c = Array2::zeros((k, k));
    for (row, &p) in eta.iter().zip(preds) {
        for i in 0..k {
            c[[i, p]] += row[i] / n;
        }
    }
    c
}

/// Every assignment of `n` slots to `k` classes, in odometer order.
pub fn all_assignments(n: usize, k: usize) -> Vec<Vec<usize>> {
    let total = k.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut digits = vec![0; n];
            for d in digits.iter_mut().rev() {
                *d = code % k;
                code /= k;
            }
            digits
        })
        .collect()
}

/// Class minimizing `sum_i L[i, k] eta_i`, written independently of the library.
pub fn ref_decision(loss: &Array2<f64>, eta: &[f64]) -> usize {
    let k = loss.ncols();
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for col in 0..k {
        let score: f64 = (0..k).map(|i| loss[[i, col]] * eta[i]).sum();
        if score < best_score {
            best_score = score;
            best = col;
        }
    }
    best
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
