//! Shared helpers for integration tests: random instances and a from-scratch
//! pseudo-label reference that shares no code with the library.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `models × samples × classes` random distributions. `spread` scales the
/// logits; small values give near-uniform rows, large values near one-hot.
pub fn random_predictions(seed: u64, models: usize, samples: usize, classes: usize) -> Vec<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..models)
        .map(|_| {
            let spread = rng.gen_range(0.5..6.0);
            (0..samples)
                .map(|_| {
                    let logits: Vec<f64> = (0..classes).map(|_| rng.gen_range(-1.0..1.0) * spread).collect();
                    let m = logits.iter().cloned().fold(f64::MIN, f64::max);
                    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
                    let s: f64 = e.iter().sum();
                    e.iter().map(|x| x / s).collect()
                })
                .collect()
        })
        .collect()
}

fn row_entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h
}

fn first_max(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Reference pseudo-labeling with `rho = percent / 100`. `None` is ABSTAIN.
pub fn reference_labels(preds: &[Vec<Vec<f64>>], percent: usize) -> Vec<Option<usize>> {
    let n = preds[0].len();
    let c = preds[0][0].len();
    let k = (percent * n).div_ceil(100).clamp(1, n);
    let entropies: Vec<Vec<f64>> = preds
        .iter()
        .map(|m| m.iter().map(|row| row_entropy(row)).collect())
        .collect();
    let thresholds: Vec<f64> = entropies
        .iter()
        .map(|h| {
            let mut s = h.clone();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            s[k - 1]
        })
        .collect();
    let conf: Vec<Vec<f64>> = preds
        .iter()
        .map(|m| {
            let mut acc = vec![0.0; c];
            for row in m {
                for j in 0..c {
                    acc[j] += row[j];
                }
            }
            acc.iter().map(|x| x / n as f64).collect()
        })
        .collect();
    (0..n)
        .map(|i| {
            let voters: Vec<usize> = (0..preds.len())
                .filter(|&m| entropies[m][i] <= thresholds[m])
                .collect();
            if voters.is_empty() {
                return None;
            }
            let mut g = vec![0.0; c];
            for j in 0..c {
                let mut num = 0.0;
                let mut den = 0.0;
                for &m in &voters {
                    let vote = if first_max(&preds[m][i]) == j { 1.0 } else { -1.0 };
                    num += conf[m][j] * vote;
                    den += conf[m][j];
                }
                g[j] = if den == 0.0 { -1.0 } else { num / den };
            }
            Some(first_max(&g))
        })
        .collect()
}
