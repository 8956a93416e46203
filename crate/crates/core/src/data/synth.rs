use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, PublicPool};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::seed;

/// Gaussian blobs: `classes` centers on a random sphere of radius
/// `separation`, `per_class` unit-variance points around each, labels in
/// class-major order.
pub fn make_synthetic(
    classes: usize,
    dims: usize,
    per_class: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 || dims < 2 || per_class < 1 {
        return Err(Error::Precondition(format!(
            "need classes >= 2, dims >= 2, per_class >= 1 (got {classes}, {dims}, {per_class})"
        )));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::Precondition(format!(
            "separation must be finite and non-negative, got {separation}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut centers = Vec::with_capacity(classes);
    for _ in 0..classes {
        let mut v: Vec<f64> = (0..dims).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        v.iter_mut().for_each(|x| *x *= separation / norm);
        centers.push(v);
    }
    let n = classes * per_class;
    let mut data = Vec::with_capacity(n * dims);
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            for &m in center {
                let e: f64 = StandardNormal.sample(&mut rng);
                data.push(m + e);
            }
            labels.push(c);
        }
    }
    Dataset::new(Matrix::from_vec(n, dims, data)?, labels, classes)
}

/// `count` distinct indices from `0..n`, uniformly, in sorted order.
pub fn sample_without_replacement(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    let mut picked = index::sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    picked
}

/// Seeded uniform split into an unlabeled public pool and a labeled private set.
pub fn split_public(ds: &Dataset, public_count: usize, seed: u64) -> Result<(PublicPool, Dataset)> {
    let n = ds.len();
    if public_count >= n {
        return Err(Error::Precondition(format!(
            "public_count {public_count} must be smaller than the dataset ({n})"
        )));
    }
    let (public, private) = split_indices(n, public_count, seed);
    Ok((ds.subset(&public).unlabeled(), ds.subset(&private)))
}

/// Index form of [`split_public`]: `(public, private)`, both sorted.
pub fn split_indices(n: usize, public_count: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let public = sample_without_replacement(n, public_count, seed);
    let private = complement(n, &public);
    (public, private)
}

fn complement(n: usize, sorted: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - sorted.len());
    let mut it = sorted.iter().peekable();
    for i in 0..n {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::argmax;

    #[test]
    fn counts_and_labels() {
        let ds = make_synthetic(2, 2, 10, 3.0, 1).unwrap();
        assert_eq!(ds.len(), 20);
        assert_eq!(ds.class_counts(), vec![10, 10]);
        assert!(ds.labels()[..10].iter().all(|&l| l == 0));
        assert!(make_synthetic(1, 2, 10, 1.0, 0).is_err());
        assert!(make_synthetic(2, 1, 10, 1.0, 0).is_err());
        assert!(make_synthetic(2, 2, 0, 1.0, 0).is_err());
    }

    /// Class means estimated on half the draw, nearest-mean rule scored on the other half.
    fn nearest_center_accuracy(separation: f64) -> f64 {
        let ds = make_synthetic(4, 8, 1000, separation, 21).unwrap();
        let (fit, held): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|i| i % 2 == 0);
        let fit = ds.subset(&fit);
        let held = ds.subset(&held);
        let means: Vec<Vec<f64>> = (0..4)
            .map(|c| {
                let rows: Vec<usize> = (0..fit.len()).filter(|&i| fit.labels()[i] == c).collect();
                fit.subset(&rows).features().column_means()
            })
            .collect();
        let hits = (0..held.len())
            .filter(|&i| {
                let x = held.features().row(i);
                let scores: Vec<f64> = means
                    .iter()
                    .map(|m| -m.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                    .collect();
                argmax(&scores) == held.labels()[i]
            })
            .count();
        hits as f64 / held.len() as f64
    }

    #[test]
    fn wide_separation_is_nearly_perfectly_classifiable() {
        assert!(nearest_center_accuracy(10.0) >= 0.99);
    }

    #[test]
    fn zero_separation_is_chance() {
        let ds = make_synthetic(2, 2, 2000, 0.0, 5).unwrap();
        // every point is pure noise around the origin: any rule is at chance
        let hits = (0..ds.len())
            .filter(|&i| (ds.features().get(i, 0) > 0.0) as usize == ds.labels()[i])
            .count();
        let acc = hits as f64 / ds.len() as f64;
        assert!((acc - 0.5).abs() < 0.05, "{acc}");
    }

    #[test]
    fn split_examples() {
        let ds = make_synthetic(2, 3, 50, 2.0, 3).unwrap();
        let (p, r) = split_public(&ds, 0, 1).unwrap();
        assert!(p.is_empty());
        assert_eq!(r, ds);
        let (p, r) = split_public(&ds, 30, 1).unwrap();
        assert_eq!((p.len(), r.len()), (30, 70));
        let (p2, r2) = split_public(&ds, 30, 1).unwrap();
        assert_eq!((p, r), (p2, r2));
        assert!(split_public(&ds, 100, 1).is_err());
    }

    #[test]
    fn split_is_disjoint_and_covering() {
        let idx = sample_without_replacement(100, 30, 4);
        let rest = complement(100, &idx);
        let mut all: Vec<usize> = idx.iter().chain(&rest).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }
}
