use std::ops::Deref;

use crate::error::{Error, Result};
use crate::nn::{argmax, entropy, PredictionMatrix};

/// Mean predicted distribution of one model over the public pool.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassConfidence(Vec<f64>);

impl ClassConfidence {
    pub fn scores(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for ClassConfidence {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ClassConfidence {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Column mean of a prediction matrix.
pub fn class_confidence(probs: &PredictionMatrix) -> Result<ClassConfidence> {
    if probs.samples() == 0 {
        return Err(Error::Precondition(
            "class confidence of an empty prediction matrix".into(),
        ));
    }
    Ok(ClassConfidence(probs.matrix().column_means()))
}

/// One hard label per public sample, or `None` (the all-zero vector).
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelSet {
    labels: Vec<Option<usize>>,
    classes: usize,
}

impl PseudoLabelSet {
    pub fn new(labels: Vec<Option<usize>>, classes: usize) -> Result<Self> {
        if let Some(l) = labels.iter().flatten().find(|&&l| l >= classes) {
            return Err(Error::Precondition(format!(
                "pseudo-label {l} out of range for {classes} classes"
            )));
        }
        Ok(Self { labels, classes })
    }

    pub fn all_abstain(samples: usize, classes: usize) -> Self {
        Self {
            labels: vec![None; samples],
            classes,
        }
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn get(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().flatten().count()
    }

    pub fn abstain_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        1.0 - self.labeled_count() as f64 / self.labels.len() as f64
    }

    /// The label as a `{0,1}^C` vector with at most one 1.
    pub fn vector(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.classes];
        if let Some(c) = self.labels[i] {
            v[c] = 1.0;
        }
        v
    }

    /// Accuracy over labeled samples against hidden ground truth; `None` if nothing is labeled.
    pub fn accuracy(&self, truth: &[usize]) -> Option<f64> {
        let labeled = self.labeled_count();
        if labeled == 0 {
            return None;
        }
        let hits = self
            .labels
            .iter()
            .zip(truth)
            .filter(|(l, &t)| **l == Some(t))
            .count();
        Some(hits as f64 / labeled as f64)
    }
}

/// Participation ratio `ρ(t) = min(1, start + (t - 1)·step)` for 1-based iteration `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoSchedule {
    pub start: f64,
    pub step: f64,
}

impl Default for RhoSchedule {
    fn default() -> Self {
        Self {
            start: 0.1,
            step: 0.05,
        }
    }
}

impl RhoSchedule {
    pub fn new(start: f64, step: f64) -> Result<Self> {
        let s = Self { start, step };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start > 0.0 && self.start <= 1.0) {
            return Err(Error::Precondition(format!(
                "rho start must lie in (0, 1], got {}",
                self.start
            )));
        }
        if !(self.step >= 0.0 && self.step.is_finite()) {
            return Err(Error::Precondition(format!(
                "rho step must be non-negative, got {}",
                self.step
            )));
        }
        Ok(())
    }

    pub fn rho(&self, iteration: usize) -> f64 {
        let t = iteration.saturating_sub(1) as f64;
        (self.start + t * self.step).min(1.0)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Precondition(format!("rho must lie in (0, 1], got {rho}")));
    }
    Ok(())
}

/// `⌈ρ·n⌉`, clamped to `1..=n`.
///
/// A 1e-9 slack absorbs representation error so that e.g. `0.15 · 20` ranks 3, not 4.
pub fn admission_rank(rho: f64, n: usize) -> usize {
    let k = (rho * n as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(n)
}

fn order_statistic(entropies: &[f64], rho: f64) -> f64 {
    let mut sorted = entropies.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[admission_rank(rho, sorted.len()) - 1]
}

/// The `⌈ρ·N⌉`-th smallest row entropy of `probs`.
pub fn entropy_baseline(probs: &PredictionMatrix, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if probs.samples() == 0 {
        return Err(Error::Precondition("entropy baseline of an empty matrix".into()));
    }
    Ok(order_statistic(&probs.entropies(), rho))
}

/// Models whose entropy on this sample is at or below their baseline.
pub fn reliable_set(sample_probs: &[&[f64]], baselines: &[f64]) -> Result<Vec<usize>> {
    if sample_probs.len() != baselines.len() {
        return Err(Error::Shape(format!(
            "{} models but {} baselines",
            sample_probs.len(),
            baselines.len()
        )));
    }
    Ok(sample_probs
        .iter()
        .zip(baselines)
        .enumerate()
        .filter(|(_, (p, &b))| entropy(p) <= b)
        .map(|(m, _)| m)
        .collect())
}

/// `+1` at the argmax (smallest index on ties), `-1` elsewhere.
pub fn vote_vector(probs: &[f64]) -> Vec<f64> {
    let top = argmax(probs);
    (0..probs.len())
        .map(|c| if c == top { 1.0 } else { -1.0 })
        .collect()
}

/// Per-class confidence-weighted average of votes.
///
/// A class on which no voter has any confidence mass gets `-1`.
pub fn aggregate_vote(votes: &[Vec<f64>], confidences: &[&ClassConfidence]) -> Result<Vec<f64>> {
    if votes.is_empty() {
        return Err(Error::Precondition("aggregate of an empty vote set".into()));
    }
    if votes.len() != confidences.len() {
        return Err(Error::Shape(format!(
            "{} votes but {} confidence vectors",
            votes.len(),
            confidences.len()
        )));
    }
    let c = votes[0].len();
    if votes.iter().any(|v| v.len() != c) || confidences.iter().any(|w| w.len() != c) {
        return Err(Error::Shape("votes and confidences disagree on class count".into()));
    }
    let mut num = vec![0.0; c];
    let mut den = vec![0.0; c];
    for (v, w) in votes.iter().zip(confidences) {
        for j in 0..c {
            num[j] += w[j] * v[j];
            den[j] += w[j];
        }
    }
    Ok(num
        .iter()
        .zip(&den)
        .map(|(&n, &d)| if d > 0.0 { n / d } else { -1.0 })
        .collect())
}

/// A voter in pseudo-label generation.
#[derive(Debug, Clone, Copy)]
pub struct SourceModel<'a> {
    pub probs: &'a PredictionMatrix,
    pub confidence: &'a ClassConfidence,
}

/// Entropy-gated, confidence-weighted negative-learning vote over all sources.
pub fn generate_pseudo_labels(sources: &[SourceModel<'_>], rho: f64) -> Result<PseudoLabelSet> {
    check_rho(rho)?;
    let first = sources
        .first()
        .ok_or_else(|| Error::Precondition("no source models".into()))?;
    let (n, c) = (first.probs.samples(), first.probs.classes());
    if n == 0 {
        return Err(Error::Precondition("empty public pool".into()));
    }
    for (m, s) in sources.iter().enumerate() {
        if s.probs.samples() != n || s.probs.classes() != c || s.confidence.len() != c {
            return Err(Error::Shape(format!(
                "source {m} is {}x{} with {} confidences, expected {n}x{c}",
                s.probs.samples(),
                s.probs.classes(),
                s.confidence.len()
            )));
        }
    }

    let entropies: Vec<Vec<f64>> = sources.iter().map(|s| s.probs.entropies()).collect();
    let baselines: Vec<f64> = entropies.iter().map(|e| order_statistic(e, rho)).collect();

    let mut labels = Vec::with_capacity(n);
    let mut votes = Vec::with_capacity(sources.len());
    let mut weights = Vec::with_capacity(sources.len());
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        votes.clear();
        weights.clear();
        for (m, s) in sources.iter().enumerate() {
            if entropies[m][i] <= baselines[m] {
                votes.push(vote_vector(s.probs.row(i)));
                weights.push(s.confidence);
            }
        }
        if votes.is_empty() {
            labels.push(None);
        } else {
            let g = aggregate_vote(&votes, &weights)?;
            labels.push(Some(argmax(&g)));
        }
    }
    PseudoLabelSet::new(labels, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm(rows: &[&[f64]]) -> PredictionMatrix {
        PredictionMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn confidence_examples() {
        let u = pm(&[&[0.25; 4], &[0.25; 4]]);
        assert_eq!(class_confidence(&u).unwrap().scores(), &[0.25; 4]);
        let two = pm(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(class_confidence(&two).unwrap().scores(), &[0.5, 0.5]);
        let three = pm(&[&[0.9, 0.1], &[0.6, 0.4], &[0.3, 0.7]]);
        let s = class_confidence(&three).unwrap();
        assert!((s[0] - 0.6).abs() < 1e-15 && (s[1] - 0.4).abs() < 1e-15);
    }

    /// Rows of a 2-class matrix whose entropies increase with the index.
    fn graded(n: usize) -> PredictionMatrix {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let p = 0.99 - 0.4 * i as f64 / n as f64;
                vec![p, 1.0 - p]
            })
            .collect();
        PredictionMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn baseline_order_statistics() {
        let m = graded(4);
        let e = m.entropies();
        assert_eq!(entropy_baseline(&m, 1.0).unwrap(), e[3]);
        assert_eq!(entropy_baseline(&m, 0.5).unwrap(), e[1]);
        assert_eq!(entropy_baseline(&m, 0.1).unwrap(), e[0]);
        assert!(entropy_baseline(&m, 0.0).is_err());
        assert!(entropy_baseline(&m, 1.5).is_err());
    }

    #[test]
    fn admission_rank_is_exact_on_schedule_grid() {
        for r in 1..=100u32 {
            for n in 1..=60usize {
                let expected = (r as usize * n).div_ceil(100);
                assert_eq!(admission_rank(r as f64 / 100.0, n), expected.max(1), "{r} {n}");
            }
        }
        let s = RhoSchedule::default();
        assert_eq!(admission_rank(s.rho(2), 20), 3);
    }

    #[test]
    fn reliable_set_examples() {
        let a: &[f64] = &[0.5, 0.5];
        let b: &[f64] = &[0.9, 0.1];
        assert_eq!(
            reliable_set(&[a, b], &[f64::INFINITY, f64::INFINITY]).unwrap(),
            vec![0, 1]
        );
        assert!(reliable_set(&[a, b], &[-1.0, -1.0]).unwrap().is_empty());
        let ea = entropy(b);
        assert_eq!(reliable_set(&[b, a], &[ea + 0.1, entropy(a) - 0.1]).unwrap(), vec![0]);
        // comparison is inclusive
        assert_eq!(reliable_set(&[b], &[ea]).unwrap(), vec![0]);
    }

    #[test]
    fn vote_examples() {
        assert_eq!(vote_vector(&[0.7, 0.2, 0.1]), vec![1.0, -1.0, -1.0]);
        assert_eq!(vote_vector(&[0.5, 0.5]), vec![1.0, -1.0]);
        assert_eq!(vote_vector(&[0.25; 4]), vec![1.0, -1.0, -1.0, -1.0]);
    }

    #[test]
    fn aggregate_examples() {
        let w = ClassConfidence::from(vec![0.3, 0.7]);
        assert_eq!(aggregate_vote(&[vec![-1.0, 1.0]], &[&w]).unwrap(), vec![-1.0, 1.0]);

        let eq = ClassConfidence::from(vec![0.5, 0.5]);
        let g = aggregate_vote(&[vec![1.0, -1.0], vec![-1.0, 1.0]], &[&eq, &eq]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);

        let a = ClassConfidence::from(vec![0.8, 0.2]);
        let b = ClassConfidence::from(vec![0.4, 0.6]);
        let g = aggregate_vote(&[vec![1.0, -1.0], vec![-1.0, 1.0]], &[&a, &b]).unwrap();
        assert!((g[0] - 0.4 / 1.2).abs() < 1e-15);
        assert!((g[1] - 0.5).abs() < 1e-15);

        let z = ClassConfidence::from(vec![1.0, 0.0]);
        assert_eq!(aggregate_vote(&[vec![-1.0, 1.0]], &[&z]).unwrap(), vec![-1.0, -1.0]);
        assert!(aggregate_vote(&[], &[]).is_err());
    }

    #[test]
    fn confident_single_source_labels_everything_at_full_rho() {
        let rows: Vec<Vec<f64>> = (0..6).map(|_| vec![0.05, 0.05, 0.85, 0.05]).collect();
        let p = PredictionMatrix::from_rows(&rows).unwrap();
        let conf = class_confidence(&p).unwrap();
        let labels = generate_pseudo_labels(
            &[SourceModel {
                probs: &p,
                confidence: &conf,
            }],
            1.0,
        )
        .unwrap();
        assert!(labels.labels().iter().all(|&l| l == Some(2)));
        assert_eq!(labels.abstain_fraction(), 0.0);
    }

    #[test]
    fn tight_rho_admits_only_the_most_confident_sample() {
        let p = graded(10);
        let conf = class_confidence(&p).unwrap();
        let labels = generate_pseudo_labels(
            &[SourceModel {
                probs: &p,
                confidence: &conf,
            }],
            0.1,
        )
        .unwrap();
        assert_eq!(labels.labeled_count(), 1);
        assert_eq!(labels.get(0), Some(0));
        assert!((labels.abstain_fraction() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn pseudo_label_accuracy_counts_labeled_only() {
        let s = PseudoLabelSet::new(vec![Some(0), None, Some(1), Some(1)], 2).unwrap();
        assert_eq!(s.accuracy(&[0, 1, 0, 1]), Some(2.0 / 3.0));
        assert_eq!(s.vector(1), vec![0.0, 0.0]);
        assert_eq!(PseudoLabelSet::all_abstain(3, 2).accuracy(&[0, 0, 0]), None);
        assert!(PseudoLabelSet::new(vec![Some(2)], 2).is_err());
    }

    #[test]
    fn schedule_caps_at_one() {
        let s = RhoSchedule::default();
        assert_eq!(s.rho(1), 0.1);
        assert!((s.rho(10) - 0.55).abs() < 1e-12);
        assert_eq!(s.rho(100), 1.0);
        assert!(RhoSchedule::new(0.0, 0.1).is_err());
        assert!(RhoSchedule::new(0.5, -0.1).is_err());
    }
}
