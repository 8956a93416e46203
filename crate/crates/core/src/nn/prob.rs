use std::ops::Deref;

use super::Matrix;
use crate::error::{Error, Result};

/// Lower clamp applied to probabilities before taking a log.
pub const PROB_EPS: f64 = 1e-12;

const SUM_TOL: f64 = 1e-9;

/// A discrete distribution over `C` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate_distribution(&values)?;
        Ok(Self(values))
    }

    pub fn uniform(classes: usize) -> Self {
        Self(vec![1.0 / classes as f64; classes])
    }

    pub fn one_hot(classes: usize, class: usize) -> Self {
        let mut v = vec![0.0; classes];
        v[class] = 1.0;
        Self(v)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ProbVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn validate_distribution(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Precondition("empty distribution".into()));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::NumericInput(format!("probability {v} outside [0, 1]")));
    }
    let s: f64 = values.iter().sum();
    if (s - 1.0).abs() > SUM_TOL {
        return Err(Error::NumericInput(format!("probabilities sum to {s}")));
    }
    Ok(())
}

/// Shift-stabilized softmax.
pub fn softmax(logits: &[f64]) -> Result<ProbVector> {
    if logits.is_empty() {
        return Err(Error::Precondition("softmax of an empty vector".into()));
    }
    if let Some(v) = logits.iter().find(|v| !v.is_finite()) {
        return Err(Error::NumericInput(format!("logit {v}")));
    }
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    Ok(ProbVector(out))
}

/// Unchecked softmax for hot loops; `out` must have the length of `logits`.
#[inline]
pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// `-Σ target_c ln max(pred_c, ε)`.
pub fn cross_entropy(target: &[f64], pred: &[f64]) -> Result<f64> {
    check_dims(target, pred)?;
    Ok(-target
        .iter()
        .zip(pred)
        .filter(|(&t, _)| t != 0.0)
        .map(|(&t, &q)| t * q.max(PROB_EPS).ln())
        .sum::<f64>())
}

/// `Σ p_c ln(p_c / max(q_c, ε))`, with `0 ln(0/q) = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_dims(p, q)?;
    Ok(p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a.ln() - b.max(PROB_EPS).ln()))
        .sum())
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "distribution lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `N × C` matrix whose rows are distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix(Matrix);

impl PredictionMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.cols() == 0 {
            return Err(Error::Shape("prediction matrix with zero classes".into()));
        }
        for (i, row) in m.row_iter().enumerate() {
            validate_distribution(row)
                .map_err(|e| Error::NumericInput(format!("row {i}: {e}")))?;
        }
        Ok(Self(m))
    }

    /// Applies a row-wise softmax to a logit matrix.
    pub fn from_logits(logits: &Matrix) -> Self {
        let mut m = Matrix::zeros(logits.rows(), logits.cols());
        for r in 0..logits.rows() {
            softmax_into(logits.row(r), m.row_mut(r));
        }
        Self(m)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn samples(&self) -> usize {
        self.0.rows()
    }

    pub fn classes(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    /// Entropy of every row.
    pub fn entropies(&self) -> Vec<f64> {
        self.0.row_iter().map(entropy).collect()
    }

    pub fn argmaxes(&self) -> Vec<usize> {
        self.0.row_iter().map(argmax).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(&*softmax(&[0.0, 0.0]).unwrap(), &[0.5, 0.5]);
        let p = softmax(&[1000.0, 1000.0, 1000.0]).unwrap();
        assert!(p.iter().all(|&v| close(v, 1.0 / 3.0, 1e-15)));
        // e^x / Σe^x at x = (1, 2, 3), evaluated independently in high precision
        let expected = [0.090_030_573_170_380_46, 0.244_728_471_054_797_6, 0.665_240_955_774_821_9];
        let p = softmax(&[1.0, 2.0, 3.0]).unwrap();
        for (a, b) in p.iter().zip(expected) {
            assert!(close(*a, b, 1e-12), "{a} vs {b}");
        }
    }

    #[test]
    fn softmax_rejects_non_finite_and_empty() {
        assert!(matches!(softmax(&[1.0, f64::NAN]), Err(Error::NumericInput(_))));
        assert!(matches!(softmax(&[f64::INFINITY]), Err(Error::NumericInput(_))));
        assert!(matches!(softmax(&[]), Err(Error::Precondition(_))));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[1.0, 0.0, 0.0]), 0.0);
        assert!(close(entropy(&[0.5, 0.5]), std::f64::consts::LN_2, 1e-15));
        assert!(close(entropy(&[0.25; 4]), 4f64.ln(), 1e-15));
    }

    #[test]
    fn cross_entropy_examples() {
        assert!(cross_entropy(&[1.0, 0.0], &[1.0, 0.0]).unwrap().abs() < 1e-15);
        let ln2 = std::f64::consts::LN_2;
        assert!(close(cross_entropy(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), ln2, 1e-15));
        assert!(close(cross_entropy(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), ln2, 1e-15));
        assert!(matches!(cross_entropy(&[1.0], &[0.5, 0.5]), Err(Error::Shape(_))));
        // clamp keeps a zero prediction finite
        let ce = cross_entropy(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(close(ce, -PROB_EPS.ln(), 1e-12));
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!(close(
            kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap(),
            std::f64::consts::LN_2,
            1e-15
        ));
        assert!(matches!(kl_divergence(&[1.0], &[0.5, 0.5]), Err(Error::Shape(_))));
    }

    #[test]
    fn argmax_prefers_smallest_index_on_ties() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.45, 0.45]), 1);
        assert_eq!(argmax(&[0.25; 4]), 0);
    }

    #[test]
    fn prediction_matrix_validates_rows() {
        assert!(PredictionMatrix::from_rows(&[[0.5, 0.5], [0.9, 0.1]]).is_ok());
        assert!(PredictionMatrix::from_rows(&[[0.5, 0.6]]).is_err());
        assert!(ProbVector::new(vec![1.2, -0.2]).is_err());
    }
}
