use super::PseudoLabelSet;
use crate::client::PredictionUpload;
use crate::error::{Error, Result};
use crate::nn::{
    batch_loss_and_grad, entropy, softmax_into, Gradients, Matrix, MlpModel, Objective, PROB_EPS,
};

/// Per-client distillation weights on one sample: softmax of negative entropies.
pub fn distill_weights(uploads: &[PredictionUpload], sample_index: usize) -> Result<Vec<f64>> {
    if uploads.is_empty() {
        return Err(Error::Precondition("no client uploads".into()));
    }
    if let Some(u) = uploads.iter().find(|u| sample_index >= u.samples()) {
        return Err(Error::Shape(format!(
            "sample {sample_index} outside client {}'s {} predictions",
            u.client_id,
            u.samples()
        )));
    }
    let neg: Vec<f64> = uploads
        .iter()
        .map(|u| -entropy(u.probs.row(sample_index)))
        .collect();
    let mut w = vec![0.0; neg.len()];
    softmax_into(&neg, &mut w);
    Ok(w)
}

/// The server objective over the public pool, with per-sample quantities precomputed.
///
/// Sample `i` contributes `Σ_k λ_k KL(p_k ‖ q) + a_i · CE(ŷ_i, q)` where
/// `a_i = τ·N/N_labeled` on labeled samples and 0 on abstentions, so the
/// mean over all samples equals `L_d + τ·L_u` with `L_u` averaged over labeled
/// samples only.
#[derive(Debug, Clone)]
pub struct ServerObjective {
    /// `Σ_k λ_k p_k` per sample.
    mixture: Matrix,
    /// `Σ_k λ_k` per sample (1 up to rounding).
    mass: Vec<f64>,
    /// `Σ_k λ_k H(p_k)` per sample.
    weighted_entropy: Vec<f64>,
    labels: Vec<Option<usize>>,
    label_coef: f64,
}

impl ServerObjective {
    pub fn new(uploads: &[PredictionUpload], pseudo: &PseudoLabelSet, tau: f64) -> Result<Self> {
        let first = uploads
            .first()
            .ok_or_else(|| Error::Precondition("no client uploads".into()))?;
        let (n, c) = (first.samples(), first.classes());
        if let Some(u) = uploads.iter().find(|u| u.samples() != n || u.classes() != c) {
            return Err(Error::Shape(format!(
                "client {} uploaded {}x{}, expected {n}x{c}",
                u.client_id,
                u.samples(),
                u.classes()
            )));
        }
        if pseudo.len() != n || pseudo.classes() != c {
            return Err(Error::Shape(format!(
                "{} pseudo-labels over {} classes for a {n}x{c} pool",
                pseudo.len(),
                pseudo.classes()
            )));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::Precondition(format!("tau must be non-negative, got {tau}")));
        }
        let entropies: Vec<Vec<f64>> = uploads.iter().map(|u| u.probs.entropies()).collect();
        let mut mixture = Matrix::zeros(n, c);
        let mut mass = vec![0.0; n];
        let mut weighted_entropy = vec![0.0; n];
        let mut neg = vec![0.0; uploads.len()];
        let mut lambda = vec![0.0; uploads.len()];
        for i in 0..n {
            for (k, e) in entropies.iter().enumerate() {
                neg[k] = -e[i];
            }
            softmax_into(&neg, &mut lambda);
            let row = mixture.row_mut(i);
            for (k, u) in uploads.iter().enumerate() {
                let l = lambda[k];
                for (m, &p) in row.iter_mut().zip(u.probs.row(i)) {
                    *m += l * p;
                }
                mass[i] += l;
                weighted_entropy[i] += l * entropies[k][i];
            }
        }
        let labeled = pseudo.labeled_count();
        let label_coef = if labeled == 0 {
            0.0
        } else {
            tau * n as f64 / labeled as f64
        };
        Ok(Self {
            mixture,
            mass,
            weighted_entropy,
            labels: pseudo.labels().to_vec(),
            label_coef,
        })
    }

    /// `(L_d, L_u)` of `model` over the whole pool.
    pub fn components(&self, model: &MlpModel, features: &Matrix) -> Result<(f64, f64)> {
        let probs = model.predict_proba(features)?;
        let n = self.labels.len();
        let (mut ld, mut lu, mut labeled) = (0.0, 0.0, 0usize);
        for i in 0..n {
            let q = probs.row(i);
            ld += self.distill_term(i, q);
            if let Some(y) = self.labels[i] {
                lu += -q[y].max(PROB_EPS).ln();
                labeled += 1;
            }
        }
        let lu = if labeled == 0 { 0.0 } else { lu / labeled as f64 };
        Ok((ld / n as f64, lu))
    }

    #[inline]
    fn distill_term(&self, i: usize, q: &[f64]) -> f64 {
        let cross: f64 = self
            .mixture
            .row(i)
            .iter()
            .zip(q)
            .filter(|(&t, _)| t != 0.0)
            .map(|(&t, &qc)| t * qc.max(PROB_EPS).ln())
            .sum();
        -self.weighted_entropy[i] - cross
    }
}

impl Objective for ServerObjective {
    fn samples(&self) -> usize {
        self.labels.len()
    }

    fn classes(&self) -> usize {
        self.mixture.cols()
    }

    fn sample_loss(&self, index: usize, probs: &[f64], dlogits: &mut [f64]) -> f64 {
        let t = self.mixture.row(index);
        let m = self.mass[index];
        for ((d, &q), &tc) in dlogits.iter_mut().zip(probs).zip(t) {
            *d = m * q - tc;
        }
        let mut loss = self.distill_term(index, probs);
        if let (Some(y), true) = (self.labels[index], self.label_coef > 0.0) {
            let a = self.label_coef;
            for (d, &q) in dlogits.iter_mut().zip(probs) {
                *d += a * q;
            }
            dlogits[y] -= a;
            loss += a * -probs[y].max(PROB_EPS).ln();
        }
        loss
    }
}

/// Value and gradient of the full server objective.
#[derive(Debug, Clone)]
pub struct ServerLoss {
    pub total: f64,
    pub distill: f64,
    pub pseudo_label: f64,
    pub gradient: Gradients,
}

/// `L = L_d + τ·L_u` over the whole public pool, with its analytic gradient.
pub fn server_loss(
    server: &MlpModel,
    public: &Matrix,
    uploads: &[PredictionUpload],
    pseudo: &PseudoLabelSet,
    tau: f64,
) -> Result<ServerLoss> {
    let objective = ServerObjective::new(uploads, pseudo, tau)?;
    if public.rows() != objective.samples() {
        return Err(Error::Shape(format!(
            "{} public rows but {} predictions per client",
            public.rows(),
            objective.samples()
        )));
    }
    let rows: Vec<usize> = (0..public.rows()).collect();
    let (_, gradient) = batch_loss_and_grad(server, public, &rows, &objective, None)?;
    let (distill, pseudo_label) = objective.components(server, public)?;
    Ok(ServerLoss {
        total: distill + tau * pseudo_label,
        distill,
        pseudo_label,
        gradient,
    })
}
