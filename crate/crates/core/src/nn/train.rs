use rand::seq::SliceRandom;

use super::{softmax_into, argmax, cross_entropy, Gradients, Matrix, MlpModel};
use crate::error::{Error, Result};
use crate::seed;

/// Mini-batch SGD settings. Defaults follow the reference regime: 50 epochs,
/// batch 64, learning rate 0.001.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            learning_rate: 0.001,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Precondition("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Precondition("batch_size must be at least 1".into()));
        }
        // zero is accepted: it is the no-op step used to check the loop
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Precondition(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// A per-sample loss on the model's softmax output.
pub trait Objective: Sync {
    fn samples(&self) -> usize;

    fn classes(&self) -> usize;

    /// Returns the loss of sample `index` and writes ∂loss/∂logits into `dlogits`.
    fn sample_loss(&self, index: usize, probs: &[f64], dlogits: &mut [f64]) -> f64;
}

/// An additive term on the parameters (e.g. a proximal anchor).
pub trait Penalty: Sync {
    fn value(&self, model: &MlpModel) -> f64;

    fn add_gradient(&self, model: &MlpModel, grads: &mut Gradients);

    /// When true the trainer applies [`Penalty::prox`] after each data step
    /// instead of adding the explicit gradient.
    fn is_proximal(&self) -> bool {
        false
    }

    fn prox(&self, _model: &mut MlpModel, _lr: f64) {}
}

/// Cross-entropy against fixed (possibly soft) target rows.
#[derive(Debug, Clone)]
pub struct SoftTargetCrossEntropy {
    targets: Matrix,
}

impl SoftTargetCrossEntropy {
    pub fn new(targets: Matrix) -> Self {
        Self { targets }
    }
}

impl Objective for SoftTargetCrossEntropy {
    fn samples(&self) -> usize {
        self.targets.rows()
    }

    fn classes(&self) -> usize {
        self.targets.cols()
    }

    fn sample_loss(&self, index: usize, probs: &[f64], dlogits: &mut [f64]) -> f64 {
        let t = self.targets.row(index);
        let mass: f64 = t.iter().sum();
        for ((d, &q), &tc) in dlogits.iter_mut().zip(probs).zip(t) {
            *d = mass * q - tc;
        }
        cross_entropy(t, probs).expect("target and prediction widths agree")
    }
}

/// `(mu / 2) * ||w - anchor||²`, stepped in closed form.
#[derive(Debug, Clone)]
pub struct ProximalPenalty {
    mu: f64,
    anchor: Vec<f64>,
}

impl ProximalPenalty {
    pub fn new(mu: f64, anchor: &MlpModel) -> Self {
        Self {
            mu,
            anchor: anchor.params(),
        }
    }
}

impl Penalty for ProximalPenalty {
    fn value(&self, model: &MlpModel) -> f64 {
        let sq: f64 = model
            .params()
            .iter()
            .zip(&self.anchor)
            .map(|(w, a)| (w - a) * (w - a))
            .sum();
        0.5 * self.mu * sq
    }

    fn add_gradient(&self, model: &MlpModel, grads: &mut Gradients) {
        let mut off = 0;
        for (layer, g) in model.layers().iter().zip(&mut grads.layers) {
            for (gw, w) in g.weights.iter_mut().zip(&layer.weights) {
                *gw += self.mu * (w - self.anchor[off]);
                off += 1;
            }
            for (gb, b) in g.bias.iter_mut().zip(&layer.bias) {
                *gb += self.mu * (b - self.anchor[off]);
                off += 1;
            }
        }
    }

    fn is_proximal(&self) -> bool {
        true
    }

    /// Exact minimizer of `½||w - v||² + lr·(mu/2)||w - anchor||²`; stable for any `mu`.
    fn prox(&self, model: &mut MlpModel, lr: f64) {
        if self.mu == 0.0 {
            return;
        }
        let k = lr * self.mu;
        let params: Vec<f64> = model
            .params()
            .iter()
            .zip(&self.anchor)
            .map(|(w, a)| (w + k * a) / (1.0 + k))
            .collect();
        model.set_params(&params).expect("anchor has model shape");
    }
}

/// Mean objective over `rows` plus the penalty, with its analytic gradient.
pub fn batch_loss_and_grad(
    model: &MlpModel,
    features: &Matrix,
    rows: &[usize],
    objective: &dyn Objective,
    penalty: Option<&dyn Penalty>,
) -> Result<(f64, Gradients)> {
    let (mut loss, mut grads) = data_loss_and_grad(model, features, rows, objective)?;
    if let Some(p) = penalty {
        loss += p.value(model);
        p.add_gradient(model, &mut grads);
    }
    Ok((loss, grads))
}

fn data_loss_and_grad(
    model: &MlpModel,
    features: &Matrix,
    rows: &[usize],
    objective: &dyn Objective,
) -> Result<(f64, Gradients)> {
    if objective.classes() != model.classes() {
        return Err(Error::Shape(format!(
            "objective has {} classes, model outputs {}",
            objective.classes(),
            model.classes()
        )));
    }
    if rows.is_empty() {
        return Err(Error::Precondition("empty batch".into()));
    }
    let batch = features.select_rows(rows);
    let cache = model.forward_cached(&batch)?;
    let c = model.classes();
    let mut dlogits = Matrix::zeros(rows.len(), c);
    let mut probs = vec![0.0; c];
    let scale = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    for (b, &i) in rows.iter().enumerate() {
        softmax_into(cache.logits.row(b), &mut probs);
        let d = dlogits.row_mut(b);
        loss += objective.sample_loss(i, &probs, d);
        d.iter_mut().for_each(|v| *v *= scale);
    }
    let grads = model.backward(&cache, &dlogits)?;
    Ok((loss * scale, grads))
}

/// Outcome of [`fit`]: the trained model and the mean loss of each epoch.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: MlpModel,
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch SGD on `objective` (+ `penalty`). Shuffling derives only from `cfg.seed`.
pub fn fit(
    mut model: MlpModel,
    features: &Matrix,
    objective: &dyn Objective,
    cfg: &TrainConfig,
    penalty: Option<&dyn Penalty>,
) -> Result<Trained> {
    cfg.validate()?;
    let n = features.rows();
    if n == 0 {
        return Err(Error::Precondition("cannot train on an empty dataset".into()));
    }
    if objective.samples() != n {
        return Err(Error::Shape(format!(
            "{} feature rows but {} objective samples",
            n,
            objective.samples()
        )));
    }
    let mut rng = seed::rng(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (mut loss, mut grads) = data_loss_and_grad(&model, features, chunk, objective)?;
            if let Some(p) = penalty {
                loss += p.value(&model);
                if !p.is_proximal() {
                    p.add_gradient(&model, &mut grads);
                }
            }
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::TrainingDiverged { epoch, loss });
            }
            model.apply_gradient(&grads, cfg.learning_rate);
            if let Some(p) = penalty.filter(|p| p.is_proximal()) {
                p.prox(&mut model, cfg.learning_rate);
            }
            if !model.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    loss: f64::NAN,
                });
            }
            total += loss * chunk.len() as f64;
        }
        epoch_losses.push(total / n as f64);
    }
    Ok(Trained {
        model,
        epoch_losses,
    })
}

/// Supervised training on one-hot `labels`, minimizing mean cross-entropy.
pub fn train_supervised(
    model: MlpModel,
    features: &Matrix,
    labels: &Matrix,
    cfg: &TrainConfig,
    extra_loss: Option<&dyn Penalty>,
) -> Result<MlpModel> {
    if features.rows() != labels.rows() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} label rows",
            features.rows(),
            labels.rows()
        )));
    }
    let objective = SoftTargetCrossEntropy::new(labels.clone());
    fit(model, features, &objective, cfg, extra_loss).map(|t| t.model)
}

/// One-hot encodes class indices.
pub fn one_hot(labels: &[usize], classes: usize) -> Matrix {
    let mut m = Matrix::zeros(labels.len(), classes);
    for (r, &l) in labels.iter().enumerate() {
        m.set(r, l, 1.0);
    }
    m
}

/// Fraction of rows whose argmax logit equals the label.
pub fn accuracy(model: &MlpModel, features: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Ok(0.0);
    }
    let logits = model.forward(features)?;
    let hits = logits
        .row_iter()
        .zip(labels)
        .filter(|(row, &l)| argmax(row) == l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    fn blobs() -> (Matrix, Vec<usize>) {
        // two well separated clusters
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut rng = seed::rng(3);
        use rand_distr::{Distribution, StandardNormal};
        for i in 0..40 {
            let c = i % 2;
            let center = if c == 0 { [-3.0, -3.0] } else { [3.0, 3.0] };
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            rows.push([center[0] + x, center[1] + y]);
            labels.push(c);
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn rejects_bad_configs_and_data() {
        let m = MlpModel::new(&[2, 3, 2], Activation::Relu, 0).unwrap();
        let x = Matrix::zeros(0, 2);
        let y = Matrix::zeros(0, 2);
        let cfg = TrainConfig::default();
        assert!(matches!(
            train_supervised(m.clone(), &x, &y, &cfg, None),
            Err(Error::Precondition(_))
        ));
        let (x, l) = blobs();
        let y = one_hot(&l, 2);
        let zero_epochs = TrainConfig { epochs: 0, ..cfg };
        assert!(train_supervised(m.clone(), &x, &y, &zero_epochs, None).is_err());
        let zero_batch = TrainConfig { batch_size: 0, ..cfg };
        assert!(train_supervised(m, &x, &y, &zero_batch, None).is_err());
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let (x, l) = blobs();
        let y = one_hot(&l, 2);
        let m = MlpModel::new(&[2, 8, 2], Activation::Relu, 11).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            learning_rate: 0.0,
            ..Default::default()
        };
        let out = train_supervised(m.clone(), &x, &y, &cfg, None).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn separable_blobs_are_learned() {
        let (x, l) = blobs();
        let y = one_hot(&l, 2);
        let m = MlpModel::new(&[2, 8, 2], Activation::Relu, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 8,
            learning_rate: 0.1,
            seed: 2,
        };
        let out = train_supervised(m, &x, &y, &cfg, None).unwrap();
        assert!(accuracy(&out, &x, &l).unwrap() >= 0.95);
    }

    #[test]
    fn huge_learning_rate_reports_divergence() {
        let (x, l) = blobs();
        let y = one_hot(&l, 2);
        let m = MlpModel::new(&[2, 8, 2], Activation::Relu, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 4,
            learning_rate: 1e300,
            seed: 0,
        };
        assert!(matches!(
            train_supervised(m, &x, &y, &cfg, None),
            Err(Error::TrainingDiverged { .. })
        ));
    }

    #[test]
    fn proximal_penalty_pins_to_anchor_for_large_mu() {
        let (x, l) = blobs();
        let y = one_hot(&l, 2);
        let anchor = MlpModel::new(&[2, 8, 2], Activation::Relu, 9).unwrap();
        let pen = ProximalPenalty::new(1e6, &anchor);
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 8,
            learning_rate: 0.1,
            seed: 0,
        };
        let out = train_supervised(anchor.clone(), &x, &y, &cfg, Some(&pen)).unwrap();
        let drift = out
            .params()
            .iter()
            .zip(anchor.params())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-4, "drift {drift}");
    }
}
