mod common;

use fedol_core::client::PredictionUpload;
use fedol_core::fedol::server_loss;
use fedol_core::nn::{batch_loss_and_grad, ProximalPenalty, SoftTargetCrossEntropy};
use fedol_core::{Activation, Matrix, MlpModel, PredictionMatrix, PseudoLabelSet};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

fn central_difference(model: &MlpModel, loss: impl Fn(&MlpModel) -> f64) -> Vec<f64> {
    let base = model.params();
    let mut probe = model.clone();
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + H;
            probe.set_params(&p).unwrap();
            let up = loss(&probe);
            p[i] = base[i] - H;
            probe.set_params(&p).unwrap();
            let down = loss(&probe);
            (up - down) / (2.0 * H)
        })
        .collect()
}

struct Instance {
    server: MlpModel,
    public: Matrix,
    uploads: Vec<PredictionUpload>,
    pseudo: PseudoLabelSet,
    tau: f64,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..12);
    let d = rng.gen_range(2..5);
    let c = rng.gen_range(2..5);
    let k = rng.gen_range(1..4);
    let act = if seed % 2 == 0 { Activation::Tanh } else { Activation::Relu };
    let server = MlpModel::new(&[d, rng.gen_range(2..6), c], act, seed).unwrap();
    let public = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
    let uploads = common::random_predictions(seed + 1000, k, n, c)
        .into_iter()
        .enumerate()
        .map(|(client_id, rows)| PredictionUpload {
            client_id,
            probs: PredictionMatrix::from_rows(&rows).unwrap(),
        })
        .collect();
    let labels = (0..n)
        .map(|_| if rng.gen_bool(0.3) { None } else { Some(rng.gen_range(0..c)) })
        .collect();
    Instance {
        server,
        public,
        uploads,
        pseudo: PseudoLabelSet::new(labels, c).unwrap(),
        tau: rng.gen_range(0.0..1.0),
    }
}

#[test]
fn server_loss_gradient_matches_finite_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let inst = instance(seed);
        let loss = |m: &MlpModel| {
            server_loss(m, &inst.public, &inst.uploads, &inst.pseudo, inst.tau)
                .unwrap()
                .total
        };
        let analytic = server_loss(&inst.server, &inst.public, &inst.uploads, &inst.pseudo, inst.tau)
            .unwrap()
            .gradient
            .flatten();
        let numeric = central_difference(&inst.server, loss);
        worst = worst.max(max_relative_error(&analytic, &numeric));
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn server_loss_decomposes() {
    for seed in 0..5 {
        let inst = instance(seed);
        let l = server_loss(&inst.server, &inst.public, &inst.uploads, &inst.pseudo, inst.tau).unwrap();
        assert!((l.total - (l.distill + inst.tau * l.pseudo_label)).abs() < 1e-12);
        assert!(l.distill >= 0.0 && l.pseudo_label >= 0.0);
        let none = PseudoLabelSet::all_abstain(inst.public.rows(), inst.pseudo.classes());
        let d = server_loss(&inst.server, &inst.public, &inst.uploads, &none, inst.tau).unwrap();
        assert_eq!(d.total, d.distill);
        assert_eq!(d.pseudo_label, 0.0);
    }
}

#[test]
fn matching_a_lone_teacher_costs_nothing() {
    let inst = instance(3);
    let probs = inst.server.predict_proba(&inst.public).unwrap();
    let teacher = vec![PredictionUpload { client_id: 0, probs }];
    let none = PseudoLabelSet::all_abstain(inst.public.rows(), inst.pseudo.classes());
    let l = server_loss(&inst.server, &inst.public, &teacher, &none, 0.0).unwrap();
    assert!(l.total.abs() < 1e-12, "{}", l.total);
}

#[test]
fn supervised_and_proximal_gradients_match_finite_differences() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, d, c) = (8, 3, 3);
        let act = if seed % 2 == 0 { Activation::Tanh } else { Activation::Relu };
        let model = MlpModel::new(&[d, 5, 4, c], act, seed).unwrap();
        let anchor = MlpModel::new(&[d, 5, 4, c], act, seed + 99).unwrap();
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let targets = Matrix::from_rows(&common::random_predictions(seed, 1, n, c)[0]).unwrap();
        let objective = SoftTargetCrossEntropy::new(targets);
        let penalty = ProximalPenalty::new(0.3, &anchor);
        let rows: Vec<usize> = (0..n).collect();
        let loss = |m: &MlpModel| batch_loss_and_grad(m, &x, &rows, &objective, Some(&penalty)).unwrap().0;
        let (_, g) = batch_loss_and_grad(&model, &x, &rows, &objective, Some(&penalty)).unwrap();
        let err = max_relative_error(&g.flatten(), &central_difference(&model, loss));
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}
