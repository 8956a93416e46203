mod common;

use fedol_core::fedol::{
    aggregate_vote, class_confidence, entropy_baseline, generate_pseudo_labels, reliable_set,
    ClassConfidence, SourceModel,
};
use fedol_core::nn::entropy;
use fedol_core::PredictionMatrix;
use proptest::prelude::*;

fn library_labels(preds: &[Vec<Vec<f64>>], percent: usize) -> Vec<Option<usize>> {
    let mats: Vec<PredictionMatrix> = preds
        .iter()
        .map(|m| PredictionMatrix::from_rows(m).unwrap())
        .collect();
    let confs: Vec<ClassConfidence> = mats.iter().map(|m| class_confidence(m).unwrap()).collect();
    let sources: Vec<SourceModel> = mats
        .iter()
        .zip(&confs)
        .map(|(probs, confidence)| SourceModel { probs, confidence })
        .collect();
    generate_pseudo_labels(&sources, percent as f64 / 100.0)
        .unwrap()
        .labels()
        .to_vec()
}

#[test]
fn matches_reference_on_seeded_instances() {
    for seed in 0..200u64 {
        let k = 1 + (seed % 4) as usize;
        let c = 2 + (seed % 4) as usize;
        let n = 5 + (seed * 7 % 46) as usize;
        let percent = 1 + (seed * 13 % 100) as usize;
        let preds = common::random_predictions(seed, k, n, c);
        assert_eq!(
            library_labels(&preds, percent),
            common::reference_labels(&preds, percent),
            "seed {seed}"
        );
    }
}

#[test]
fn reference_itself_handles_hand_cases() {
    let confident = vec![vec![vec![0.05, 0.05, 0.9]; 6]];
    assert_eq!(common::reference_labels(&confident, 100), vec![Some(2); 6]);
    assert_eq!(library_labels(&confident, 100), vec![Some(2); 6]);
}

#[test]
fn only_the_most_confident_samples_vote_at_small_rho() {
    let rows = vec![vec![0.9, 0.1], vec![0.6, 0.4], vec![0.55, 0.45], vec![0.52, 0.48]];
    let labels = library_labels(&[rows], 10);
    assert_eq!(labels, vec![Some(0), None, None, None]);
}

#[test]
fn aggregate_vote_hand_value() {
    let a = ClassConfidence::from(vec![0.8, 0.2]);
    let b = ClassConfidence::from(vec![0.4, 0.6]);
    let g = aggregate_vote(&[vec![1.0, -1.0], vec![-1.0, 1.0]], &[&a, &b]).unwrap();
    assert!((g[0] - 0.4 / 1.2).abs() < 1e-12);
    assert!((g[1] - 0.5).abs() < 1e-12);
}

#[test]
fn reliable_set_hand_value() {
    let a = [0.98, 0.01, 0.01];
    let b = [0.4, 0.3, 0.3];
    let (ha, hb) = (entropy(&a), entropy(&b));
    let set = reliable_set(&[&a, &b], &[ha + 0.1, hb - 0.1]).unwrap();
    assert_eq!(set, vec![0]);
}

fn distribution_rows(n: usize, c: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-4.0f64..4.0, c), n).prop_map(|rows| {
        rows.into_iter()
            .map(|l| {
                let m = l.iter().cloned().fold(f64::MIN, f64::max);
                let e: Vec<f64> = l.iter().map(|x| (x - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|x| x / s).collect()
            })
            .collect()
    })
}

fn instance() -> impl Strategy<Value = (Vec<Vec<Vec<f64>>>, usize)> {
    (1usize..=4, 1usize..=50, 2usize..=5, 1usize..=100).prop_flat_map(|(k, n, c, pct)| {
        (prop::collection::vec(distribution_rows(n, c), k), Just(pct))
    })
}

proptest! {
    #[test]
    fn oracle_equivalence((preds, pct) in instance()) {
        prop_assert_eq!(library_labels(&preds, pct), common::reference_labels(&preds, pct));
    }

    #[test]
    fn confidence_is_a_distribution(rows in distribution_rows(30, 4)) {
        let m = PredictionMatrix::from_rows(&rows).unwrap();
        let c = class_confidence(&m).unwrap();
        prop_assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn admitted_set_grows_with_rho(rows in distribution_rows(40, 3)) {
        let m = PredictionMatrix::from_rows(&rows).unwrap();
        let h = m.entropies();
        let mut prev: Vec<bool> = vec![false; h.len()];
        let mut prev_base = f64::NEG_INFINITY;
        for step in 0..=18 {
            let rho = 0.1 + 0.05 * step as f64;
            let base = entropy_baseline(&m, rho.min(1.0)).unwrap();
            prop_assert!(base >= prev_base);
            let admitted: Vec<bool> = h.iter().map(|&x| x <= base).collect();
            for (was, now) in prev.iter().zip(&admitted) {
                prop_assert!(!was || *now);
            }
            prev = admitted;
            prev_base = base;
        }
    }

    #[test]
    fn single_source_labels_are_its_argmax_when_all_admitted(rows in distribution_rows(20, 4)) {
        let labels = library_labels(std::slice::from_ref(&rows), 100);
        for (row, l) in rows.iter().zip(labels) {
            let m = PredictionMatrix::from_rows(&[row]).unwrap();
            prop_assert_eq!(l, Some(m.argmaxes()[0]));
        }
    }

    #[test]
    fn argmax_survives_logit_rescaling(
        logits in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 25),
        scale in 0.2f64..5.0,
    ) {
        let soft = |s: f64| -> Vec<Vec<f64>> {
            logits.iter().map(|l| fedol_core::nn::softmax(&l.iter().map(|x| x * s).collect::<Vec<_>>()).unwrap().to_vec()).collect()
        };
        let a = library_labels(&[soft(1.0)], 100);
        let b = library_labels(&[soft(scale)], 100);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn aggregate_components_are_bounded(
        votes in prop::collection::vec(prop::collection::vec(prop::bool::ANY, 4), 1..5),
        conf in prop::collection::vec(distribution_rows(1, 4), 4),
    ) {
        let k = votes.len();
        let v: Vec<Vec<f64>> = votes.iter().map(|r| r.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect()).collect();
        let c: Vec<ClassConfidence> = conf[..k].iter().map(|r| ClassConfidence::from(r[0].clone())).collect();
        let refs: Vec<&ClassConfidence> = c.iter().collect();
        for g in aggregate_vote(&v, &refs).unwrap() {
            prop_assert!((-1.0..=1.0).contains(&g));
        }
    }
}
