use std::collections::BTreeSet;

use fedol_core::data::{make_synthetic, partition, partition_indices};
use fedol_core::{Dataset, Error, PartitionScheme, PartitionSpec};
use proptest::prelude::*;

fn dataset(classes: usize, per_class: usize, seed: u64) -> Dataset {
    make_synthetic(classes, 3, per_class, 2.0, seed).unwrap()
}

fn check_exact_cover(ds: &Dataset, spec: &PartitionSpec) -> Result<Vec<Vec<usize>>, TestCaseError> {
    let shards = partition_indices(ds, spec).unwrap();
    prop_assert_eq!(shards.len(), spec.num_clients);
    let mut seen = BTreeSet::new();
    for s in &shards {
        prop_assert!(!s.is_empty());
        for &i in s {
            prop_assert!(seen.insert(i), "index {} assigned twice", i);
        }
    }
    prop_assert_eq!(seen.len(), ds.len());
    Ok(shards)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn dirichlet_shards_are_an_exact_cover(
        classes in 2usize..8,
        per_class in 5usize..40,
        clients in 1usize..8,
        alpha in prop::sample::select(vec![0.01, 0.05, 0.3, 1.0, 10.0]),
        seed in any::<u64>(),
    ) {
        let ds = dataset(classes, per_class, seed);
        let spec = PartitionSpec { scheme: PartitionScheme::Dirichlet { alpha }, num_clients: clients, seed };
        check_exact_cover(&ds, &spec)?;
    }

    #[test]
    fn pathological_shards_hold_exactly_their_classes(
        classes in 2usize..8,
        per_class in 10usize..40,
        clients in 1usize..8,
        ic in 1usize..4,
        seed in any::<u64>(),
    ) {
        let ic = ic.min(classes);
        prop_assume!(clients * ic >= classes);
        let ds = dataset(classes, per_class, seed);
        let spec = PartitionSpec { scheme: PartitionScheme::Pathological { classes_per_client: ic }, num_clients: clients, seed };
        check_exact_cover(&ds, &spec)?;
        for shard in partition(&ds, &spec).unwrap() {
            prop_assert_eq!(shard.label_set().len(), ic);
        }
    }

    #[test]
    fn partitioning_is_deterministic(seed in any::<u64>()) {
        let ds = dataset(4, 20, seed);
        for scheme in [PartitionScheme::Dirichlet { alpha: 0.5 }, PartitionScheme::Pathological { classes_per_client: 2 }] {
            let spec = PartitionSpec { scheme, num_clients: 5, seed };
            prop_assert_eq!(partition_indices(&ds, &spec).unwrap(), partition_indices(&ds, &spec).unwrap());
        }
    }
}

fn mean_max_share(alpha: f64, seed: u64) -> f64 {
    let ds = dataset(10, 40, seed);
    let spec = PartitionSpec {
        scheme: PartitionScheme::Dirichlet { alpha },
        num_clients: 10,
        seed,
    };
    let shards = partition(&ds, &spec).unwrap();
    shards
        .iter()
        .map(|s| *s.class_counts().iter().max().unwrap() as f64 / s.len() as f64)
        .sum::<f64>()
        / shards.len() as f64
}

#[test]
fn smaller_alpha_is_more_skewed() {
    let skewed: f64 = (0..20).map(|s| mean_max_share(0.05, s)).sum::<f64>() / 20.0;
    let mild: f64 = (0..20).map(|s| mean_max_share(1.0, s)).sum::<f64>() / 20.0;
    assert!(skewed > mild, "{skewed} vs {mild}");
}

#[test]
fn too_few_class_slots_is_infeasible() {
    let ds = dataset(10, 10, 0);
    let spec = PartitionSpec {
        scheme: PartitionScheme::Pathological { classes_per_client: 2 },
        num_clients: 4,
        seed: 0,
    };
    assert!(matches!(partition(&ds, &spec), Err(Error::InfeasiblePartition(_))));
}
