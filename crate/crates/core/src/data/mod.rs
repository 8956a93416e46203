//! Desk-scale data: synthetic Gaussian-blob tasks, the public/private split,
//! and the Dirichlet and pathological label-skew partitions.

mod dataset;
mod partition;
mod synth;

pub use dataset::{Dataset, PublicPool};
pub use partition::{
    partition, partition_dirichlet, partition_indices, partition_pathological, PartitionScheme,
    PartitionSpec,
};
pub use synth::{make_synthetic, sample_without_replacement, split_indices, split_public};
