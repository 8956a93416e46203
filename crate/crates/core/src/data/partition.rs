use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// How private data is skewed across clients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionScheme {
    /// Per-class client proportions drawn from `Dir(alpha · 1_K)`.
    Dirichlet { alpha: f64 },
    /// Every client holds exactly `classes_per_client` classes.
    Pathological { classes_per_client: usize },
}

impl fmt::Display for PartitionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionScheme::Dirichlet { alpha } => write!(f, "dirichlet:{alpha}"),
            PartitionScheme::Pathological { classes_per_client } => {
                write!(f, "pathological:{classes_per_client}")
            }
        }
    }
}

impl std::str::FromStr for PartitionScheme {
    type Err = Error;

    /// Parses `dirichlet:<alpha>` or `pathological:<classes_per_client>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected `<scheme>:<value>`, got `{s}`")))?;
        match kind.trim() {
            "dirichlet" | "dir" => {
                let alpha: f64 = arg
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad alpha `{arg}`")))?;
                Ok(PartitionScheme::Dirichlet { alpha })
            }
            "pathological" | "path" => {
                let n: usize = arg
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad classes_per_client `{arg}`")))?;
                Ok(PartitionScheme::Pathological {
                    classes_per_client: n,
                })
            }
            other => Err(Error::Parse(format!("unknown partition scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSpec {
    pub scheme: PartitionScheme,
    pub num_clients: usize,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn validate(&self, classes: usize) -> Result<()> {
        if self.num_clients == 0 {
            return Err(Error::Precondition("need at least one client".into()));
        }
        match self.scheme {
            PartitionScheme::Dirichlet { alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::Precondition(format!(
                        "dirichlet alpha must be positive, got {alpha}"
                    )));
                }
            }
            PartitionScheme::Pathological { classes_per_client } => {
                if classes_per_client == 0 || classes_per_client > classes {
                    return Err(Error::Precondition(format!(
                        "classes_per_client must be in 1..={classes}, got {classes_per_client}"
                    )));
                }
                if self.num_clients * classes_per_client < classes {
                    return Err(Error::InfeasiblePartition(format!(
                        "{} clients x {} classes cannot cover {} classes",
                        self.num_clients, classes_per_client, classes
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Row indices of `private` assigned to each client.
pub fn partition_indices(private: &Dataset, spec: &PartitionSpec) -> Result<Vec<Vec<usize>>> {
    spec.validate(private.classes())?;
    if private.is_empty() {
        return Err(Error::Precondition("cannot partition an empty dataset".into()));
    }
    match spec.scheme {
        PartitionScheme::Dirichlet { alpha } => {
            dirichlet_indices(private, spec.num_clients, alpha, spec.seed)
        }
        PartitionScheme::Pathological { classes_per_client } => {
            pathological_indices(private, spec.num_clients, classes_per_client, spec.seed)
        }
    }
}

pub fn partition(private: &Dataset, spec: &PartitionSpec) -> Result<Vec<Dataset>> {
    Ok(partition_indices(private, spec)?
        .iter()
        .map(|idx| private.subset(idx))
        .collect())
}

pub fn partition_dirichlet(
    private: &Dataset,
    num_clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<Dataset>> {
    partition(
        private,
        &PartitionSpec {
            scheme: PartitionScheme::Dirichlet { alpha },
            num_clients,
            seed,
        },
    )
}

pub fn partition_pathological(
    private: &Dataset,
    num_clients: usize,
    classes_per_client: usize,
    seed: u64,
) -> Result<Vec<Dataset>> {
    partition(
        private,
        &PartitionSpec {
            scheme: PartitionScheme::Pathological { classes_per_client },
            num_clients,
            seed,
        },
    )
}

/// Indices of each class, in a seeded random order.
fn shuffled_class_members<R: Rng>(private: &Dataset, rng: &mut R) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); private.classes()];
    for (i, &l) in private.labels().iter().enumerate() {
        members[l].push(i);
    }
    for m in &mut members {
        m.shuffle(rng);
    }
    members
}

/// One draw from `Dir(alpha · 1_k)`.
///
/// Gamma variates for small shapes underflow to zero, so they are drawn in
/// log space via `G(a) = G(a + 1) · U^(1/a)` and normalized with a max shift.
fn sample_dirichlet<R: Rng>(k: usize, alpha: f64, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(alpha + 1.0, 1.0).expect("alpha validated positive");
    let logs: Vec<f64> = (0..k)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let u: f64 = Open01.sample(rng);
            g.ln() + u.ln() / alpha
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Splits `n` into integer counts proportional to `p` (largest remainder,
/// ties to the lower index).
fn largest_remainder(n: usize, p: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = p.iter().map(|&v| v * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn dirichlet_indices(
    private: &Dataset,
    k: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if private.len() < k {
        return Err(Error::Precondition(format!(
            "{} samples cannot give each of {k} clients one",
            private.len()
        )));
    }
    let mut rng = seed::rng(seed);
    let members = shuffled_class_members(private, &mut rng);
    let mut shards = vec![Vec::new(); k];
    for class_members in &members {
        let p = sample_dirichlet(k, alpha, &mut rng);
        let counts = largest_remainder(class_members.len(), &p);
        let mut it = class_members.iter();
        for (shard, &count) in shards.iter_mut().zip(&counts) {
            shard.extend(it.by_ref().take(count));
        }
    }
    // every client trains a model, so none may be empty
    while let Some(empty) = shards.iter().position(Vec::is_empty) {
        let donor = (0..k)
            .max_by(|&a, &b| shards[a].len().cmp(&shards[b].len()).then(b.cmp(&a)))
            .expect("k >= 1");
        let moved = shards[donor].pop().expect("donor has the most samples");
        shards[empty].push(moved);
    }
    for s in &mut shards {
        s.sort_unstable();
    }
    Ok(shards)
}

fn pathological_indices(
    private: &Dataset,
    k: usize,
    per_client: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let c = private.classes();
    let mut rng = seed::rng(seed);
    // A fixed permutation repeated cyclically: each window of `per_client <= c`
    // entries is duplicate-free and each class appears floor or ceil of k*per_client/c times.
    let mut perm: Vec<usize> = (0..c).collect();
    perm.shuffle(&mut rng);
    let mut holders = vec![Vec::new(); c];
    for client in 0..k {
        for slot in 0..per_client {
            let class = perm[(client * per_client + slot) % c];
            holders[class].push(client);
        }
    }
    let members = shuffled_class_members(private, &mut rng);
    let mut shards = vec![Vec::new(); k];
    for (class, class_members) in members.iter().enumerate() {
        let h = &holders[class];
        let base = class_members.len() / h.len();
        let extra = class_members.len() % h.len();
        let mut it = class_members.iter();
        for (j, &client) in h.iter().enumerate() {
            let take = base + usize::from(j < extra);
            shards[client].extend(it.by_ref().take(take));
        }
    }
    for s in &mut shards {
        s.sort_unstable();
    }
    Ok(shards)
}
