//! The full pipeline: generate → split → partition → local training →
//! uploads → every selected strategy, for each (seed, partition) group.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::baselines::{run_fedavg, run_feddf, run_fedprox, run_min_entropy, Strategy};
use crate::client::{local_train, predict_public, PredictionUpload};
use crate::data::{make_synthetic, partition, split_indices, Dataset, PartitionScheme, PartitionSpec, PublicPool};
use crate::error::{Error, Result};
use crate::fedol::run_fedol;
use crate::nn::{accuracy, MlpModel};
use crate::seed;

use super::{
    cost_report, one_shot_ledger_check, write_cost_csv, write_metrics_csv, CostReport,
    ExperimentConfig, MessageLedger, MetricRow, KNOWLEDGE_CHANNEL,
};

/// Result of one (seed, partition) group.
#[derive(Debug, Clone)]
pub struct GroupOutcome {
    pub seed: u64,
    pub partition: PartitionScheme,
    pub rows: Vec<MetricRow>,
    /// `(strategy, error)` for every strategy that failed; the others still ran.
    pub failures: Vec<(String, Error)>,
    pub ledger: MessageLedger,
    /// Outcome of the one-shot check on the knowledge channel.
    pub one_shot: Result<()>,
}

impl GroupOutcome {
    /// Final-round test accuracy of `strategy`, if it produced any row.
    pub fn final_accuracy(&self, strategy: &str) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.strategy == strategy)
            .max_by_key(|r| r.round)
            .map(|r| r.test_accuracy)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub groups: Vec<GroupOutcome>,
    pub costs: Vec<CostReport>,
}

impl ExperimentOutput {
    pub fn rows(&self) -> Vec<MetricRow> {
        self.groups.iter().flat_map(|g| g.rows.iter().cloned()).collect()
    }

    pub fn has_failures(&self) -> bool {
        self.groups
            .iter()
            .any(|g| !g.failures.is_empty() || g.one_shot.is_err())
    }
}

/// Runs every (seed, partition) group. Groups are independent and run in
/// parallel; output order follows the config (seed-major).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let jobs: Vec<(u64, PartitionScheme)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.partitions.iter().map(move |&p| (s, p)))
        .collect();
    let groups = jobs
        .par_iter()
        .map(|&(s, p)| run_group(cfg, s, p))
        .collect::<Result<Vec<_>>>()?;
    let costs = cfg.strategy_list().iter().map(|s| cost_report(cfg, s)).collect();
    Ok(ExperimentOutput { groups, costs })
}

struct Split {
    test: Dataset,
    public: PublicPool,
    public_truth: Vec<usize>,
    private: Dataset,
}

fn split_data(cfg: &ExperimentConfig, run_seed: u64) -> Result<Split> {
    let d = &cfg.dataset;
    let full = make_synthetic(
        d.classes,
        d.dims,
        d.per_class,
        d.separation,
        seed::derive(run_seed, "data", &[]),
    )?;
    let (test_idx, rest_idx) = split_indices(full.len(), d.test_count, seed::derive(run_seed, "test", &[]));
    let rest = full.subset(&rest_idx);
    let (pub_idx, priv_idx) = split_indices(rest.len(), d.public_count, seed::derive(run_seed, "public", &[]));
    let public = rest.subset(&pub_idx);
    Ok(Split {
        test: full.subset(&test_idx),
        public_truth: public.labels().to_vec(),
        public: public.unlabeled(),
        private: rest.subset(&priv_idx),
    })
}

fn test_accuracy(model: &MlpModel, test: &Dataset) -> Result<f64> {
    accuracy(model, test.features(), test.labels())
}

fn run_group(cfg: &ExperimentConfig, run_seed: u64, scheme: PartitionScheme) -> Result<GroupOutcome> {
    let split = split_data(cfg, run_seed)?;
    let spec = PartitionSpec {
        scheme,
        num_clients: cfg.client.clients,
        seed: seed::derive(run_seed, &format!("partition:{scheme}"), &[]),
    };
    let shards = partition(&split.private, &spec)?;
    let fleet = cfg.fleet(seed::derive(run_seed, "fleet", &[]));
    let part = scheme.to_string();
    let mut group = GroupOutcome {
        seed: run_seed,
        partition: scheme,
        rows: Vec::new(),
        failures: Vec::new(),
        ledger: MessageLedger::new(),
        one_shot: Ok(()),
    };

    let models = shards
        .par_iter()
        .zip(&fleet)
        .map(|(shard, spec)| local_train(spec, shard))
        .collect::<Result<Vec<_>>>();
    let models = match models {
        Ok(m) => m,
        Err(e) => {
            for s in cfg.strategy_list() {
                group.failures.push((s.name().to_string(), e.clone()));
            }
            return Ok(group);
        }
    };
    let uploads = models
        .iter()
        .enumerate()
        .map(|(k, m)| predict_public(k, m, &split.public))
        .collect::<Result<Vec<PredictionUpload>>>()?;
    for u in &uploads {
        group.ledger.record_upload(KNOWLEDGE_CHANNEL, u.client_id);
    }

    for strategy in cfg.strategy_list() {
        let mut rows = Vec::new();
        let result = run_strategy(cfg, &strategy, run_seed, &part, &split, &shards, &models, &uploads, &mut group.ledger, &mut rows);
        group.rows.append(&mut rows);
        if let Err(e) = result {
            group.failures.push((strategy.name().to_string(), e));
        }
    }
    let clients: Vec<usize> = fleet.iter().map(|s| s.id).collect();
    group.one_shot = one_shot_ledger_check(&group.ledger, KNOWLEDGE_CHANNEL, &clients);
    Ok(group)
}

#[allow(clippy::too_many_arguments)]
fn run_strategy(
    cfg: &ExperimentConfig,
    strategy: &Strategy,
    run_seed: u64,
    part: &str,
    split: &Split,
    shards: &[Dataset],
    models: &[MlpModel],
    uploads: &[PredictionUpload],
    ledger: &mut MessageLedger,
    rows: &mut Vec<MetricRow>,
) -> Result<()> {
    let name = strategy.name();
    let per_round = cost_report(cfg, strategy)
        .per_client
        .first()
        .map(|c| c.per_round_bytes)
        .unwrap_or(0);
    let sub_seed = seed::derive(run_seed, name, &[]);
    let mut eval_err: Option<Error> = None;
    let mut record = |round: usize, model: &MlpModel, rows: &mut Vec<MetricRow>| -> Option<MetricRow> {
        match test_accuracy(model, &split.test) {
            Ok(acc) => {
                let mut row = MetricRow::new(name, part, round, run_seed, acc);
                row.comm_bytes = per_round * round as u64;
                rows.push(row.clone());
                Some(row)
            }
            Err(e) => {
                eval_err.get_or_insert(e);
                None
            }
        }
    };
    match *strategy {
        Strategy::Local => {
            let accs = models
                .iter()
                .map(|m| test_accuracy(m, &split.test))
                .collect::<Result<Vec<f64>>>()?;
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            let max = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            rows.push(MetricRow::new(name, part, 0, run_seed, mean));
            rows.push(MetricRow::new("local_max", part, 0, run_seed, max));
        }
        Strategy::FedAvg { rounds } | Strategy::FedProx { rounds, .. } => {
            let fleet = cfg.parameter_fleet(seed::derive(run_seed, "fleet", &[]));
            let channel = name;
            let mut observe = |round: usize, m: &MlpModel| {
                for spec in &fleet {
                    ledger.record_download(channel, spec.id);
                    ledger.record_upload(channel, spec.id);
                }
                record(round, m, rows);
            };
            match *strategy {
                Strategy::FedProx { mu, .. } => {
                    run_fedprox(shards, &fleet, rounds, mu, sub_seed, &mut observe)?;
                }
                _ => {
                    run_fedavg(shards, &fleet, rounds, sub_seed, &mut observe)?;
                }
            }
        }
        Strategy::FedDf { rounds } | Strategy::MinEntropy { rounds } => {
            let arch = cfg.server_arch();
            let train = cfg.server_train();
            let knowledge = per_round;
            let mut observe = |round: usize, m: &MlpModel| {
                if let Some(mut row) = record(round, m, rows) {
                    row.comm_bytes = knowledge;
                    *rows.last_mut().expect("row just pushed") = row;
                }
            };
            let act = cfg.server.activation;
            if matches!(strategy, Strategy::FedDf { .. }) {
                run_feddf(uploads, &split.public, &arch, act, rounds, &train, sub_seed, &mut observe)?;
            } else {
                run_min_entropy(uploads, &split.public, &arch, act, rounds, &train, sub_seed, &mut observe)?;
            }
        }
        Strategy::FedOl => {
            let params = cfg.fedol_params(run_seed);
            let knowledge = per_round;
            run_fedol(uploads, &split.public, &params, |report, m| {
                if let Some(mut row) = record(report.iteration, m, rows) {
                    row.comm_bytes = knowledge;
                    row.abstain_fraction = Some(report.abstain_fraction);
                    row.loss_d = Some(report.loss_d);
                    row.loss_u = Some(report.loss_u);
                    row.rho = Some(report.rho);
                    row.pseudo_label_accuracy = report.pseudo_labels.accuracy(&split.public_truth);
                    *rows.last_mut().expect("row just pushed") = row;
                }
            })?;
        }
    }
    match eval_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Writes `metrics.csv`, `cost.csv` and `config.resolved` into `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut metrics = Vec::new();
    write_metrics_csv(&mut metrics, &out.rows())?;
    fs::write(dir.join("metrics.csv"), metrics)?;
    let mut cost = Vec::new();
    write_cost_csv(&mut cost, &out.costs)?;
    fs::write(dir.join("cost.csv"), cost)?;
    fs::write(dir.join("config.resolved"), cfg.to_resolved_string())?;
    Ok(())
}
