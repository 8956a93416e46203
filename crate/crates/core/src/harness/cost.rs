//! Per-client communication cost in bytes.

use crate::baselines::Strategy;

use super::ExperimentConfig;

/// Bytes for one prediction upload: `samples × classes × bytes_per_value`.
pub fn knowledge_upload_bytes(samples: usize, classes: usize, bytes_per_value: u64) -> u64 {
    samples as u64 * classes as u64 * bytes_per_value
}

/// Bytes for one parameter transfer of a model with `count` parameters.
pub fn parameter_bytes(count: usize, bytes_per_value: u64) -> u64 {
    count as u64 * bytes_per_value
}

/// Mebibytes (2^20 bytes).
pub fn bytes_to_mib(bytes: u64) -> f64 {
    bytes as f64 / (1u64 << 20) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientCost {
    pub client: usize,
    /// Size of the client's prediction upload.
    pub knowledge_bytes: u64,
    /// Size of the client's model parameters.
    pub parameter_bytes: u64,
    /// What the strategy sends per round for this client.
    pub per_round_bytes: u64,
    pub total_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub strategy: String,
    /// Client communication rounds; 0 for purely local training.
    pub rounds: usize,
    pub per_client: Vec<ClientCost>,
}

impl CostReport {
    pub fn total_bytes(&self) -> u64 {
        self.per_client.iter().map(|c| c.total_bytes).sum()
    }
}

/// Communication cost of `strategy` under `cfg`. Knowledge strategies send one
/// prediction upload; parameter strategies send the model once per round.
pub fn cost_report(cfg: &ExperimentConfig, strategy: &Strategy) -> CostReport {
    let bpv = cfg.bytes_per_value;
    let rounds = match *strategy {
        Strategy::Local => 0,
        Strategy::FedAvg { rounds } | Strategy::FedProx { rounds, .. } => rounds,
        Strategy::FedDf { .. } | Strategy::MinEntropy { .. } | Strategy::FedOl => 1,
    };
    let fleet = if strategy.is_knowledge_based() {
        cfg.fleet(0)
    } else {
        cfg.parameter_fleet(0)
    };
    let per_client = fleet
        .iter()
        .map(|spec| {
            let knowledge = knowledge_upload_bytes(cfg.dataset.public_count, spec.classes(), bpv);
            let count = spec.arch.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
            let params = parameter_bytes(count, bpv);
            let per_round = match strategy {
                Strategy::Local => 0,
                s if s.is_knowledge_based() => knowledge,
                _ => params,
            };
            ClientCost {
                client: spec.id,
                knowledge_bytes: knowledge,
                parameter_bytes: params,
                per_round_bytes: per_round,
                total_bytes: per_round * rounds as u64,
            }
        })
        .collect();
    CostReport {
        strategy: strategy.name().to_string(),
        rounds,
        per_client,
    }
}
