//! Experiment driver: configuration, the data → clients → server pipeline,
//! the one-shot message ledger, communication cost accounting and CSV output.

mod config;
mod cost;
mod experiment;
mod ledger;
mod metrics;

pub use config::{
    BaselineSettings, ClientSettings, DatasetSettings, ExperimentConfig, FedolSettings,
    ServerSettings,
};
pub use cost::{
    bytes_to_mib, cost_report, knowledge_upload_bytes, parameter_bytes, ClientCost, CostReport,
};
pub use experiment::{run_experiment, write_outputs, ExperimentOutput, GroupOutcome};
pub use ledger::{one_shot_ledger_check, MessageCounts, MessageLedger, KNOWLEDGE_CHANNEL};
pub use metrics::{read_metrics_csv, write_cost_csv, write_metrics_csv, MetricRow, METRICS_HEADER};
