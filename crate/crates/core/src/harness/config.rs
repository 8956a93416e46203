//! Flat `key = value` configuration with `[section]` headers.
//!
//! Every key has a default, so an empty file is a valid config. `#` starts a
//! comment. Lists are comma separated; client architectures are a
//! `;`-separated list of hidden-layer lists, cycled over the fleet.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::baselines::Strategy;
use crate::client::ClientSpec;
use crate::data::{PartitionScheme, PartitionSpec};
use crate::error::{Error, Result};
use crate::fedol::{FedolParams, RhoSchedule};
use crate::nn::{Activation, TrainConfig};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSettings {
    pub classes: usize,
    pub dims: usize,
    /// Samples generated per class, before the test and public pools are taken out.
    pub per_class: usize,
    pub separation: f64,
    pub public_count: usize,
    pub test_count: usize,
}

impl Default for DatasetSettings {
    fn default() -> Self {
        Self {
            classes: 10,
            dims: 16,
            per_class: 200,
            separation: 4.0,
            public_count: 500,
            test_count: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientSettings {
    pub clients: usize,
    /// Hidden widths per architecture; client `k` uses entry `k mod len`.
    pub architectures: Vec<Vec<usize>>,
    /// Hidden widths shared by every client under FedAvg and FedProx.
    pub parameter_hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for ClientSettings {
    fn default() -> Self {
        Self {
            clients: 10,
            architectures: vec![vec![16], vec![32, 16]],
            parameter_hidden: vec![32, 16],
            activation: Activation::Relu,
            epochs: 50,
            batch_size: 64,
            learning_rate: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerSettings {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for ServerSettings {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32],
            activation: Activation::Relu,
            epochs: 50,
            batch_size: 64,
            learning_rate: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FedolSettings {
    pub tau: f64,
    pub rho_start: f64,
    pub rho_step: f64,
    pub iterations: usize,
}

impl Default for FedolSettings {
    fn default() -> Self {
        Self {
            tau: 0.2,
            rho_start: 0.1,
            rho_step: 0.05,
            iterations: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSettings {
    pub fedavg_rounds: usize,
    pub fedprox_rounds: usize,
    pub fedprox_mu: f64,
    /// Server training rounds for the one-shot knowledge baselines.
    pub knowledge_rounds: usize,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self {
            fedavg_rounds: 1,
            fedprox_rounds: 1,
            fedprox_mu: 0.01,
            knowledge_rounds: 10,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub bytes_per_value: u64,
    pub strategies: Vec<String>,
    pub dataset: DatasetSettings,
    pub partitions: Vec<PartitionScheme>,
    pub client: ClientSettings,
    pub server: ServerSettings,
    pub fedol: FedolSettings,
    pub baselines: BaselineSettings,
}

pub const STRATEGY_NAMES: [&str; 6] = ["local", "fedavg", "fedprox", "feddf", "min_entropy", "fedol"];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![42],
            bytes_per_value: 8,
            strategies: STRATEGY_NAMES.iter().map(|s| s.to_string()).collect(),
            dataset: DatasetSettings::default(),
            partitions: vec![PartitionScheme::Dirichlet { alpha: 0.5 }],
            client: ClientSettings::default(),
            server: ServerSettings::default(),
            fedol: FedolSettings::default(),
            baselines: BaselineSettings::default(),
        }
    }
}

fn cfg_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| cfg_err(line, format!("invalid value `{v}` for `{key}`")))
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(line, key, s))
        .collect()
}

fn parse_activation(line: usize, v: &str) -> Result<Activation> {
    v.parse()
        .map_err(|e: Error| cfg_err(line, e.to_string()))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Parses the config text; errors carry the offending line number.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| cfg_err(line, "unterminated section header"))?
                    .trim();
                if !["run", "dataset", "partition", "client", "server", "fedol", "baselines"]
                    .contains(&name)
                {
                    return Err(cfg_err(line, format!("unknown section `[{name}]`")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| cfg_err(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if section.is_empty() {
                return Err(cfg_err(line, format!("key `{key}` appears before any section")));
            }
            if !seen.insert((section.clone(), key.to_string())) {
                return Err(cfg_err(line, format!("duplicate key `{key}` in [{section}]")));
            }
            cfg.set(line, &section, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, section: &str, key: &str, v: &str) -> Result<()> {
        match (section, key) {
            ("run", "seed") => self.seeds = vec![parse_value(line, key, v)?],
            ("run", "seeds") => self.seeds = parse_list(line, key, v)?,
            ("run", "bytes_per_value") => self.bytes_per_value = parse_value(line, key, v)?,
            ("run", "strategies") => {
                let names: Vec<String> = parse_list(line, key, v)?;
                if let Some(bad) = names.iter().find(|n| !STRATEGY_NAMES.contains(&n.as_str())) {
                    return Err(cfg_err(line, format!("unknown strategy `{bad}`")));
                }
                self.strategies = names;
            }
            ("dataset", "classes") => self.dataset.classes = parse_value(line, key, v)?,
            ("dataset", "dims") => self.dataset.dims = parse_value(line, key, v)?,
            ("dataset", "per_class") => self.dataset.per_class = parse_value(line, key, v)?,
            ("dataset", "separation") => self.dataset.separation = parse_value(line, key, v)?,
            ("dataset", "public_count") => self.dataset.public_count = parse_value(line, key, v)?,
            ("dataset", "test_count") => self.dataset.test_count = parse_value(line, key, v)?,
            ("partition", "clients") => self.client.clients = parse_value(line, key, v)?,
            ("partition", "scheme") | ("partition", "schemes") => {
                self.partitions = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(|e: Error| cfg_err(line, e.to_string())))
                    .collect::<Result<_>>()?;
            }
            ("client", "architectures") => {
                self.client.architectures = v
                    .split(';')
                    .map(|a| parse_list(line, key, a))
                    .collect::<Result<_>>()?;
            }
            ("client", "parameter_hidden") => self.client.parameter_hidden = parse_list(line, key, v)?,
            ("client", "activation") => self.client.activation = parse_activation(line, v)?,
            ("client", "epochs") => self.client.epochs = parse_value(line, key, v)?,
            ("client", "batch_size") => self.client.batch_size = parse_value(line, key, v)?,
            ("client", "learning_rate") => self.client.learning_rate = parse_value(line, key, v)?,
            ("server", "hidden") => self.server.hidden = parse_list(line, key, v)?,
            ("server", "activation") => self.server.activation = parse_activation(line, v)?,
            ("server", "epochs") => self.server.epochs = parse_value(line, key, v)?,
            ("server", "batch_size") => self.server.batch_size = parse_value(line, key, v)?,
            ("server", "learning_rate") => self.server.learning_rate = parse_value(line, key, v)?,
            ("fedol", "tau") => self.fedol.tau = parse_value(line, key, v)?,
            ("fedol", "rho_start") => self.fedol.rho_start = parse_value(line, key, v)?,
            ("fedol", "rho_step") => self.fedol.rho_step = parse_value(line, key, v)?,
            ("fedol", "iterations") => self.fedol.iterations = parse_value(line, key, v)?,
            ("baselines", "fedavg_rounds") => self.baselines.fedavg_rounds = parse_value(line, key, v)?,
            ("baselines", "fedprox_rounds") => {
                self.baselines.fedprox_rounds = parse_value(line, key, v)?
            }
            ("baselines", "fedprox_mu") => self.baselines.fedprox_mu = parse_value(line, key, v)?,
            ("baselines", "knowledge_rounds") => {
                self.baselines.knowledge_rounds = parse_value(line, key, v)?
            }
            _ => return Err(cfg_err(line, format!("unknown key `{key}` in [{section}]"))),
        }
        Ok(())
    }

    /// Replaces the strategy list with a comma-separated override.
    pub fn set_strategies(&mut self, list: &str) -> Result<()> {
        self.set(0, "run", "strategies", list)?;
        self.validate()
    }

    /// Cross-field checks. Errors here are reported against line 0 (whole file).
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(cfg_err(0, m));
        let d = &self.dataset;
        if self.seeds.is_empty() {
            return err("at least one seed is required".into());
        }
        if self.bytes_per_value == 0 {
            return err("bytes_per_value must be positive".into());
        }
        if self.strategies.is_empty() {
            return err("no strategies selected".into());
        }
        if d.classes < 2 || d.dims < 2 || d.per_class == 0 {
            return err("dataset needs classes >= 2, dims >= 2, per_class >= 1".into());
        }
        if !(d.separation >= 0.0 && d.separation.is_finite()) {
            return err(format!("separation must be non-negative, got {}", d.separation));
        }
        let total = d.classes * d.per_class;
        if d.public_count == 0 || d.test_count == 0 {
            return err("public_count and test_count must be positive".into());
        }
        if d.public_count + d.test_count + self.client.clients > total {
            return err(format!(
                "public_count {} + test_count {} leaves too few of {total} samples for {} clients",
                d.public_count, d.test_count, self.client.clients
            ));
        }
        if self.partitions.is_empty() {
            return err("no partition scheme given".into());
        }
        for scheme in &self.partitions {
            PartitionSpec {
                scheme: *scheme,
                num_clients: self.client.clients,
                seed: 0,
            }
            .validate(d.classes)
            .or_else(|e| err(e.to_string()))?;
        }
        if self.client.architectures.is_empty() {
            return err("client architectures list is empty".into());
        }
        if self
            .client
            .architectures
            .iter()
            .chain([&self.server.hidden, &self.client.parameter_hidden])
            .flatten()
            .any(|&w| w == 0)
        {
            return err("zero-width hidden layer".into());
        }
        self.client_train(0).validate().or_else(|e| err(e.to_string()))?;
        self.server_train().validate().or_else(|e| err(e.to_string()))?;
        if let Err(e) = RhoSchedule::new(self.fedol.rho_start, self.fedol.rho_step) {
            return err(e.to_string());
        }
        if !(self.fedol.tau >= 0.0 && self.fedol.tau.is_finite()) {
            return err(format!("tau must be non-negative, got {}", self.fedol.tau));
        }
        if self.fedol.iterations == 0 {
            return err("fedol iterations must be at least 1".into());
        }
        for s in self.strategy_list() {
            s.validate().or_else(|e| err(e.to_string()))?;
        }
        Ok(())
    }

    /// Selected strategies with their round settings resolved.
    pub fn strategy_list(&self) -> Vec<Strategy> {
        let b = &self.baselines;
        self.strategies
            .iter()
            .filter_map(|name| match name.as_str() {
                "local" => Some(Strategy::Local),
                "fedavg" => Some(Strategy::FedAvg {
                    rounds: b.fedavg_rounds,
                }),
                "fedprox" => Some(Strategy::FedProx {
                    rounds: b.fedprox_rounds,
                    mu: b.fedprox_mu,
                }),
                "feddf" => Some(Strategy::FedDf {
                    rounds: b.knowledge_rounds,
                }),
                "min_entropy" => Some(Strategy::MinEntropy {
                    rounds: b.knowledge_rounds,
                }),
                "fedol" => Some(Strategy::FedOl),
                _ => None,
            })
            .collect()
    }

    fn client_train(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.client.epochs,
            batch_size: self.client.batch_size,
            learning_rate: self.client.learning_rate,
            seed,
        }
    }

    pub fn server_train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.server.epochs,
            batch_size: self.server.batch_size,
            learning_rate: self.server.learning_rate,
            seed: 0,
        }
    }

    /// The knowledge-sharing client fleet; per-client seeds derive from `run_seed`.
    pub fn fleet(&self, run_seed: u64) -> Vec<ClientSpec> {
        let archs = &self.client.architectures;
        self.fleet_with(run_seed, |k| &archs[k % archs.len()])
    }

    /// The uniform fleet used by parameter averaging.
    pub fn parameter_fleet(&self, run_seed: u64) -> Vec<ClientSpec> {
        self.fleet_with(run_seed, |_| &self.client.parameter_hidden)
    }

    fn fleet_with<'a>(&'a self, run_seed: u64, hidden: impl Fn(usize) -> &'a Vec<usize>) -> Vec<ClientSpec> {
        let d = &self.dataset;
        (0..self.client.clients)
            .map(|k| {
                let hidden = hidden(k);
                let mut arch = vec![d.dims];
                arch.extend_from_slice(hidden);
                arch.push(d.classes);
                ClientSpec {
                    id: k,
                    arch,
                    activation: self.client.activation,
                    train: self.client_train(seed::derive(run_seed, "client", &[k as u64])),
                }
            })
            .collect()
    }

    pub fn server_arch(&self) -> Vec<usize> {
        let mut arch = vec![self.dataset.dims];
        arch.extend_from_slice(&self.server.hidden);
        arch.push(self.dataset.classes);
        arch
    }

    pub fn fedol_params(&self, run_seed: u64) -> FedolParams {
        FedolParams {
            server_arch: self.server_arch(),
            activation: self.server.activation,
            schedule: RhoSchedule {
                start: self.fedol.rho_start,
                step: self.fedol.rho_step,
            },
            tau: self.fedol.tau,
            iterations: self.fedol.iterations,
            train: self.server_train(),
            seed: seed::derive(run_seed, "fedol", &[]),
        }
    }

    /// The config with every default written out; parses back to `self`.
    pub fn to_resolved_string(&self) -> String {
        let mut s = String::new();
        let d = &self.dataset;
        let c = &self.client;
        let sv = &self.server;
        let f = &self.fedol;
        let b = &self.baselines;
        let archs: Vec<String> = c.architectures.iter().map(|a| join(a)).collect();
        let _ = write!(
            s,
            "[run]\nseeds = {}\nbytes_per_value = {}\nstrategies = {}\n\n\
             [dataset]\nclasses = {}\ndims = {}\nper_class = {}\nseparation = {}\npublic_count = {}\ntest_count = {}\n\n\
             [partition]\nclients = {}\nschemes = {}\n\n\
             [client]\narchitectures = {}\nparameter_hidden = {}\nactivation = {}\nepochs = {}\nbatch_size = {}\nlearning_rate = {}\n\n\
             [server]\nhidden = {}\nactivation = {}\nepochs = {}\nbatch_size = {}\nlearning_rate = {}\n\n\
             [fedol]\ntau = {}\nrho_start = {}\nrho_step = {}\niterations = {}\n\n\
             [baselines]\nfedavg_rounds = {}\nfedprox_rounds = {}\nfedprox_mu = {}\nknowledge_rounds = {}\n",
            join(&self.seeds),
            self.bytes_per_value,
            self.strategies.join(", "),
            d.classes,
            d.dims,
            d.per_class,
            d.separation,
            d.public_count,
            d.test_count,
            c.clients,
            join(&self.partitions),
            archs.join("; "),
            join(&c.parameter_hidden),
            c.activation.name(),
            c.epochs,
            c.batch_size,
            c.learning_rate,
            join(&sv.hidden),
            sv.activation.name(),
            sv.epochs,
            sv.batch_size,
            sv.learning_rate,
            f.tau,
            f.rho_start,
            f.rho_step,
            f.iterations,
            b.fedavg_rounds,
            b.fedprox_rounds,
            b.fedprox_mu,
            b.knowledge_rounds,
        );
        s
    }
}
