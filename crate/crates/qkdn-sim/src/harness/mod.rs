//! Scenario runner, timing aggregation, CSV export, and model comparison.

pub mod compare;
pub mod csv;
pub mod stats;

pub use compare::{compare_models, ComparisonReport};
pub use csv::{export_csv, export_raw, parse_csv};
pub use stats::{slope, summarize, Summary};

use std::sync::Arc;

use thiserror::Error;

use crate::kms::{KmsApi, KmsError};
use crate::netsim::ChannelConfig;
use crate::protocol::{Cluster, ClusterParams, Model};
use qkdn_core::{build_circuit, NodeId, RngState, Topology};

/// Trials silently discarded at the start of every measurement point to
/// keep allocator and scheduler warm-up out of the samples.
pub const WARMUP_TRIALS: usize = 10;

/// Valid circuit sizes for a scenario.
pub const MIN_NODES: usize = 2;
pub const MAX_NODES: usize = 64;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("could not parse {0}")]
    Parse(String),
    #[error("incomplete data: {0}")]
    IncompleteData(String),
    #[error("kms: {0}")]
    Kms(#[from] KmsError),
    #[error("protocol: {0}")]
    Protocol(String),
}

/// One benchmark request: a model exercised over a set of circuit sizes.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: Model,
    pub circuit_sizes: Vec<usize>,
    pub trials: usize,
    pub seed: Option<u64>,
    pub channel_config: ChannelConfig,
    pub orr_qkd_every_hop: bool,
}

impl Scenario {
    pub fn new(model: Model, circuit_sizes: Vec<usize>, trials: usize) -> Self {
        Scenario {
            model,
            circuit_sizes,
            trials,
            seed: None,
            channel_config: ChannelConfig::default(),
            orr_qkd_every_hop: true,
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.circuit_sizes.is_empty() {
            return Err(HarnessError::InvalidScenario("no circuit sizes".into()));
        }
        if let Some(bad) = self
            .circuit_sizes
            .iter()
            .find(|n| **n < MIN_NODES || **n > MAX_NODES)
        {
            return Err(HarnessError::InvalidScenario(format!(
                "circuit size {bad} outside {MIN_NODES}..={MAX_NODES}"
            )));
        }
        if self.trials == 0 {
            return Err(HarnessError::InvalidScenario("trials must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which timer a row aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    EncryptionTime,
    DistributionTime,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::EncryptionTime => "encryption_time",
            Metric::DistributionTime => "distribution_time",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "encryption_time" => Ok(Metric::EncryptionTime),
            "distribution_time" => Ok(Metric::DistributionTime),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

/// One aggregated line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct StatRow {
    pub model: Model,
    pub n_nodes: usize,
    pub metric: Metric,
    pub mean_us: f64,
    pub median_us: f64,
    pub p95_us: f64,
    pub stddev_us: f64,
    pub trials: usize,
}

/// One measured trial, for the optional raw dump.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrial {
    pub model: Model,
    pub n_nodes: usize,
    pub trial: usize,
    pub encryption_us: f64,
    pub distribution_us: f64,
}

/// A trial that errored and was excluded from the samples.
#[derive(Debug, Clone)]
pub struct InvalidTrial {
    pub model: Model,
    pub n_nodes: usize,
    /// Index over all executed trials at this point, warm-up included.
    pub trial: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ScenarioOutcome {
    pub rows: Vec<StatRow>,
    pub raw: Vec<RawTrial>,
    pub invalid: Vec<InvalidTrial>,
    /// All trials executed, warm-up included.
    pub executed: usize,
}

impl ScenarioOutcome {
    pub fn invalid_rate(&self) -> f64 {
        if self.executed == 0 {
            0.0
        } else {
            self.invalid.len() as f64 / self.executed as f64
        }
    }
}

fn point_node_ids(model: Model, n: usize) -> Vec<NodeId> {
    (0..n)
        .map(|i| NodeId::from(format!("{}{n:02}-{i:02}", model.as_str()).as_str()))
        .collect()
}

fn point_tn_id(model: Model, n: usize) -> NodeId {
    NodeId::from(format!("{}{n:02}-tn", model.as_str()).as_str())
}

/// Run every (model, n) point of the scenario: provision links, build the
/// circuit, negotiate where the model needs it, execute warm-up plus
/// measured trials, and aggregate both metrics per point.
pub fn run_scenario(
    scenario: &Scenario,
    kms: Arc<dyn KmsApi>,
) -> Result<ScenarioOutcome, HarnessError> {
    scenario.validate()?;
    let mut root_rng = match scenario.seed {
        Some(seed) => RngState::from_seed(seed),
        None => crate::os_entropy_rng(),
    };

    let mut outcome = ScenarioOutcome::default();
    for &n in &scenario.circuit_sizes {
        let ids = point_node_ids(scenario.model, n);
        let topology = Topology::line(&ids);
        let circuit = build_circuit(&topology, &ids[0], &ids[n - 1])
            .map_err(|e| HarnessError::Protocol(e.to_string()))?;

        let keys_per_link = WARMUP_TRIALS + scenario.trials + 4;
        for (a, b) in circuit.links() {
            kms.provision_link(a, b, keys_per_link)?;
        }

        let mut params = ClusterParams::new(scenario.model, circuit.clone());
        params.channel_config = scenario.channel_config;
        params.orr_qkd_every_hop = scenario.orr_qkd_every_hop;
        if scenario.model == Model::Tn {
            params.tn = Some(point_tn_id(scenario.model, n));
        }
        let mut point_rng = root_rng.fork();
        let mut cluster = Cluster::new(params, kms.clone(), &mut point_rng)
            .map_err(|e| HarnessError::Protocol(e.to_string()))?;

        let mut enc_samples = Vec::with_capacity(scenario.trials);
        let mut dist_samples = Vec::with_capacity(scenario.trials);
        for trial in 0..WARMUP_TRIALS + scenario.trials {
            outcome.executed += 1;
            match cluster.run_trial() {
                Ok(result) => {
                    if !result.delivered_intact() {
                        outcome.invalid.push(InvalidTrial {
                            model: scenario.model,
                            n_nodes: n,
                            trial,
                            reason: "secret mismatch at destination".into(),
                        });
                        continue;
                    }
                    if trial < WARMUP_TRIALS {
                        continue;
                    }
                    let encryption_us = result.encryption_time.as_secs_f64() * 1e6;
                    let distribution_us = result.distribution_time.as_secs_f64() * 1e6;
                    enc_samples.push(encryption_us);
                    dist_samples.push(distribution_us);
                    outcome.raw.push(RawTrial {
                        model: scenario.model,
                        n_nodes: n,
                        trial: trial - WARMUP_TRIALS,
                        encryption_us,
                        distribution_us,
                    });
                }
                Err(failure) => {
                    outcome.invalid.push(InvalidTrial {
                        model: scenario.model,
                        n_nodes: n,
                        trial,
                        reason: failure.to_string(),
                    });
                }
            }
        }
        cluster.shutdown();

        for (metric, samples) in [
            (Metric::EncryptionTime, &enc_samples),
            (Metric::DistributionTime, &dist_samples),
        ] {
            if let Some(s) = summarize(samples) {
                outcome.rows.push(StatRow {
                    model: scenario.model,
                    n_nodes: n,
                    metric,
                    mean_us: s.mean,
                    median_us: s.median,
                    p95_us: s.p95,
                    stddev_us: s.stddev,
                    trials: s.count,
                });
            }
        }
    }
    sort_rows(&mut outcome.rows);
    Ok(outcome)
}

/// Canonical row order: model, then circuit size, then metric.
pub fn sort_rows(rows: &mut [StatRow]) {
    rows.sort_by(|a, b| {
        (a.model, a.n_nodes, a.metric).cmp(&(b.model, b.n_nodes, b.metric))
    });
}
