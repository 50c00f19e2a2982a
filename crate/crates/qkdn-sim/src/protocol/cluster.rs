//! Thread-per-node execution of the engines.
//!
//! A [`Cluster`] spawns one worker thread per circuit member (plus the
//! trusted node in TN mode) and drives them through any number of trials;
//! node threads communicate only over the netsim channel and the KMS. The
//! one-shot `run_*` operations wrap a single-trial cluster.

use std::collections::BTreeMap;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use thiserror::Error;

use super::roles::{
    negotiate_initiator_half, negotiate_responder_half, run_trial_role, NodeCtx, NodeOutcome, Role,
};
use super::{DistributionResult, Model, ProtocolError};
use crate::kms::KmsApi;
use crate::netsim::{Channel, ChannelConfig, SimBarrier};
use qkdn_core::{Circuit, NodeId, RngState, SessionKeyTable, SymKey};

/// A trial that did not produce a clean result. Benchmarks drop these
/// rather than retry, so every sample left standing is a real run.
#[derive(Debug, Error, Clone)]
pub enum TrialFailure {
    #[error("trial failed at {}", format_failures(.0))]
    Nodes(Vec<(NodeId, ProtocolError)>),
    #[error("trial lost: {0}")]
    Lost(String),
}

fn format_failures(failures: &[(NodeId, ProtocolError)]) -> String {
    failures
        .iter()
        .map(|(node, err)| format!("{node}: {err}"))
        .collect::<Vec<_>>()
        .join("; ")
}

enum Cmd {
    Run,
    Stop,
}

enum ReportBody {
    Ready(Result<(), ProtocolError>),
    Trial(Box<Result<NodeOutcome, ProtocolError>>),
}

struct Report {
    node: NodeId,
    body: ReportBody,
}

/// Cluster construction parameters.
pub struct ClusterParams {
    pub model: Model,
    pub circuit: Circuit,
    /// Trusted-node id; required (and only used) in TN mode.
    pub tn: Option<NodeId>,
    pub channel_config: ChannelConfig,
    pub orr_qkd_every_hop: bool,
    pub recv_timeout: Duration,
    /// Record every envelope for the adversarial oracles.
    pub capture: bool,
    /// Pre-negotiated ORR session keys; `None` negotiates at startup.
    pub session_keys: Option<SessionKeyTable>,
}

impl ClusterParams {
    pub fn new(model: Model, circuit: Circuit) -> Self {
        ClusterParams {
            model,
            circuit,
            tn: None,
            channel_config: ChannelConfig::default(),
            orr_qkd_every_hop: true,
            recv_timeout: Duration::from_secs(5),
            capture: false,
            session_keys: None,
        }
    }
}

pub struct Cluster {
    model: Model,
    circuit: Arc<Circuit>,
    channel: Channel,
    cmd_txs: Vec<mpsc::Sender<Cmd>>,
    report_rx: mpsc::Receiver<Report>,
    workers: Vec<JoinHandle<()>>,
    report_timeout: Duration,
}

impl Cluster {
    /// Spawn the node threads; for ORR without preset keys this blocks
    /// until session-key negotiation completes.
    pub fn new(
        params: ClusterParams,
        kms: Arc<dyn KmsApi>,
        rng: &mut RngState,
    ) -> Result<Self, ProtocolError> {
        let circuit = Arc::new(params.circuit.clone());
        if params.model == Model::Tn {
            let tn = params.tn.as_ref().ok_or_else(|| {
                ProtocolError::Violation("TN model requires a trusted-node id".into())
            })?;
            if circuit.position(tn).is_some() {
                return Err(ProtocolError::Violation(format!(
                    "trusted node {tn} must not be a circuit member"
                )));
            }
        }

        let channel = Channel::new(params.channel_config);
        for node in circuit.nodes() {
            channel.register(node);
        }
        if let Some(tn) = &params.tn {
            if params.model == Model::Tn {
                channel.register(tn);
            }
        }
        if params.capture {
            channel.enable_capture();
        }

        let tn_active = if params.model == Model::Tn {
            params.tn.clone()
        } else {
            None
        };
        let parties = circuit.len() + usize::from(tn_active.is_some());
        let barrier = Arc::new(SimBarrier::new(parties));

        let (report_tx, report_rx) = mpsc::channel::<Report>();
        let mut cmd_txs = Vec::with_capacity(parties);
        let mut workers = Vec::with_capacity(parties);

        let mut spawn = |node: NodeId, role: Role, session_key: Option<SymKey>,
                         session_table: Option<SessionKeyTable>,
                         rng: RngState| {
            let (cmd_tx, cmd_rx) = mpsc::channel::<Cmd>();
            cmd_txs.push(cmd_tx);
            let mut ctx = NodeCtx {
                node: node.clone(),
                role,
                circuit: circuit.clone(),
                tn: tn_active.clone(),
                channel: channel.clone(),
                kms: kms.clone(),
                rng,
                barrier: barrier.clone(),
                recv_timeout: params.recv_timeout,
                orr_every_hop: params.orr_qkd_every_hop,
                session_key,
                session_table,
            };
            let report_tx = report_tx.clone();
            let model = params.model;
            workers.push(std::thread::spawn(move || {
                worker_main(&mut ctx, model, &cmd_rx, &report_tx);
            }));
        };

        for (pos, node) in circuit.nodes().iter().enumerate() {
            let (key, table) = match (&params.session_keys, params.model) {
                (Some(keys), Model::Orr) if pos == 0 => (None, Some(keys.clone())),
                (Some(keys), Model::Orr) => (keys.get(node).cloned(), None),
                _ => (None, None),
            };
            spawn(node.clone(), Role::Member(pos), key, table, rng.fork());
        }
        if let Some(tn) = &tn_active {
            spawn(tn.clone(), Role::TrustedNode, None, None, rng.fork());
        }
        drop(report_tx);

        let cluster = Cluster {
            model: params.model,
            circuit,
            channel,
            cmd_txs,
            report_rx,
            workers,
            report_timeout: params.recv_timeout * 2 + Duration::from_secs(5),
        };

        // Startup: every worker reports readiness (for ORR this is the
        // negotiation result).
        let mut startup_failures = Vec::new();
        for _ in 0..cluster.cmd_txs.len() {
            match cluster.report_rx.recv_timeout(cluster.report_timeout) {
                Ok(Report {
                    node,
                    body: ReportBody::Ready(result),
                }) => {
                    if let Err(err) = result {
                        startup_failures.push((node, err));
                    }
                }
                Ok(_) => {
                    return Err(ProtocolError::Violation(
                        "worker reported a trial before startup finished".into(),
                    ))
                }
                Err(_) => {
                    return Err(ProtocolError::Violation(
                        "worker failed to report readiness".into(),
                    ))
                }
            }
        }
        if let Some((node, err)) = startup_failures.into_iter().next() {
            cluster.stop_workers();
            return Err(ProtocolError::Violation(format!(
                "startup failed at {node}: {err}"
            )));
        }
        Ok(cluster)
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    /// Run one trial across all node threads and assemble the result.
    pub fn run_trial(&mut self) -> Result<DistributionResult, TrialFailure> {
        for tx in &self.cmd_txs {
            if tx.send(Cmd::Run).is_err() {
                return Err(TrialFailure::Lost("a node thread is gone".into()));
            }
        }
        let mut outcomes: BTreeMap<NodeId, NodeOutcome> = BTreeMap::new();
        let mut failures: Vec<(NodeId, ProtocolError)> = Vec::new();
        for _ in 0..self.cmd_txs.len() {
            match self.report_rx.recv_timeout(self.report_timeout) {
                Ok(Report {
                    node,
                    body: ReportBody::Trial(result),
                }) => match *result {
                    Ok(outcome) => {
                        outcomes.insert(node, outcome);
                    }
                    Err(err) => failures.push((node, err)),
                },
                Ok(_) => {
                    failures.push((
                        NodeId::from("?"),
                        ProtocolError::Violation("unexpected startup report".into()),
                    ));
                }
                Err(_) => {
                    return Err(TrialFailure::Lost(
                        "a node thread never reported its trial".into(),
                    ))
                }
            }
        }
        if !failures.is_empty() {
            // Clear anything stale so the next trial starts clean.
            self.channel.drain_all();
            let _ = self.channel.take_captured();
            return Err(TrialFailure::Nodes(failures));
        }
        self.assemble(outcomes)
    }

    fn assemble(
        &self,
        outcomes: BTreeMap<NodeId, NodeOutcome>,
    ) -> Result<DistributionResult, TrialFailure> {
        let missing =
            |what: &str| TrialFailure::Lost(format!("trial completed without {what}"));
        let initiator = outcomes
            .get(self.circuit.initiator())
            .ok_or_else(|| missing("an initiator outcome"))?;
        let destination = outcomes
            .get(self.circuit.destination())
            .ok_or_else(|| missing("a destination outcome"))?;

        let secret_sent = initiator.secret_sent.clone().ok_or_else(|| missing("a secret"))?;
        let secret_received = destination
            .secret_received
            .clone()
            .ok_or_else(|| missing("a recovered secret"))?;
        let t_start = initiator.t_start.ok_or_else(|| missing("a start timestamp"))?;
        let t_end = destination.t_end.ok_or_else(|| missing("an end timestamp"))?;
        let encryption_time = match self.model {
            Model::Tn => outcomes
                .iter()
                .find(|(node, _)| self.circuit.position(node).is_none())
                .and_then(|(_, o)| o.encryption)
                .ok_or_else(|| missing("a trusted-node fold time"))?,
            _ => initiator
                .encryption
                .ok_or_else(|| missing("an initiator encryption time"))?,
        };

        let messages_sent = outcomes.values().map(|o| o.messages_sent).sum();
        let per_node_transcripts = outcomes
            .into_iter()
            .map(|(node, o)| (node, o.transcripts))
            .collect();

        Ok(DistributionResult {
            secret_sent,
            secret_received,
            encryption_time,
            distribution_time: t_end.saturating_duration_since(t_start),
            messages_sent,
            per_node_transcripts,
        })
    }

    fn stop_workers(&self) {
        for tx in &self.cmd_txs {
            let _ = tx.send(Cmd::Stop);
        }
    }

    /// Stop the node threads and wait for them.
    pub fn shutdown(mut self) {
        self.stop_workers();
        for handle in self.workers.drain(..) {
            let _ = handle.join();
        }
    }
}

fn worker_main(
    ctx: &mut NodeCtx,
    model: Model,
    cmd_rx: &mpsc::Receiver<Cmd>,
    report_tx: &mpsc::Sender<Report>,
) {
    // Startup: ORR nodes without preset keys negotiate before any trial;
    // negotiation traffic never counts against the distribution clock.
    let startup = match (model, ctx.role) {
        (Model::Orr, Role::Member(0)) if ctx.session_table.is_none() => negotiate_initiator_half(
            &ctx.node.clone(),
            &ctx.circuit.clone(),
            &ctx.channel,
            &mut ctx.rng,
            ctx.recv_timeout,
        )
        .map(|table| ctx.session_table = Some(table)),
        (Model::Orr, Role::Member(_)) if ctx.session_key.is_none() => {
            let initiator = ctx.circuit.initiator().clone();
            negotiate_responder_half(
                &ctx.node.clone(),
                &initiator,
                &ctx.channel,
                &mut ctx.rng,
                ctx.recv_timeout,
            )
            .map(|key| ctx.session_key = Some(key))
        }
        _ => Ok(()),
    };
    let startup_ok = startup.is_ok();
    let _ = report_tx.send(Report {
        node: ctx.node.clone(),
        body: ReportBody::Ready(startup),
    });
    if !startup_ok {
        return;
    }

    while let Ok(cmd) = cmd_rx.recv() {
        match cmd {
            Cmd::Stop => break,
            Cmd::Run => {
                let outcome = run_trial_role(ctx, model);
                if report_tx
                    .send(Report {
                        node: ctx.node.clone(),
                        body: ReportBody::Trial(Box::new(outcome)),
                    })
                    .is_err()
                {
                    break;
                }
            }
        }
    }
}

/// Run a single key-relay trial over a fresh cluster.
pub fn run_kr(
    circuit: &Circuit,
    channel_config: ChannelConfig,
    kms: Arc<dyn KmsApi>,
    rng: &mut RngState,
) -> Result<DistributionResult, TrialFailure> {
    let mut params = ClusterParams::new(Model::Kr, circuit.clone());
    params.channel_config = channel_config;
    one_shot(params, kms, rng)
}

/// Run a single trusted-node trial over a fresh cluster.
pub fn run_tn(
    circuit: &Circuit,
    tn: &NodeId,
    channel_config: ChannelConfig,
    kms: Arc<dyn KmsApi>,
    rng: &mut RngState,
) -> Result<DistributionResult, TrialFailure> {
    let mut params = ClusterParams::new(Model::Tn, circuit.clone());
    params.tn = Some(tn.clone());
    params.channel_config = channel_config;
    one_shot(params, kms, rng)
}

/// Run a single onion-routing-relay trial over a fresh cluster. Pass
/// pre-negotiated session keys or `None` to negotiate in place.
pub fn run_orr(
    circuit: &Circuit,
    channel_config: ChannelConfig,
    kms: Arc<dyn KmsApi>,
    keys: Option<SessionKeyTable>,
    qkd_every_hop: bool,
    rng: &mut RngState,
) -> Result<DistributionResult, TrialFailure> {
    let mut params = ClusterParams::new(Model::Orr, circuit.clone());
    params.channel_config = channel_config;
    params.session_keys = keys;
    params.orr_qkd_every_hop = qkd_every_hop;
    one_shot(params, kms, rng)
}

fn one_shot(
    params: ClusterParams,
    kms: Arc<dyn KmsApi>,
    rng: &mut RngState,
) -> Result<DistributionResult, TrialFailure> {
    let mut cluster =
        Cluster::new(params, kms, rng).map_err(|e| TrialFailure::Lost(e.to_string()))?;
    let result = cluster.run_trial();
    cluster.shutdown();
    result
}

/// Negotiate a session key with every non-initiator circuit member over
/// the channel, running the responders on ephemeral threads. The table it
/// returns is what the initiator would hold.
pub fn negotiate_session_keys(
    initiator: &NodeId,
    circuit: &Circuit,
    channel: &Channel,
    rng: &mut RngState,
    timeout: Duration,
) -> Result<SessionKeyTable, ProtocolError> {
    if circuit.initiator() != initiator {
        return Err(ProtocolError::Violation(format!(
            "{initiator} is not the initiator of this circuit"
        )));
    }
    for node in circuit.nodes() {
        channel.register(node);
    }
    let mut responders = Vec::new();
    for node in circuit.relays() {
        let node = node.clone();
        let initiator = initiator.clone();
        let channel = channel.clone();
        let mut rng = rng.fork();
        responders.push(std::thread::spawn(move || {
            let key = negotiate_responder_half(&node, &initiator, &channel, &mut rng, timeout)?;
            Ok::<_, ProtocolError>((node, key))
        }));
    }
    let table = negotiate_initiator_half(initiator, circuit, channel, rng, timeout)?;
    for handle in responders {
        let (node, key) = handle
            .join()
            .map_err(|_| ProtocolError::Violation("responder thread panicked".into()))??;
        if table.get(&node) != Some(&key) {
            return Err(ProtocolError::Violation(format!(
                "session keys for {node} disagree across the negotiation"
            )));
        }
    }
    Ok(table)
}
