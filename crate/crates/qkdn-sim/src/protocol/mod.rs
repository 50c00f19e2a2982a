//! The three key-distribution engines (KR, TN, ORR) as per-node state
//! machines, plus session-key negotiation and the adversarial oracles used
//! to compare their security properties.

mod cluster;
mod oracle;
mod roles;

pub use cluster::{
    negotiate_session_keys, run_kr, run_orr, run_tn, Cluster, ClusterParams, TrialFailure,
};
pub use oracle::{observed_link_key_ids, recover_secret_orr, recover_secret_tn, LeakedLinkKey};
pub use roles::{negotiate_initiator_half, negotiate_responder_half};

use std::collections::BTreeMap;
use std::time::Duration;

use thiserror::Error;

use crate::kms::KmsError;
use crate::netsim::NetError;
use qkdn_core::{CryptoError, NodeId, OnionError, Secret};

/// Which key-distribution model a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Model {
    Kr,
    Tn,
    Orr,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Kr, Model::Tn, Model::Orr];

    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Kr => "kr",
            Model::Tn => "tn",
            Model::Orr => "orr",
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "kr" => Ok(Model::Kr),
            "tn" => Ok(Model::Tn),
            "orr" => Ok(Model::Orr),
            other => Err(format!("unknown model {other:?} (expected kr|tn|orr)")),
        }
    }
}

/// Classical-channel message kinds.
///
/// `KemPk`/`KemCt` carry session-key negotiation, `QkdKeyId` carries
/// link-key identifier coordination; all three are management traffic and
/// excluded from the secret-bearing message count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeKind {
    KemPk,
    KemCt,
    OnionHop,
    KrHop,
    TnShare,
    TnFinal,
    QkdKeyId,
}

impl EnvelopeKind {
    /// Does this message carry (material derived from) the secret?
    pub fn is_secret_bearing(&self) -> bool {
        matches!(
            self,
            EnvelopeKind::OnionHop
                | EnvelopeKind::KrHop
                | EnvelopeKind::TnShare
                | EnvelopeKind::TnFinal
        )
    }
}

/// One classical-channel message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: EnvelopeKind,
    pub payload: Vec<u8>,
    /// Present iff the payload is protected under a QKD link key; names the
    /// key so the receiving side can resolve it from its KMS.
    pub qkd_key_id: Option<String>,
}

/// Everything a completed trial reports.
#[derive(Debug, Clone)]
pub struct DistributionResult {
    pub secret_sent: Secret,
    pub secret_received: Secret,
    /// Model-specific encryption region: the initiator XOR (KR), the
    /// trusted-node fold (TN), or onion construction plus the outer QKD
    /// layer (ORR).
    pub encryption_time: Duration,
    /// From the moment the secret exists at the initiator until the
    /// destination recovers it.
    pub distribution_time: Duration,
    /// Secret-bearing messages only; negotiation and key-id coordination
    /// are not counted.
    pub messages_sent: u32,
    /// Plaintext byte-strings each node observed at its own trust boundary
    /// during the timed phase.
    pub per_node_transcripts: BTreeMap<NodeId, Vec<Vec<u8>>>,
}

impl DistributionResult {
    pub fn delivered_intact(&self) -> bool {
        self.secret_sent == self.secret_received
    }
}

/// Why a node's part of a trial failed.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("channel: {0}")]
    Net(#[from] NetError),
    #[error("kms: {0}")]
    Kms(#[from] KmsError),
    #[error("crypto: {0}")]
    Crypto(#[from] CryptoError),
    #[error("onion: {0}")]
    Onion(#[from] OnionError),
    #[error("protocol violation: {0}")]
    Violation(String),
}
