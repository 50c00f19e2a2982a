//! Mock Key Management Service.
//!
//! Emulates QKD key delivery between adjacent nodes: each provisioned link
//! holds a pool of fresh 256-bit keys, delivered once on the requesting
//! side (`get_enc_keys`) and retrievable by identifier on the peer side
//! (`get_dec_keys`), which is the simulated analogue of QKD link agreement.
//! The service is callable in-process or over the ETSI GS QKD 014-style
//! REST interface in [`http`].

pub mod http;
mod wire;

pub use http::{HttpKmsClient, KmsHttpServer};
pub use wire::{DecRequest, ErrorBody, KeyContainer, KeyEntry, KeyIdEntry, ProvisionRequest};

use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use thiserror::Error;

use qkdn_core::{NodeId, RngState};

/// Keys are always 256 bits: they key AES-256 directly and match the
/// 32-byte secret so the KR/TN XOR is a true one-time pad.
pub const QKD_KEY_SIZE_BITS: u32 = 256;
pub const QKD_KEY_SIZE_BYTES: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KmsError {
    #[error("link {0}–{1} already provisioned")]
    DuplicateLink(NodeId, NodeId),
    #[error("no link between {0} and {1}")]
    UnknownLink(NodeId, NodeId),
    #[error("unknown key id {0}")]
    UnknownKeyId(String),
    #[error("link exhausted: {requested} keys requested, {remaining} remaining")]
    Exhausted { requested: usize, remaining: usize },
    #[error("unsupported key size {0} (only 256 supported)")]
    UnsupportedSize(u32),
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("transport failure: {0}")]
    Transport(String),
}

/// One QKD key as delivered to an SAE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QkdKey {
    pub key_id: String,
    pub key: [u8; QKD_KEY_SIZE_BYTES],
}

struct LinkStore {
    master: NodeId,
    slave: NodeId,
    available: VecDeque<QkdKey>,
    delivered: HashMap<String, QkdKey>,
}

impl LinkStore {
    fn take(&mut self, number: usize) -> Result<Vec<QkdKey>, KmsError> {
        if self.available.len() < number {
            return Err(KmsError::Exhausted {
                requested: number,
                remaining: self.available.len(),
            });
        }
        let mut out = Vec::with_capacity(number);
        for _ in 0..number {
            let key = self.available.pop_front().expect("length checked");
            self.delivered.insert(key.key_id.clone(), key.clone());
            out.push(key);
        }
        Ok(out)
    }
}

fn pair_key(a: &NodeId, b: &NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

struct KmsState {
    links: HashMap<(NodeId, NodeId), LinkStore>,
    rng: RngState,
}

/// The key store behind both the in-process client and the HTTP server.
/// Mutations serialize per service; requests on different links from
/// different threads simply contend on the lock.
pub struct Kms {
    state: Mutex<KmsState>,
}

impl Kms {
    pub fn with_seed(seed: u64) -> Self {
        Self::with_rng(RngState::from_seed(seed))
    }

    pub fn with_rng(rng: RngState) -> Self {
        Kms {
            state: Mutex::new(KmsState {
                links: HashMap::new(),
                rng,
            }),
        }
    }

    pub fn from_entropy() -> Self {
        Self::with_rng(crate::os_entropy_rng())
    }

    /// Remaining and delivered key counts for a link, for inspection.
    pub fn link_stats(&self, a: &NodeId, b: &NodeId) -> Option<(usize, usize)> {
        let state = self.state.lock().unwrap();
        state
            .links
            .get(&pair_key(a, b))
            .map(|l| (l.available.len(), l.delivered.len()))
    }

    /// Provisioned links as (master, slave) pairs, in provisioning role
    /// order rather than normalized order.
    pub fn links(&self) -> Vec<(NodeId, NodeId)> {
        let state = self.state.lock().unwrap();
        let mut links: Vec<(NodeId, NodeId)> = state
            .links
            .values()
            .map(|l| (l.master.clone(), l.slave.clone()))
            .collect();
        links.sort();
        links
    }
}

/// Key-delivery surface shared by the in-process store and the HTTP client.
pub trait KmsApi: Send + Sync {
    /// Fill a fresh link store with `count` keys.
    fn provision_link(&self, sae_a: &NodeId, sae_b: &NodeId, count: usize)
        -> Result<(), KmsError>;

    /// Deliver `number` fresh keys on the `caller` side of the link to
    /// `slave`, consuming them from the pool.
    fn get_enc_keys(
        &self,
        caller: &NodeId,
        slave: &NodeId,
        number: usize,
        size_bits: u32,
    ) -> Result<Vec<QkdKey>, KmsError>;

    /// Resolve previously delivered keys by identifier from the peer side.
    /// Non-consuming: retrieval by id may be repeated.
    fn get_dec_keys(
        &self,
        caller: &NodeId,
        master: &NodeId,
        key_ids: &[String],
    ) -> Result<Vec<QkdKey>, KmsError>;
}

impl KmsApi for Kms {
    fn provision_link(
        &self,
        sae_a: &NodeId,
        sae_b: &NodeId,
        count: usize,
    ) -> Result<(), KmsError> {
        if sae_a == sae_b {
            return Err(KmsError::Malformed("link endpoints must differ".into()));
        }
        if count == 0 {
            return Err(KmsError::Malformed("count must be at least 1".into()));
        }
        let mut state = self.state.lock().unwrap();
        let key = pair_key(sae_a, sae_b);
        if state.links.contains_key(&key) {
            return Err(KmsError::DuplicateLink(sae_a.clone(), sae_b.clone()));
        }
        let mut available = VecDeque::with_capacity(count);
        for _ in 0..count {
            let mut id_bytes = [0u8; 16];
            state.rng.fill(&mut id_bytes);
            let mut key_bytes = [0u8; QKD_KEY_SIZE_BYTES];
            state.rng.fill(&mut key_bytes);
            available.push_back(QkdKey {
                key_id: uuid::Builder::from_random_bytes(id_bytes).into_uuid().to_string(),
                key: key_bytes,
            });
        }
        state.links.insert(
            key,
            LinkStore {
                master: sae_a.clone(),
                slave: sae_b.clone(),
                available,
                delivered: HashMap::new(),
            },
        );
        Ok(())
    }

    fn get_enc_keys(
        &self,
        caller: &NodeId,
        slave: &NodeId,
        number: usize,
        size_bits: u32,
    ) -> Result<Vec<QkdKey>, KmsError> {
        if number == 0 {
            return Err(KmsError::Malformed("number must be at least 1".into()));
        }
        if size_bits != QKD_KEY_SIZE_BITS {
            return Err(KmsError::UnsupportedSize(size_bits));
        }
        let mut state = self.state.lock().unwrap();
        let store = state
            .links
            .get_mut(&pair_key(caller, slave))
            .ok_or_else(|| KmsError::UnknownLink(caller.clone(), slave.clone()))?;
        store.take(number)
    }

    fn get_dec_keys(
        &self,
        caller: &NodeId,
        master: &NodeId,
        key_ids: &[String],
    ) -> Result<Vec<QkdKey>, KmsError> {
        if key_ids.is_empty() {
            return Err(KmsError::Malformed("key_IDs must be non-empty".into()));
        }
        let state = self.state.lock().unwrap();
        let store = state
            .links
            .get(&pair_key(caller, master))
            .ok_or_else(|| KmsError::UnknownLink(caller.clone(), master.clone()))?;
        key_ids
            .iter()
            .map(|id| {
                store
                    .delivered
                    .get(id)
                    .cloned()
                    .ok_or_else(|| KmsError::UnknownKeyId(id.clone()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use uuid::Uuid;

    fn node(s: &str) -> NodeId {
        NodeId::from(s)
    }

    #[test]
    fn provision_fills_the_pool() {
        let kms = Kms::with_seed(1);
        kms.provision_link(&node("A"), &node("B"), 100).unwrap();
        assert_eq!(kms.link_stats(&node("A"), &node("B")), Some((100, 0)));
    }

    #[test]
    fn provisioning_roles_are_remembered() {
        let kms = Kms::with_seed(1);
        kms.provision_link(&node("B"), &node("A"), 1).unwrap();
        assert_eq!(kms.links(), vec![(node("B"), node("A"))]);
    }

    #[test]
    fn duplicate_link_rejected_in_both_orientations() {
        let kms = Kms::with_seed(1);
        kms.provision_link(&node("A"), &node("B"), 2).unwrap();
        assert!(matches!(
            kms.provision_link(&node("A"), &node("B"), 2),
            Err(KmsError::DuplicateLink(..))
        ));
        assert!(matches!(
            kms.provision_link(&node("B"), &node("A"), 2),
            Err(KmsError::DuplicateLink(..))
        ));
    }

    #[test]
    fn provisioned_keys_are_pairwise_distinct() {
        let kms = Kms::with_seed(2);
        kms.provision_link(&node("A"), &node("B"), 200).unwrap();
        let keys = kms.get_enc_keys(&node("A"), &node("B"), 200, 256).unwrap();
        let mut ids: Vec<_> = keys.iter().map(|k| k.key_id.clone()).collect();
        let mut material: Vec<_> = keys.iter().map(|k| k.key).collect();
        ids.sort();
        ids.dedup();
        material.sort();
        material.dedup();
        assert_eq!(ids.len(), 200);
        assert_eq!(material.len(), 200);
    }

    #[test]
    fn enc_delivery_consumes_and_dec_resolves_same_bytes() {
        let kms = Kms::with_seed(3);
        kms.provision_link(&node("A"), &node("B"), 5).unwrap();
        let delivered = kms.get_enc_keys(&node("A"), &node("B"), 1, 256).unwrap();
        assert_eq!(kms.link_stats(&node("A"), &node("B")), Some((4, 1)));
        let resolved = kms
            .get_dec_keys(&node("B"), &node("A"), &[delivered[0].key_id.clone()])
            .unwrap();
        assert_eq!(resolved, delivered);
        // dec-side retrieval is repeatable
        let again = kms
            .get_dec_keys(&node("B"), &node("A"), &[delivered[0].key_id.clone()])
            .unwrap();
        assert_eq!(again, delivered);
    }

    #[test]
    fn dec_keys_preserve_request_order() {
        let kms = Kms::with_seed(4);
        kms.provision_link(&node("A"), &node("B"), 5).unwrap();
        let delivered = kms.get_enc_keys(&node("A"), &node("B"), 3, 256).unwrap();
        let ids: Vec<String> = delivered.iter().rev().map(|k| k.key_id.clone()).collect();
        let resolved = kms.get_dec_keys(&node("B"), &node("A"), &ids).unwrap();
        let resolved_ids: Vec<String> = resolved.iter().map(|k| k.key_id.clone()).collect();
        assert_eq!(resolved_ids, ids);
    }

    #[test]
    fn unknown_key_id_is_an_error() {
        let kms = Kms::with_seed(5);
        kms.provision_link(&node("A"), &node("B"), 1).unwrap();
        let missing = Uuid::from_u128(42).to_string();
        assert_eq!(
            kms.get_dec_keys(&node("B"), &node("A"), std::slice::from_ref(&missing)),
            Err(KmsError::UnknownKeyId(missing))
        );
    }

    #[test]
    fn exhaustion_is_monotone_until_reprovisioned() {
        let kms = Kms::with_seed(6);
        kms.provision_link(&node("A"), &node("B"), 3).unwrap();
        kms.get_enc_keys(&node("A"), &node("B"), 2, 256).unwrap();
        assert!(matches!(
            kms.get_enc_keys(&node("A"), &node("B"), 2, 256),
            Err(KmsError::Exhausted { requested: 2, remaining: 1 })
        ));
        for number in 2..6 {
            assert!(matches!(
                kms.get_enc_keys(&node("A"), &node("B"), number, 256),
                Err(KmsError::Exhausted { .. })
            ));
        }
        // the one remaining key is still deliverable
        assert_eq!(
            kms.get_enc_keys(&node("A"), &node("B"), 1, 256).unwrap().len(),
            1
        );
    }

    #[test]
    fn unsupported_size_and_malformed_number() {
        let kms = Kms::with_seed(7);
        kms.provision_link(&node("A"), &node("B"), 1).unwrap();
        assert_eq!(
            kms.get_enc_keys(&node("A"), &node("B"), 1, 128),
            Err(KmsError::UnsupportedSize(128))
        );
        assert!(matches!(
            kms.get_enc_keys(&node("A"), &node("B"), 0, 256),
            Err(KmsError::Malformed(_))
        ));
    }

    #[test]
    fn unknown_link_is_an_error() {
        let kms = Kms::with_seed(8);
        assert!(matches!(
            kms.get_enc_keys(&node("A"), &node("B"), 1, 256),
            Err(KmsError::UnknownLink(..))
        ));
    }

    #[test]
    fn key_ids_are_v4_uuids() {
        let kms = Kms::with_seed(9);
        kms.provision_link(&node("A"), &node("B"), 10).unwrap();
        let keys = kms.get_enc_keys(&node("A"), &node("B"), 10, 256).unwrap();
        for k in keys {
            let parsed = Uuid::parse_str(&k.key_id).unwrap();
            assert_eq!(parsed.get_version_num(), 4);
        }
    }
}
