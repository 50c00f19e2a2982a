//! Layered encryption: session-key table, onion wrap and peel.
//!
//! The innermost layer encrypts the secret under the destination's session
//! key; each successive layer wraps the previous ciphertext under the next
//! node's key, moving from the far end of the circuit back toward the
//! initiator. Peeling one layer per hop in circuit order recovers the
//! 32-byte secret at the destination; peeling out of order fails the
//! padding check with overwhelming probability.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::circuit::{Circuit, NodeId};
use crate::crypto::{sym_decrypt, sym_encrypt, Secret, SymCiphertext, SymKey};
use crate::error::{CryptoError, OnionError};
use crate::rng::RngState;

/// Per-circuit map from node id to its negotiated session key. Holds one
/// entry for every non-initiator member.
#[derive(Debug, Clone, Default)]
pub struct SessionKeyTable {
    keys: BTreeMap<NodeId, SymKey>,
}

impl SessionKeyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, node: NodeId, key: SymKey) {
        self.keys.insert(node, key);
    }

    pub fn get(&self, node: &NodeId) -> Option<&SymKey> {
        self.keys.get(node)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &SymKey)> {
        self.keys.iter()
    }
}

/// The layered ciphertext travelling down the circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Onion {
    bytes: Vec<u8>,
}

impl Onion {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Onion { bytes }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

/// Wrap `secret` for the given circuit: innermost layer under the
/// destination's key, outermost under the first intermediate's.
pub fn wrap_onion(
    secret: &Secret,
    circuit: &Circuit,
    keys: &SessionKeyTable,
    rng: &mut RngState,
) -> Result<Onion, OnionError> {
    let mut bytes = secret.as_bytes().to_vec();
    for node in circuit.relays().iter().rev() {
        let key = keys
            .get(node)
            .ok_or_else(|| OnionError::MissingKey { node: node.clone() })?;
        bytes = sym_encrypt(key, &bytes, rng).to_bytes();
    }
    Ok(Onion::from_bytes(bytes))
}

/// Remove one layer. The destination's peel yields the bare secret bytes.
pub fn peel_layer(onion_bytes: &[u8], key: &SymKey) -> Result<Vec<u8>, CryptoError> {
    let ct = SymCiphertext::parse(onion_bytes)?;
    sym_decrypt(key, &ct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::NodeId;

    fn circuit(ids: &[&str]) -> Circuit {
        Circuit::new(ids.iter().map(|s| NodeId::from(*s)).collect()).unwrap()
    }

    fn table_for(circuit: &Circuit, rng: &mut RngState) -> SessionKeyTable {
        let mut table = SessionKeyTable::new();
        for node in circuit.relays() {
            let mut key = [0u8; 32];
            rng.fill(&mut key);
            table.insert(node.clone(), SymKey::from(key));
        }
        table
    }

    #[test]
    fn peel_in_circuit_order_recovers_secret() {
        let mut rng = RngState::from_seed(21);
        let c = circuit(&["A", "B", "C"]);
        let keys = table_for(&c, &mut rng);
        let secret = Secret::generate(&mut rng);
        let onion = wrap_onion(&secret, &c, &keys, &mut rng).unwrap();

        let after_b = peel_layer(onion.as_bytes(), keys.get(&NodeId::from("B")).unwrap()).unwrap();
        let after_c = peel_layer(&after_b, keys.get(&NodeId::from("C")).unwrap()).unwrap();
        assert_eq!(after_c, secret.as_bytes());
    }

    #[test]
    fn three_node_onion_is_96_bytes() {
        // 32-byte secret -> 64-byte inner layer -> 96-byte outer layer.
        let mut rng = RngState::from_seed(22);
        let c = circuit(&["A", "B", "C"]);
        let keys = table_for(&c, &mut rng);
        let onion = wrap_onion(&Secret::generate(&mut rng), &c, &keys, &mut rng).unwrap();
        assert_eq!(onion.len(), 96);
    }

    #[test]
    fn each_layer_grows_by_32_bytes() {
        // With a 32-byte payload every layer adds 16 (iv) + 16 (padding
        // block), so an n-member circuit yields a 32n-byte onion.
        let mut rng = RngState::from_seed(23);
        let ids: Vec<String> = (0..11).map(|i| format!("n{i:02}")).collect();
        for n in 3..=11usize {
            let c = Circuit::new(ids[..n].iter().map(|s| NodeId::from(s.as_str())).collect())
                .unwrap();
            let keys = table_for(&c, &mut rng);
            let onion = wrap_onion(&Secret::generate(&mut rng), &c, &keys, &mut rng).unwrap();
            assert_eq!(onion.len(), 32 * n, "onion size for {n}-node circuit");
        }
    }

    #[test]
    fn skipping_a_node_fails_padding() {
        let mut rng = RngState::from_seed(24);
        let c = circuit(&["A", "B", "C", "D"]);
        let keys = table_for(&c, &mut rng);
        let onion = wrap_onion(&Secret::generate(&mut rng), &c, &keys, &mut rng).unwrap();
        // C tries to peel before B removed its layer.
        let result = peel_layer(onion.as_bytes(), keys.get(&NodeId::from("C")).unwrap());
        assert_eq!(result, Err(CryptoError::BadPadding));
    }

    #[test]
    fn missing_session_key_is_reported() {
        let mut rng = RngState::from_seed(25);
        let c = circuit(&["A", "B", "C"]);
        let mut keys = table_for(&c, &mut rng);
        keys.keys.remove(&NodeId::from("C"));
        let err = wrap_onion(&Secret::generate(&mut rng), &c, &keys, &mut rng).unwrap_err();
        assert_eq!(err, OnionError::MissingKey { node: NodeId::from("C") });
    }

    #[test]
    fn two_node_circuit_wraps_a_single_layer() {
        let mut rng = RngState::from_seed(26);
        let c = circuit(&["A", "B"]);
        let keys = table_for(&c, &mut rng);
        let secret = Secret::generate(&mut rng);
        let onion = wrap_onion(&secret, &c, &keys, &mut rng).unwrap();
        assert_eq!(onion.len(), 64);
        let peeled = peel_layer(onion.as_bytes(), keys.get(&NodeId::from("B")).unwrap()).unwrap();
        assert_eq!(peeled, secret.as_bytes());
    }
}
