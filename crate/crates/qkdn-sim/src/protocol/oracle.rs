//! Adversarial oracles comparing the models' confidentiality.
//!
//! The observer is the same in both attacks: it holds every classical
//! message sent during a trial (the capture log) plus one leaked QKD link
//! key, and knows the circuit layout. Against the trusted-node model the
//! XOR share algebra hands it the secret; against the onion-routing relay
//! the best it can do is strip a single QKD layer and stare at a
//! still-wrapped onion.

use std::collections::BTreeMap;

use super::{Envelope, EnvelopeKind};
use qkdn_core::{sym_decrypt, xor_in_place, Circuit, NodeId, Secret, SymCiphertext, SymKey,
    SECRET_LEN};

/// One compromised QKD link key. `link_index` is the position of the link
/// along the circuit: link `i` joins members `i` and `i + 1`.
#[derive(Debug, Clone)]
pub struct LeakedLinkKey {
    pub link_index: usize,
    pub key: [u8; 32],
}

/// Map each circuit link to the QKD key id observed protecting it, taken
/// from hop envelopes and key-id coordination messages alike.
pub fn observed_link_key_ids(captured: &[Envelope], circuit: &Circuit) -> BTreeMap<usize, String> {
    let mut ids = BTreeMap::new();
    for env in captured {
        let Some(id) = &env.qkd_key_id else { continue };
        let (Some(from), Some(to)) = (circuit.position(&env.from), circuit.position(&env.to))
        else {
            continue;
        };
        if to == from + 1 {
            ids.insert(from, id.clone());
        }
    }
    ids
}

/// Reconstruct the secret from trusted-node traffic.
///
/// Folding the shares of senders `0..=i` telescopes to `S ⊕ K_i`; XORing
/// the leaked `K_i` leaves the secret. Works for any single leaked link.
pub fn recover_secret_tn(
    captured: &[Envelope],
    circuit: &Circuit,
    tn: &NodeId,
    leaked: &LeakedLinkKey,
) -> Option<Secret> {
    let shares: BTreeMap<usize, &Envelope> = captured
        .iter()
        .filter(|e| e.kind == EnvelopeKind::TnShare && e.to == *tn)
        .filter_map(|e| circuit.position(&e.from).map(|pos| (pos, e)))
        .collect();

    let mut acc = vec![0u8; SECRET_LEN];
    for pos in 0..=leaked.link_index {
        let share = shares.get(&pos)?;
        xor_in_place(&mut acc, &share.payload).ok()?;
    }
    xor_in_place(&mut acc, &leaked.key).ok()?;
    Secret::try_from(acc.as_slice()).ok()
}

/// The same observer against onion-routing-relay traffic.
///
/// It tries the leaked key against every hop payload; where the key
/// matches, the QKD layer comes off and exposes the onion at that stage,
/// which is still wrapped in at least one session layer. The oracle guesses
/// the secret only if some decryption bottoms out at a bare 32-byte value.
pub fn recover_secret_orr(captured: &[Envelope], leaked: &LeakedLinkKey) -> Option<Secret> {
    let key = SymKey::from(leaked.key);
    for env in captured.iter().filter(|e| e.kind == EnvelopeKind::OnionHop) {
        if env.payload.len() == SECRET_LEN {
            return Secret::try_from(env.payload.as_slice()).ok();
        }
        let Ok(ct) = SymCiphertext::parse(&env.payload) else {
            continue;
        };
        let Ok(stripped) = sym_decrypt(&key, &ct) else {
            continue;
        };
        if stripped.len() == SECRET_LEN {
            return Secret::try_from(stripped.as_slice()).ok();
        }
        // Anything deeper is session-key material the observer does not have.
    }
    None
}
