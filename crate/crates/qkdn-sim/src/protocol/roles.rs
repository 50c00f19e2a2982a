//! Per-node behaviour for one trial of each model.
//!
//! A trial has two phases separated by a barrier. Setup (untimed) acquires
//! QKD link keys: the node earlier on a link fetches a fresh key and, where
//! no in-band hop message will carry the identifier, coordinates it with a
//! `QkdKeyId` management envelope. The timed phase is the protocol proper:
//! the distribution clock starts when the initiator's secret exists and
//! stops when the destination recovers it.

use std::sync::Arc;
use std::time::{Duration, Instant};

use super::{Envelope, EnvelopeKind, Model, ProtocolError};
use crate::kms::{KmsApi, QkdKey, QKD_KEY_SIZE_BITS};
use crate::netsim::{Channel, SimBarrier};
use qkdn_core::{
    kem_decapsulate, kem_encapsulate, kem_keygen, peel_layer, sym_decrypt, sym_encrypt,
    wrap_onion, xor_in_place, xor_otp, Circuit, KemCiphertext, KemPublicKey, NodeId, RngState,
    Secret, SessionKeyTable, SymCiphertext, SymKey, SECRET_LEN,
};

/// What a node contributes to the trial's bookkeeping.
#[derive(Debug, Default, Clone)]
pub(crate) struct NodeOutcome {
    pub t_start: Option<Instant>,
    pub encryption: Option<Duration>,
    pub t_end: Option<Instant>,
    pub secret_sent: Option<Secret>,
    pub secret_received: Option<Secret>,
    pub messages_sent: u32,
    pub transcripts: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Role {
    /// Circuit member at this position.
    Member(usize),
    /// The trusted node itself (TN model only).
    TrustedNode,
}

pub(crate) struct NodeCtx {
    pub node: NodeId,
    pub role: Role,
    pub circuit: Arc<Circuit>,
    pub tn: Option<NodeId>,
    pub channel: Channel,
    pub kms: Arc<dyn KmsApi>,
    pub rng: RngState,
    pub barrier: Arc<SimBarrier>,
    pub recv_timeout: Duration,
    pub orr_every_hop: bool,
    /// ORR, non-initiator: this node's negotiated session key.
    pub session_key: Option<SymKey>,
    /// ORR, initiator: the full table.
    pub session_table: Option<SessionKeyTable>,
}

impl NodeCtx {
    fn position(&self) -> usize {
        match self.role {
            Role::Member(p) => p,
            Role::TrustedNode => unreachable!("trusted node has no circuit position"),
        }
    }

    fn prev(&self) -> &NodeId {
        &self.circuit.nodes()[self.position() - 1]
    }

    fn next(&self) -> &NodeId {
        &self.circuit.nodes()[self.position() + 1]
    }

    fn is_destination(&self) -> bool {
        self.position() + 1 == self.circuit.len()
    }

    fn send(
        &self,
        to: NodeId,
        kind: EnvelopeKind,
        payload: Vec<u8>,
        qkd_key_id: Option<String>,
    ) -> Result<(), ProtocolError> {
        self.channel.send(Envelope {
            from: self.node.clone(),
            to,
            kind,
            payload,
            qkd_key_id,
        })?;
        Ok(())
    }

    fn recv_expect(&self, kind: EnvelopeKind, from: &NodeId) -> Result<Envelope, ProtocolError> {
        let env = self.channel.recv(&self.node, self.recv_timeout)?;
        if env.kind != kind || env.from != *from {
            return Err(ProtocolError::Violation(format!(
                "{} expected {kind:?} from {from}, got {:?} from {}",
                self.node, env.kind, env.from
            )));
        }
        Ok(env)
    }

    fn fetch_enc_key(&self, peer: &NodeId) -> Result<QkdKey, ProtocolError> {
        let mut keys = self
            .kms
            .get_enc_keys(&self.node, peer, 1, QKD_KEY_SIZE_BITS)?;
        Ok(keys.remove(0))
    }

    fn fetch_dec_key(&self, peer: &NodeId, key_id: &str) -> Result<QkdKey, ProtocolError> {
        let mut keys = self
            .kms
            .get_dec_keys(&self.node, peer, &[key_id.to_string()])?;
        Ok(keys.remove(0))
    }

    fn barrier(&self) -> Result<(), ProtocolError> {
        self.barrier.wait(self.recv_timeout)?;
        Ok(())
    }

    fn require_qkd_key_id(env: &Envelope) -> Result<&str, ProtocolError> {
        env.qkd_key_id.as_deref().ok_or_else(|| {
            ProtocolError::Violation(format!(
                "{:?} from {} is missing its QKD key id",
                env.kind, env.from
            ))
        })
    }
}

/// Dispatch one trial's worth of behaviour for this node.
pub(crate) fn run_trial_role(ctx: &mut NodeCtx, model: Model) -> Result<NodeOutcome, ProtocolError> {
    match (model, ctx.role) {
        (Model::Kr, Role::Member(_)) => kr_member(ctx),
        (Model::Tn, Role::Member(_)) => tn_member(ctx),
        (Model::Tn, Role::TrustedNode) => tn_hub(ctx),
        (Model::Orr, Role::Member(_)) => orr_member(ctx),
        (model, role) => Err(ProtocolError::Violation(format!(
            "role {role:?} has no part in model {model}"
        ))),
    }
}

/// Key relay: hop-by-hop XOR with per-link QKD keys. Every intermediate
/// decrypts to the bare secret before re-encrypting toward the next node.
fn kr_member(ctx: &mut NodeCtx) -> Result<NodeOutcome, ProtocolError> {
    let pos = ctx.position();
    let mut out = NodeOutcome::default();

    let outbound = if !ctx.is_destination() {
        Some(ctx.fetch_enc_key(&ctx.next().clone())?)
    } else {
        None
    };
    ctx.barrier()?;

    if pos == 0 {
        let secret = Secret::generate(&mut ctx.rng);
        let t_start = Instant::now();
        let key = outbound.expect("initiator has a next hop");
        let mut payload = secret.as_bytes().to_vec();

        // the timed region is exactly the pad application
        let enc_start = Instant::now();
        xor_in_place(&mut payload, &key.key)?;
        out.encryption = Some(enc_start.elapsed());

        ctx.send(
            ctx.next().clone(),
            EnvelopeKind::KrHop,
            payload,
            Some(key.key_id),
        )?;
        out.messages_sent = 1;
        out.t_start = Some(t_start);
        out.transcripts.push(secret.as_bytes().to_vec());
        out.secret_sent = Some(secret);
        return Ok(out);
    }

    let env = ctx.recv_expect(EnvelopeKind::KrHop, &ctx.prev().clone())?;
    let key_id = NodeCtx::require_qkd_key_id(&env)?.to_string();
    let inbound = ctx.fetch_dec_key(&ctx.prev().clone(), &key_id)?;
    let plaintext = xor_otp(&env.payload, &inbound.key)?;

    if ctx.is_destination() {
        let t_end = Instant::now();
        out.t_end = Some(t_end);
        out.secret_received = Some(Secret::try_from(plaintext.as_slice())?);
        out.transcripts.push(plaintext);
    } else {
        // the relay sees the secret in the clear here
        out.transcripts.push(plaintext.clone());
        let key = outbound.expect("relay has a next hop");
        let forwarded = xor_otp(&plaintext, &key.key)?;
        ctx.send(
            ctx.next().clone(),
            EnvelopeKind::KrHop,
            forwarded,
            Some(key.key_id),
        )?;
        out.messages_sent = 1;
    }
    Ok(out)
}

/// Trusted node, circuit-member side: everyone but the destination sends an
/// XOR share to the TN, concurrently. Link-key identifiers are coordinated
/// with the successor during setup since no hop message will carry them.
fn tn_member(ctx: &mut NodeCtx) -> Result<NodeOutcome, ProtocolError> {
    let pos = ctx.position();
    let tn = ctx
        .tn
        .clone()
        .ok_or_else(|| ProtocolError::Violation("TN model without a trusted node".into()))?;
    let mut out = NodeOutcome::default();

    let outbound = if !ctx.is_destination() {
        let key = ctx.fetch_enc_key(&ctx.next().clone())?;
        ctx.send(
            ctx.next().clone(),
            EnvelopeKind::QkdKeyId,
            Vec::new(),
            Some(key.key_id.clone()),
        )?;
        Some(key)
    } else {
        None
    };
    let inbound = if pos > 0 {
        let env = ctx.recv_expect(EnvelopeKind::QkdKeyId, &ctx.prev().clone())?;
        let key_id = NodeCtx::require_qkd_key_id(&env)?.to_string();
        Some(ctx.fetch_dec_key(&ctx.prev().clone(), &key_id)?)
    } else {
        None
    };
    ctx.barrier()?;

    if pos == 0 {
        let secret = Secret::generate(&mut ctx.rng);
        let t_start = Instant::now();
        let key = outbound.expect("initiator has a next hop");
        let share = xor_otp(secret.as_bytes(), &key.key)?;
        ctx.send(tn, EnvelopeKind::TnShare, share, None)?;
        out.messages_sent = 1;
        out.t_start = Some(t_start);
        out.transcripts.push(secret.as_bytes().to_vec());
        out.secret_sent = Some(secret);
    } else if !ctx.is_destination() {
        let inbound = inbound.expect("interior node has a previous hop");
        let key = outbound.expect("interior node has a next hop");
        let share = xor_otp(&inbound.key, &key.key)?;
        out.transcripts.push(share.clone());
        ctx.send(tn, EnvelopeKind::TnShare, share, None)?;
        out.messages_sent = 1;
    } else {
        let env = ctx.recv_expect(EnvelopeKind::TnFinal, &tn)?;
        let inbound = inbound.expect("destination has a previous hop");
        let plaintext = xor_otp(&env.payload, &inbound.key)?;
        let t_end = Instant::now();
        out.t_end = Some(t_end);
        out.secret_received = Some(Secret::try_from(plaintext.as_slice())?);
        out.transcripts.push(plaintext);
    }
    Ok(out)
}

/// Trusted node, hub side: collect one share from every non-destination
/// member, fold them, forward the result. The fold equals
/// `secret ⊕ key(last link)` by the telescoping XOR identity.
fn tn_hub(ctx: &mut NodeCtx) -> Result<NodeOutcome, ProtocolError> {
    let n = ctx.circuit.len();
    let mut out = NodeOutcome::default();
    let sender_index: std::collections::HashMap<NodeId, usize> = ctx
        .circuit
        .nodes()
        .iter()
        .take(n - 1)
        .enumerate()
        .map(|(pos, node)| (node.clone(), pos))
        .collect();
    ctx.barrier()?;

    let mut shares = Vec::with_capacity(n - 1);
    for _ in 0..n - 1 {
        shares.push(ctx.channel.recv(&ctx.node, ctx.recv_timeout)?);
    }

    // The timed region: processing each received message (kind check,
    // sender accounting — the fold is only correct if every expected
    // sender contributed exactly once) into the destination ciphertext.
    let enc_start = Instant::now();
    let mut seen = vec![false; n - 1];
    let mut acc = vec![0u8; SECRET_LEN];
    for env in &shares {
        if env.kind != EnvelopeKind::TnShare {
            return Err(ProtocolError::Violation(format!(
                "trusted node received {:?} from {}",
                env.kind, env.from
            )));
        }
        let pos = *sender_index.get(&env.from).ok_or_else(|| {
            ProtocolError::Violation(format!("share from non-member {}", env.from))
        })?;
        if std::mem::replace(&mut seen[pos], true) {
            return Err(ProtocolError::Violation(format!(
                "duplicate share from {}",
                env.from
            )));
        }
        xor_in_place(&mut acc, &env.payload)?;
    }
    let final_payload = acc;
    out.encryption = Some(enc_start.elapsed());

    for env in &shares {
        out.transcripts.push(env.payload.clone());
    }
    out.transcripts.push(final_payload.clone());

    let destination = ctx.circuit.destination().clone();
    ctx.send(destination, EnvelopeKind::TnFinal, final_payload, None)?;
    out.messages_sent = 1;
    Ok(out)
}

/// Onion-routing relay: the initiator wraps the secret once per
/// non-initiator member and QKD-encrypts the result toward the first hop.
/// Each hop strips its QKD layer, peels its own session layer and (in
/// every-hop mode) re-encrypts under the next link's QKD key.
fn orr_member(ctx: &mut NodeCtx) -> Result<NodeOutcome, ProtocolError> {
    let pos = ctx.position();
    let mut out = NodeOutcome::default();

    let qkd_wraps_forward_hop = !ctx.is_destination() && (pos == 0 || ctx.orr_every_hop);
    let outbound = if qkd_wraps_forward_hop {
        Some(ctx.fetch_enc_key(&ctx.next().clone())?)
    } else {
        None
    };
    ctx.barrier()?;

    if pos == 0 {
        let table = ctx
            .session_table
            .clone()
            .ok_or_else(|| ProtocolError::Violation("initiator has no session keys".into()))?;
        let secret = Secret::generate(&mut ctx.rng);
        let t_start = Instant::now();
        let key = outbound.expect("initiator has a next hop");
        let link_key = SymKey::from(key.key);

        let enc_start = Instant::now();
        let onion = wrap_onion(&secret, &ctx.circuit, &table, &mut ctx.rng)?;
        let wire = sym_encrypt(&link_key, onion.as_bytes(), &mut ctx.rng).to_bytes();
        out.encryption = Some(enc_start.elapsed());

        ctx.send(
            ctx.next().clone(),
            EnvelopeKind::OnionHop,
            wire,
            Some(key.key_id),
        )?;
        out.messages_sent = 1;
        out.t_start = Some(t_start);
        out.transcripts.push(secret.as_bytes().to_vec());
        out.secret_sent = Some(secret);
        return Ok(out);
    }

    let env = ctx.recv_expect(EnvelopeKind::OnionHop, &ctx.prev().clone())?;
    let onion_bytes = match env.qkd_key_id.as_deref() {
        Some(key_id) => {
            let inbound = ctx.fetch_dec_key(&ctx.prev().clone(), key_id)?;
            let ct = SymCiphertext::parse(&env.payload)?;
            sym_decrypt(&SymKey::from(inbound.key), &ct)?
        }
        // first-hop-only mode: the onion travels bare after hop one
        None => env.payload,
    };
    out.transcripts.push(onion_bytes.clone());

    let session_key = ctx
        .session_key
        .clone()
        .ok_or_else(|| ProtocolError::Violation(format!("{} has no session key", ctx.node)))?;
    let inner = peel_layer(&onion_bytes, &session_key)?;

    if ctx.is_destination() {
        let t_end = Instant::now();
        out.t_end = Some(t_end);
        out.secret_received = Some(Secret::try_from(inner.as_slice())?);
        out.transcripts.push(inner);
    } else {
        out.transcripts.push(inner.clone());
        match &outbound {
            Some(key) => {
                let wire =
                    sym_encrypt(&SymKey::from(key.key), &inner, &mut ctx.rng).to_bytes();
                ctx.send(
                    ctx.next().clone(),
                    EnvelopeKind::OnionHop,
                    wire,
                    Some(key.key_id.clone()),
                )?;
            }
            None => {
                ctx.send(ctx.next().clone(), EnvelopeKind::OnionHop, inner, None)?;
            }
        }
        out.messages_sent = 1;
    }
    Ok(out)
}

/// Initiator half of session-key negotiation: collect one public key per
/// relay, encapsulate, reply with the ciphertext, keep the shared secret.
pub fn negotiate_initiator_half(
    node: &NodeId,
    circuit: &Circuit,
    channel: &Channel,
    rng: &mut RngState,
    timeout: Duration,
) -> Result<SessionKeyTable, ProtocolError> {
    let mut awaiting: std::collections::BTreeSet<NodeId> =
        circuit.relays().iter().cloned().collect();
    let mut table = SessionKeyTable::new();
    while !awaiting.is_empty() {
        let env = channel.recv(node, timeout)?;
        if env.kind != EnvelopeKind::KemPk {
            return Err(ProtocolError::Violation(format!(
                "negotiation expected KemPk, got {:?} from {}",
                env.kind, env.from
            )));
        }
        if !awaiting.remove(&env.from) {
            return Err(ProtocolError::Violation(format!(
                "unexpected negotiation peer {}",
                env.from
            )));
        }
        let pk = KemPublicKey::try_from(env.payload.as_slice())?;
        let (ct, shared) = kem_encapsulate(&pk, rng);
        channel.send(Envelope {
            from: node.clone(),
            to: env.from.clone(),
            kind: EnvelopeKind::KemCt,
            payload: ct.as_bytes().to_vec(),
            qkd_key_id: None,
        })?;
        table.insert(env.from, shared);
    }
    Ok(table)
}

/// Responder half: generate a key pair, publish the public key, decapsulate
/// the returned ciphertext into this node's session key.
pub fn negotiate_responder_half(
    node: &NodeId,
    initiator: &NodeId,
    channel: &Channel,
    rng: &mut RngState,
    timeout: Duration,
) -> Result<SymKey, ProtocolError> {
    let pair = kem_keygen(rng);
    channel.send(Envelope {
        from: node.clone(),
        to: initiator.clone(),
        kind: EnvelopeKind::KemPk,
        payload: pair.public_key.as_bytes().to_vec(),
        qkd_key_id: None,
    })?;
    let env = channel.recv(node, timeout)?;
    if env.kind != EnvelopeKind::KemCt || env.from != *initiator {
        return Err(ProtocolError::Violation(format!(
            "negotiation expected KemCt from {initiator}, got {:?} from {}",
            env.kind, env.from
        )));
    }
    let ct = KemCiphertext::try_from(env.payload.as_slice())?;
    Ok(kem_decapsulate(&pair.secret_key, &ct))
}
