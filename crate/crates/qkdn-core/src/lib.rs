//! Core primitives for QKDN key-distribution protocols.
//!
//! This crate carries the pure, allocation-only pieces shared by the three
//! key-distribution models (key relay, trusted node, onion-routing relay):
//!
//! - [`crypto`]: XOR one-time pad, AES-256-CBC framing, ML-KEM-768
//!   encapsulation, and a seedable random-byte source;
//! - [`circuit`]: topology and shortest-path circuit construction;
//! - [`onion`]: session-key table plus layered wrap/peel.
//!
//! There is no IO here; the companion simulation crate supplies the key
//! management service, the message channel, the per-node engines, and the
//! benchmark harness.

#![cfg_attr(not(test), no_std)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod circuit;
pub mod crypto;
pub mod error;
pub mod onion;
pub mod rng;

pub use circuit::{build_circuit, Circuit, NodeId, Topology};
pub use crypto::{
    kem_decapsulate, kem_encapsulate, kem_keygen, sym_decrypt, sym_encrypt, sym_encrypt_with_iv,
    xor_in_place, xor_otp, KemCiphertext, KemKeyPair, KemPublicKey, KemSecretKey, Secret,
    SymCiphertext, SymKey, SECRET_LEN, SYM_KEY_LEN,
};
pub use error::{CircuitError, CryptoError, OnionError};
pub use onion::{peel_layer, wrap_onion, Onion, SessionKeyTable};
pub use rng::{random_bytes, RngState};
