//! Error types shared by the core primitives.

use core::fmt;

/// Errors raised by the cryptographic primitives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CryptoError {
    /// XOR one-time-pad operands differ in length.
    LengthMismatch { left: usize, right: usize },
    /// CBC padding check failed: wrong key, corrupted layer, or an
    /// out-of-order peel.
    BadPadding,
    /// Ciphertext violates the framing invariants (missing IV, body not a
    /// positive multiple of the block size).
    MalformedCiphertext,
    /// Encapsulation key bytes do not form a valid ML-KEM-768 public key.
    InvalidPublicKey,
    /// Decapsulation key bytes do not form a valid ML-KEM-768 secret key.
    InvalidSecretKey,
}

impl fmt::Display for CryptoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CryptoError::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right} bytes")
            }
            CryptoError::BadPadding => write!(f, "bad padding"),
            CryptoError::MalformedCiphertext => write!(f, "malformed ciphertext"),
            CryptoError::InvalidPublicKey => write!(f, "invalid KEM public key"),
            CryptoError::InvalidSecretKey => write!(f, "invalid KEM secret key"),
        }
    }
}

impl core::error::Error for CryptoError {}

/// Errors raised while building or wrapping an onion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OnionError {
    /// The session-key table has no entry for a circuit member.
    MissingKey { node: crate::circuit::NodeId },
}

impl fmt::Display for OnionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OnionError::MissingKey { node } => write!(f, "no session key for node {node}"),
        }
    }
}

impl core::error::Error for OnionError {}

/// Errors raised during circuit construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CircuitError {
    /// Source and destination are not connected in the topology.
    NoPath,
    /// An endpoint is not present in the topology.
    UnknownNode { node: crate::circuit::NodeId },
    /// Source equals destination.
    SameEndpoints,
    /// A circuit literal violated the structural invariants.
    Invalid(&'static str),
}

impl fmt::Display for CircuitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CircuitError::NoPath => write!(f, "no path between endpoints"),
            CircuitError::UnknownNode { node } => write!(f, "unknown node {node}"),
            CircuitError::SameEndpoints => write!(f, "source equals destination"),
            CircuitError::Invalid(why) => write!(f, "invalid circuit: {why}"),
        }
    }
}

impl core::error::Error for CircuitError {}
