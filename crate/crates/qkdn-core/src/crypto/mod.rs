//! Cryptographic primitives: one-time-pad XOR, AES-256-CBC, ML-KEM-768.

mod kem;
mod otp;
mod sym;

pub use kem::{
    kem_decapsulate, kem_encapsulate, kem_keygen, KemCiphertext, KemKeyPair, KemPublicKey,
    KemSecretKey, KEM_CIPHERTEXT_LEN, KEM_PUBLIC_KEY_LEN, KEM_SECRET_KEY_LEN,
};
pub use otp::{xor_in_place, xor_otp};
pub use sym::{sym_decrypt, sym_encrypt, sym_encrypt_with_iv, SymCiphertext, BLOCK_LEN, IV_LEN};

use core::fmt;

use crate::error::CryptoError;
use crate::rng::RngState;

/// Length of the distributed secret in bytes.
pub const SECRET_LEN: usize = 32;

/// Length of a symmetric key in bytes (AES-256).
pub const SYM_KEY_LEN: usize = 32;

/// The 32-byte value distributed end-to-end.
///
/// Fresh secrets come only from the random-byte source; the fallible
/// conversion exists so a receiver can reconstitute the value it recovered
/// from the wire.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret([u8; SECRET_LEN]);

impl Secret {
    pub fn generate(rng: &mut RngState) -> Self {
        let mut bytes = [0u8; SECRET_LEN];
        rng.fill(&mut bytes);
        Secret(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; SECRET_LEN] {
        &self.0
    }
}

impl TryFrom<&[u8]> for Secret {
    type Error = CryptoError;

    fn try_from(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; SECRET_LEN] = bytes.try_into().map_err(|_| CryptoError::LengthMismatch {
            left: SECRET_LEN,
            right: bytes.len(),
        })?;
        Ok(Secret(arr))
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Secret(<{SECRET_LEN} bytes>)")
    }
}

/// 256-bit symmetric key material: KEM-derived session keys and QKD link
/// keys both take this form.
#[derive(Clone, PartialEq, Eq)]
pub struct SymKey([u8; SYM_KEY_LEN]);

impl SymKey {
    pub fn as_bytes(&self) -> &[u8; SYM_KEY_LEN] {
        &self.0
    }
}

impl From<[u8; SYM_KEY_LEN]> for SymKey {
    fn from(bytes: [u8; SYM_KEY_LEN]) -> Self {
        SymKey(bytes)
    }
}

impl TryFrom<&[u8]> for SymKey {
    type Error = CryptoError;

    fn try_from(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; SYM_KEY_LEN] = bytes.try_into().map_err(|_| CryptoError::LengthMismatch {
            left: SYM_KEY_LEN,
            right: bytes.len(),
        })?;
        Ok(SymKey(arr))
    }
}

impl fmt::Debug for SymKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymKey(<{SYM_KEY_LEN} bytes>)")
    }
}
