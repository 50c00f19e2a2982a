//! ML-KEM-768 key encapsulation.
//!
//! Thin byte-oriented wrapper over the FIPS 203 implementation so the
//! protocol layer can move keys and ciphertexts through envelopes without
//! carrying library types around. Decapsulation follows implicit-rejection
//! semantics: a mismatched ciphertext yields a valid-looking but different
//! key rather than an error.

use alloc::vec::Vec;

use ml_kem::kem::{Decapsulate, Encapsulate};
use ml_kem::{Encoded, EncodedSizeUser, KemCore, MlKem768, MlKem768Params};

use super::{SymKey, SYM_KEY_LEN};
use crate::error::CryptoError;
use crate::rng::RngState;

/// Encapsulation-key size for ML-KEM-768.
pub const KEM_PUBLIC_KEY_LEN: usize = 1184;

/// Decapsulation-key size for ML-KEM-768.
pub const KEM_SECRET_KEY_LEN: usize = 2400;

/// Ciphertext size for ML-KEM-768.
pub const KEM_CIPHERTEXT_LEN: usize = 1088;

type EncapsKey = ml_kem::kem::EncapsulationKey<MlKem768Params>;
type DecapsKey = ml_kem::kem::DecapsulationKey<MlKem768Params>;

/// Public (encapsulation) key bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KemPublicKey(Vec<u8>);

impl KemPublicKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl TryFrom<&[u8]> for KemPublicKey {
    type Error = CryptoError;

    fn try_from(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != KEM_PUBLIC_KEY_LEN {
            return Err(CryptoError::InvalidPublicKey);
        }
        Ok(KemPublicKey(bytes.to_vec()))
    }
}

/// Secret (decapsulation) key bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct KemSecretKey(Vec<u8>);

impl KemSecretKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl TryFrom<&[u8]> for KemSecretKey {
    type Error = CryptoError;

    fn try_from(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != KEM_SECRET_KEY_LEN {
            return Err(CryptoError::InvalidSecretKey);
        }
        Ok(KemSecretKey(bytes.to_vec()))
    }
}

impl core::fmt::Debug for KemSecretKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "KemSecretKey(<{KEM_SECRET_KEY_LEN} bytes>)")
    }
}

/// An ML-KEM-768 key pair.
#[derive(Debug, Clone)]
pub struct KemKeyPair {
    pub public_key: KemPublicKey,
    pub secret_key: KemSecretKey,
}

/// An ML-KEM-768 ciphertext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KemCiphertext(Vec<u8>);

impl KemCiphertext {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl TryFrom<&[u8]> for KemCiphertext {
    type Error = CryptoError;

    fn try_from(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != KEM_CIPHERTEXT_LEN {
            return Err(CryptoError::MalformedCiphertext);
        }
        Ok(KemCiphertext(bytes.to_vec()))
    }
}

/// Generate a fresh key pair.
pub fn kem_keygen(rng: &mut RngState) -> KemKeyPair {
    let (dk, ek) = MlKem768::generate(rng);
    KemKeyPair {
        public_key: KemPublicKey(ek.as_bytes().to_vec()),
        secret_key: KemSecretKey(dk.as_bytes().to_vec()),
    }
}

/// Encapsulate a fresh 32-byte shared secret under `pk`.
pub fn kem_encapsulate(pk: &KemPublicKey, rng: &mut RngState) -> (KemCiphertext, SymKey) {
    let encoded = Encoded::<EncapsKey>::try_from(pk.0.as_slice()).expect("length-checked key");
    let ek = EncapsKey::from_bytes(&encoded);
    let (ct, ss) = ek.encapsulate(rng).expect("ml-kem encapsulation is infallible");
    let mut key = [0u8; SYM_KEY_LEN];
    key.copy_from_slice(&ss);
    (KemCiphertext(ct.to_vec()), SymKey::from(key))
}

/// Recover the shared secret from `ct` under `sk`.
pub fn kem_decapsulate(sk: &KemSecretKey, ct: &KemCiphertext) -> SymKey {
    let encoded = Encoded::<DecapsKey>::try_from(sk.0.as_slice()).expect("length-checked key");
    let dk = DecapsKey::from_bytes(&encoded);
    let ct_arr =
        ml_kem::Ciphertext::<MlKem768>::try_from(ct.0.as_slice()).expect("length-checked ct");
    let ss = dk.decapsulate(&ct_arr).expect("ml-kem decapsulation is infallible");
    let mut key = [0u8; SYM_KEY_LEN];
    key.copy_from_slice(&ss);
    SymKey::from(key)
}
