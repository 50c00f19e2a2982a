//! AES-256-CBC with PKCS#7 padding.
//!
//! Every encryption draws a fresh random IV and the ciphertext is framed as
//! `iv ∥ body`, so an onion layer is self-contained: peeling needs nothing
//! beyond the layer bytes and the right key. Padding is always added, so
//! `|ct| = IV_LEN + BLOCK_LEN * ceil((|pt| + 1) / BLOCK_LEN)`.

use alloc::vec::Vec;

use aes::cipher::block_padding::Pkcs7;
use aes::cipher::{BlockDecryptMut, BlockEncryptMut, KeyIvInit};
use aes::Aes256;

use super::SymKey;
use crate::error::CryptoError;
use crate::rng::RngState;

type Aes256CbcEnc = cbc::Encryptor<Aes256>;
type Aes256CbcDec = cbc::Decryptor<Aes256>;

/// Initialization-vector length in bytes.
pub const IV_LEN: usize = 16;

/// AES block length in bytes.
pub const BLOCK_LEN: usize = 16;

/// An AES-256-CBC ciphertext: IV plus padded body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymCiphertext {
    iv: [u8; IV_LEN],
    body: Vec<u8>,
}

impl SymCiphertext {
    pub fn iv(&self) -> &[u8; IV_LEN] {
        &self.iv
    }

    pub fn body(&self) -> &[u8] {
        &self.body
    }

    /// Total length on the wire: `IV_LEN + |body|`.
    pub fn len(&self) -> usize {
        IV_LEN + self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a well-formed ciphertext always carries at least iv + one block
    }

    /// Serialize as `iv ∥ body`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.iv);
        out.extend_from_slice(&self.body);
        out
    }

    /// Parse `iv ∥ body`, enforcing the framing invariants: body present and
    /// a positive multiple of the block length.
    pub fn parse(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() < IV_LEN + BLOCK_LEN {
            return Err(CryptoError::MalformedCiphertext);
        }
        let (iv, body) = bytes.split_at(IV_LEN);
        if !body.len().is_multiple_of(BLOCK_LEN) {
            return Err(CryptoError::MalformedCiphertext);
        }
        Ok(SymCiphertext {
            iv: iv.try_into().expect("split length"),
            body: body.to_vec(),
        })
    }
}

/// Encrypt under a fresh random IV.
pub fn sym_encrypt(key: &SymKey, plaintext: &[u8], rng: &mut RngState) -> SymCiphertext {
    let mut iv = [0u8; IV_LEN];
    rng.fill(&mut iv);
    sym_encrypt_with_iv(key, iv, plaintext)
}

/// Encrypt under a caller-supplied IV. Exists for reproducible runs and for
/// checking fixed vectors against independent implementations.
pub fn sym_encrypt_with_iv(key: &SymKey, iv: [u8; IV_LEN], plaintext: &[u8]) -> SymCiphertext {
    let body = Aes256CbcEnc::new(key.as_bytes().into(), &iv.into())
        .encrypt_padded_vec_mut::<Pkcs7>(plaintext);
    SymCiphertext { iv, body }
}

/// Decrypt and strip padding.
///
/// `BadPadding` signals a wrong key or a corrupted/mis-ordered onion layer;
/// with a random wrong key it fires with probability ≈ 1 but not exactly 1,
/// since random padding bytes can occasionally look valid.
pub fn sym_decrypt(key: &SymKey, ct: &SymCiphertext) -> Result<Vec<u8>, CryptoError> {
    if ct.body.is_empty() || !ct.body.len().is_multiple_of(BLOCK_LEN) {
        return Err(CryptoError::MalformedCiphertext);
    }
    Aes256CbcDec::new(key.as_bytes().into(), (&ct.iv).into())
        .decrypt_padded_vec_mut::<Pkcs7>(&ct.body)
        .map_err(|_| CryptoError::BadPadding)
}
