//! One-time-pad XOR. Information-theoretically secure when the pad is
//! fresh key material of the same length, which is how the KR and TN
//! engines use their QKD link keys.

use alloc::vec::Vec;

use crate::error::CryptoError;

/// XOR two equal-length byte strings.
pub fn xor_otp(a: &[u8], b: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if a.len() != b.len() {
        return Err(CryptoError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x ^ y).collect())
}

/// XOR `pad` into `acc` in place. Used on the trusted-node fold path where
/// per-share allocation would distort the timed region.
pub fn xor_in_place(acc: &mut [u8], pad: &[u8]) -> Result<(), CryptoError> {
    if acc.len() != pad.len() {
        return Err(CryptoError::LengthMismatch {
            left: acc.len(),
            right: pad.len(),
        });
    }
    for (x, y) in acc.iter_mut().zip(pad) {
        *x ^= y;
    }
    Ok(())
}
