//! Seedable random-byte source.
//!
//! Every execution context (node, KMS, harness) owns its own [`RngState`];
//! none are shared. With a fixed seed all randomized outputs are
//! bit-reproducible across runs, which the test suites rely on. Production
//! use seeds from OS entropy instead (the std companion crate provides the
//! constructor for that).

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{CryptoRng, Error as RandError, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Deterministic CSPRNG state (ChaCha20).
#[derive(Debug, Clone)]
pub struct RngState(ChaCha20Rng);

impl RngState {
    /// Seed from a 64-bit value. Convenient for CLI `--seed` flags.
    pub fn from_seed(seed: u64) -> Self {
        RngState(ChaCha20Rng::seed_from_u64(seed))
    }

    /// Seed from 32 bytes of entropy.
    pub fn from_seed_bytes(seed: [u8; 32]) -> Self {
        RngState(ChaCha20Rng::from_seed(seed))
    }

    /// Derive an independent child generator from this one.
    ///
    /// Forking in a fixed order gives every node its own reproducible
    /// stream without sharing state across execution contexts.
    pub fn fork(&mut self) -> Self {
        let mut seed = [0u8; 32];
        self.0.fill_bytes(&mut seed);
        RngState(ChaCha20Rng::from_seed(seed))
    }

    /// Return `n` fresh random bytes.
    pub fn random_bytes(&mut self, n: usize) -> Vec<u8> {
        let mut out = vec![0u8; n];
        self.0.fill_bytes(&mut out);
        out
    }

    /// Fill `buf` with random bytes.
    pub fn fill(&mut self, buf: &mut [u8]) {
        self.0.fill_bytes(buf);
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), RandError> {
        self.0.try_fill_bytes(dest)
    }
}

impl CryptoRng for RngState {}

/// Free-function form of [`RngState::random_bytes`].
pub fn random_bytes(n: usize, rng: &mut RngState) -> Vec<u8> {
    rng.random_bytes(n)
}
