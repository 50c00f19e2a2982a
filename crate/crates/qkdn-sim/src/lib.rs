//! Simulation companion to `qkdn-core`: the mock ETSI-014 key management
//! service, the in-process classical channel, the thread-per-node protocol
//! engines, and the benchmark harness behind the `qkdn-orr` binary.

pub mod cli;
pub mod harness;
pub mod kms;
pub mod netsim;
pub mod protocol;

use qkdn_core::RngState;

/// An [`RngState`] seeded from operating-system entropy.
pub fn os_entropy_rng() -> RngState {
    let mut seed = [0u8; 32];
    getrandom::getrandom(&mut seed).expect("OS entropy is available");
    RngState::from_seed_bytes(seed)
}
