//! Deterministic seed derivation.
//!
//! `derive_seed(master, run, stream)` mixes its inputs with the SplitMix64
//! finalizer. The environment stream of run `r` depends only on
//! `(master, r)`, so every policy and every swept value replays the same
//! sample path for that run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scheduler::PolicyRng;

pub const ENVIRONMENT: u64 = 0;
pub const POLICY_GATE: u64 = 1;
pub const POLICY_CHOICE: u64 = 2;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, run: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ run) ^ stream)
}

pub fn environment_rng(master: u64, run: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, run, ENVIRONMENT))
}

pub fn policy_rng(master: u64, run: u64) -> PolicyRng {
    PolicyRng {
        gate: ChaCha8Rng::seed_from_u64(derive_seed(master, run, POLICY_GATE)),
        choice: ChaCha8Rng::seed_from_u64(derive_seed(master, run, POLICY_CHOICE)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // SplitMix64 of 0: first output of the reference generator
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
        let mut seen = std::collections::HashSet::new();
        for run in 0..100 {
            for stream in 0..3 {
                assert!(seen.insert(derive_seed(42, run, stream)));
            }
        }
    }
}
