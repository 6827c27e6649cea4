//! Seed derivation.
//!
//! Every random stream in the crate is keyed by a master seed plus a path of
//! labels, e.g. `derive(master, &["trial", "7", "fold", "2"])`. The mix is
//! SplitMix64 over the FNV-1a hash of each label, so a cell, trial or fold can
//! be rerun on its own and get exactly the stream it had inside a larger run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derive a child seed from `master` and a label path.
pub fn derive(master: u64, labels: &[&str]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(master), |acc, l| splitmix64(acc ^ fnv1a(l)))
}

/// Same as [`derive`] with one numeric label appended.
pub fn derive_indexed(master: u64, label: &str, index: usize) -> u64 {
    derive(master, &[label, &index.to_string()])
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn rng_for(master: u64, labels: &[&str]) -> Rng {
    rng(derive(master, labels))
}
