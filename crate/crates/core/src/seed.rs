//! Deterministic seed derivation for independent random streams.
//!
//! Every stochastic stage of an experiment (ground-truth sampling, noise,
//! guess directions) draws from its own stream keyed by
//! `(master seed, run id, stage tag)`, so a single stage can be reproduced
//! without replaying the ones before it.

/// Stage tags for derived streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Truth,
    Noise,
    Guess,
    Stats,
}

impl Stage {
    fn tag(self) -> u64 {
        match self {
            Stage::Truth => 0x7452_5554,
            Stage::Noise => 0x4e4f_4953,
            Stage::Guess => 0x4755_4553,
            Stage::Stats => 0x5354_4154,
        }
    }
}

/// SplitMix64 finalizer; full-period mixing of a 64-bit word.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of one run's stage stream from the master seed.
pub fn derive(master: u64, run_id: u64, stage: Stage) -> u64 {
    splitmix(splitmix(master ^ splitmix(run_id)) ^ stage.tag())
}
