//! Seed derivation for reproducible, order-independent parallel runs.
//!
//! Every random stream is a ChaCha8 generator seeded with
//! `splitmix64(master ^ splitmix64(stream_tag) ^ splitmix64(shot_id + 1))`,
//! so a shot's draws depend only on the master seed, the stream and the
//! shot index, never on which worker ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ShotRng = ChaCha8Rng;

/// Independent random streams used by one shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Emitters = 1,
    Phases = 2,
    Events = 3,
    Detector = 4,
    Mixing = 5,
}

/// The splitmix64 finalizer (Steele, Lea, Flood 2014).
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(master: u64, stream: Stream, shot_id: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream as u64) ^ splitmix64(shot_id.wrapping_add(1)))
}

pub fn shot_rng(master: u64, stream: Stream, shot_id: u64) -> ShotRng {
    ChaCha8Rng::seed_from_u64(derive(master, stream, shot_id))
}

pub fn rng(seed: u64) -> ShotRng {
    ChaCha8Rng::seed_from_u64(seed)
}
