//! Seeded random streams.
//!
//! Every consumer draws from `ChaCha8` keyed by the master seed, with the
//! stream id `(domain << 48) | index`. Records, training runs and baseline
//! jobs therefore get independent, order-free streams, so serial and
//! parallel execution agree bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Record = 1,
    Training = 2,
    NetInit = 3,
    RandomDesign = 4,
    Sampler = 5,
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) | (index & 0xffff_ffff_ffff));
    rng
}
