//! Counter-based random streams.
//!
//! A master seed and a domain tag fix a ChaCha8 key; the trial index selects
//! the 64-bit ChaCha stream. Trial `i` therefore draws the same numbers no
//! matter which worker runs it or in which order, which makes every
//! Monte-Carlo result independent of the worker count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Domain tags keep the streams of unrelated simulations apart.
pub mod domain {
    pub const OUTER: u64 = 0x6f75_7465_72;
    pub const INNER: u64 = 0x696e_6e65_72;
    pub const RESOURCE: u64 = 0x7265_736f_7572_6365;
    pub const TEST: u64 = 0x7465_7374;
}

#[derive(Debug, Clone)]
pub struct StreamFactory {
    key: [u8; 32],
}

impl StreamFactory {
    pub fn new(master_seed: u64, domain: u64) -> Self {
        let mut expand = ChaCha8Rng::seed_from_u64(master_seed);
        expand.set_stream(domain);
        let mut key = [0u8; 32];
        expand.fill_bytes(&mut key);
        StreamFactory { key }
    }

    /// Independent generator for trial `index`.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}
