#![allow(dead_code)]

pub mod brute;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use walrus_core::valuation::{generate_random_general, generate_random_gs, GsFamily};
use walrus_core::MarketInstance;

/// Shape of one seeded gross-substitutes market.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub items: usize,
    pub buyers: usize,
    pub max_value: i64,
    pub seed: u64,
}

impl Shape {
    pub fn build(self) -> MarketInstance {
        generate_random_gs(GsFamily::MatroidRankMix, self.items, self.buyers, self.max_value, self.seed)
    }
}

fn shapes(count: usize, salt: u64, max_items: usize, max_buyers: usize, max_value: i64) -> Vec<Shape> {
    let mut rng = ChaCha8Rng::seed_from_u64(salt);
    (0..count)
        .map(|k| Shape {
            items: rng.gen_range(1..=max_items),
            buyers: rng.gen_range(2..=max_buyers),
            max_value: rng.gen_range(1..=max_value),
            seed: salt.wrapping_mul(1_000_003) + k as u64,
        })
        .collect()
}

/// 300 markets with up to 6 items, 2 to 5 buyers and values up to 20.
pub fn gs_corpus() -> Vec<Shape> {
    shapes(300, 17, 6, 5, 20)
}

/// 200 smaller markets for the robust-price checks.
pub fn robust_corpus() -> Vec<Shape> {
    shapes(200, 29, 5, 4, 20)
}

/// General tables with up to 3 items, supplies up to 2 and values up to 5.
pub fn general_corpus(count: usize) -> Vec<MarketInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    (0..count)
        .map(|k| {
            let n = rng.gen_range(1..=3);
            let m = rng.gen_range(1..=3);
            generate_random_general(n, 2, m, 5, 4300 + k as u64)
        })
        .collect()
}
