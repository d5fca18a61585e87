//! Seeded sample points and random streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::DomainBox;

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic RNG for a seed and a named purpose, so independent
/// consumers of one user seed do not share a stream.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut acc = 0.0;
    while i > 0 {
        acc += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    acc
}

/// Halton points in `(0,1)^dim` with a seeded Cranley–Patterson shift.
pub fn halton(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "halton sequence supports up to {} dimensions", PRIMES.len());
    let mut r = rng(seed, 0x4841_4c54);
    let shift: Vec<f64> = (0..dim).map(|_| r.random::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let v = (radical_inverse(i, PRIMES[d]) + shift[d]).fract();
                    v.clamp(1e-9, 1.0 - 1e-9)
                })
                .collect()
        })
        .collect()
}

/// `count` low-discrepancy points inside `domain` shrunk by `margin`
/// (1.0 uses the whole box).
pub fn points_in(domain: &DomainBox, count: usize, seed: u64, margin: f64) -> Vec<Vec<f64>> {
    let inner = domain.shrunk(margin);
    halton(domain.dim(), count, seed).iter().map(|u| inner.from_unit(u)).collect()
}
