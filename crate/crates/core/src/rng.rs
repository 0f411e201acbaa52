//! Replica RNG streams.
//!
//! Every Monte Carlo replica draws from its own stream, derived from the
//! master seed and the replica index:
//!
//! 1. the 64-bit master seed is expanded into a 256-bit ChaCha key with
//!    `SeedableRng::seed_from_u64` (the PCG32 expansion published by
//!    `rand_core`);
//! 2. the replica index selects the ChaCha stream (the 64-bit nonce), and
//!    the block counter starts at zero.
//!
//! ChaCha is a counter-based generator, so streams for distinct indices are
//! disjoint keystreams and the same `(seed, index)` always reproduces the
//! same output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Stream = ChaCha8Rng;

pub fn derive_stream(master_seed: u64, replica_index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica_index);
    rng
}

/// Runs `f` once per replica on its own stream, in parallel, returning the
/// results in replica order.
pub fn replicate<T, F>(replicas: usize, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Stream) -> T + Sync,
{
    (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_stream(master_seed, i as u64);
            f(&mut rng)
        })
        .collect()
}

/// Like [`replicate`] for the replica indices `range`.
pub fn replicate_range<T, F>(range: std::ops::Range<usize>, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Stream) -> T + Sync,
{
    range
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_stream(master_seed, i as u64);
            f(&mut rng)
        })
        .collect()
}

/// Runs replicas in blocks of `block` and folds each result into `acc` in
/// replica order, so memory stays bounded.
pub fn replicate_fold<T, A, F, G>(replicas: usize, block: usize, master_seed: u64, f: F, acc: &mut A, mut fold: G)
where
    T: Send,
    F: Fn(&mut Stream) -> T + Sync,
    G: FnMut(&mut A, T),
{
    let block = block.max(1);
    let mut start = 0;
    while start < replicas {
        let end = (start + block).min(replicas);
        for item in replicate_range(start..end, master_seed, &f) {
            fold(acc, item);
        }
        start = end;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn distinct_indices_differ() {
        let a: u64 = derive_stream(7, 0).random();
        let b: u64 = derive_stream(7, 1).random();
        let c: u64 = derive_stream(8, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn reproducible() {
        let a: Vec<u64> = (0..16).map({
            let mut r = derive_stream(42, 9);
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..16).map({
            let mut r = derive_stream(42, 9);
            move |_| r.random()
        }).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn equidistribution_smoke() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        // first outputs of many streams, plus a long run of one stream
        let mut counts = [0u64; 16];
        for i in 0..20_000 {
            let x: f64 = derive_stream(2024, i).random();
            counts[(x * 16.0) as usize] += 1;
        }
        let mut r = derive_stream(2024, 3);
        for _ in 0..20_000 {
            let x: f64 = r.random();
            counts[(x * 16.0) as usize] += 1;
        }
        let n: u64 = counts.iter().sum();
        let expect = n as f64 / 16.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        let p = 1.0 - ChiSquared::new(15.0).unwrap().cdf(chi2);
        assert!(p > 1e-4, "chi2 = {chi2}, p = {p}");
    }

    #[test]
    fn replicate_is_ordered() {
        let v = replicate(50, 3, |r| r.random::<u32>());
        let w: Vec<u32> = (0..50).map(|i| derive_stream(3, i).random()).collect();
        assert_eq!(v, w);
        let mut folded = Vec::new();
        replicate_fold(50, 7, 3, |r| r.random::<u32>(), &mut folded, |acc, x| acc.push(x));
        assert_eq!(folded, v);
    }
}
