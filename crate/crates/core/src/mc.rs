//! Seeded, worker-count-independent Monte Carlo driver.
//!
//! Samples are partitioned into fixed-size blocks. Block `b` draws from the
//! ChaCha stream `(seed, b)`, blocks are evaluated in parallel, and partial
//! sums are combined in block order. The estimate is therefore bitwise
//! reproducible for a given `(seed, n_samples)` regardless of how many
//! threads execute the loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const BLOCK: u64 = 4096;

/// RNG for logical stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stable 64-bit mix used to derive independent seeds from context
/// (splitmix64 finalizer).
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed from a base seed and a label.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    mix64(seed ^ mix64(label))
}

/// Mean and standard error of `f` over `n_samples` draws.
pub fn mean_stderr(
    n_samples: u64,
    seed: u64,
    f: impl Fn(&mut ChaCha8Rng) -> f64 + Sync,
) -> (f64, f64) {
    let (sum, sum_sq) = block_sums(n_samples, seed, |rng, count| {
        let mut s = 0.0;
        let mut s2 = 0.0;
        for _ in 0..count {
            let v = f(rng);
            s += v;
            s2 += v * v;
        }
        (s, s2)
    });
    finalize_mean_stderr(sum, sum_sq, n_samples)
}

/// Runs `block_fn(rng, count)` over every block and combines the
/// `(sum, sum_sq)` partials in block order.
pub fn block_sums(
    n_samples: u64,
    seed: u64,
    block_fn: impl Fn(&mut ChaCha8Rng, u64) -> (f64, f64) + Sync,
) -> (f64, f64) {
    let n_blocks = n_samples.div_ceil(BLOCK);
    let partials: Vec<(f64, f64)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let count = BLOCK.min(n_samples - b * BLOCK);
            block_fn(&mut rng, count)
        })
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for (s, s2) in partials {
        sum += s;
        sum_sq += s2;
    }
    (sum, sum_sq)
}

pub fn finalize_mean_stderr(sum: f64, sum_sq: f64, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn deterministic_for_any_worker_count() {
        let run = || mean_stderr(100_000, 7, |rng| rng.random::<f64>());
        let a = crate::with_workers(1, run);
        let b = crate::with_workers(8, run);
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
        assert!((a.0 - 0.5).abs() < 5e-3);
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        let (m, se) = mean_stderr(1000, 1, |_| 3.0);
        assert_eq!(m, 3.0);
        assert_eq!(se, 0.0);
    }
}
