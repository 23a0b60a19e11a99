//! Labeled, reproducible random streams.
//!
//! Every consumer of randomness derives its generator from the master seed
//! plus a purpose label, so adding a new consumer never shifts an existing
//! stream. Parallel work is split into fixed partitions, each with its own
//! ChaCha stream, which keeps results independent of the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Trials per partition for partitioned Monte Carlo.
pub const PARTITION_SIZE: usize = 4096;

/// Derive a 64-bit seed for a labeled stream.
pub fn stream_seed(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
}

/// Generator for a labeled stream.
pub fn stream(master: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, label))
}

/// Generator for partition `index` of a labeled stream.
pub fn partition(master: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut rng = stream(master, label);
    rng.set_stream(index);
    rng
}

/// Split `total` work items into `(partition index, count)` chunks of [`PARTITION_SIZE`].
pub fn partitions(total: usize) -> Vec<(u64, usize)> {
    let mut out = Vec::with_capacity(total.div_ceil(PARTITION_SIZE));
    let mut left = total;
    let mut idx = 0u64;
    while left > 0 {
        let n = left.min(PARTITION_SIZE);
        out.push((idx, n));
        left -= n;
        idx += 1;
    }
    out
}

/// Run `f` inside a rayon pool with `workers` threads (0 = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn labels_give_distinct_streams() {
        assert_ne!(stream_seed(7, "a"), stream_seed(7, "b"));
        assert_eq!(stream_seed(7, "a"), stream_seed(7, "a"));
        let x: u64 = partition(7, "a", 0).random();
        let y: u64 = partition(7, "a", 1).random();
        assert_ne!(x, y);
    }

    #[test]
    fn partitions_cover_total() {
        let p = partitions(10_000);
        assert_eq!(p.iter().map(|&(_, n)| n).sum::<usize>(), 10_000);
        assert_eq!(p.len(), 3);
        assert!(partitions(0).is_empty());
    }
}
