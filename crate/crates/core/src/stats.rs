//! Small numeric helpers shared across modules.

/// Arithmetic mean. Returns 0.0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator). Returns 0.0 for n < 2.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Conventional sample median: middle element, or the mean of the two
/// middle elements for even-length input. Returns 0.0 for an empty slice.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Empirical quantile with lower interpolation: the sorted element at
/// index `floor(level * (n - 1))`. Deterministic and exactly reproducible
/// by a sort-and-index oracle.
///
/// `level` must lie in (0, 1) and `xs` must be non-empty; both are the
/// caller's responsibility (checked upstream with context).
pub fn quantile_lower(xs: &[f64], level: f64) -> f64 {
    debug_assert!(!xs.is_empty());
    debug_assert!(level > 0.0 && level < 1.0);
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let idx = (level * (sorted.len() - 1) as f64).floor() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Derives an independent 64-bit sub-seed from a base seed and a stream
/// index (splitmix64 finalizer). Used for per-machine, per-draw and
/// per-cell RNG streams so parallel evaluation order cannot change
/// results.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
