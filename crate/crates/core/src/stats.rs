//! Batch-means error bars for correlated Monte Carlo series.

/// Number of batches used for every reported error bar.
pub const BATCHES: usize = 32;

/// Mean of `series` and its batch-means standard error.
///
/// The series is cut into `BATCHES` equal batches (the first
/// `n mod BATCHES` samples are dropped for the error estimate only). With
/// fewer samples than batches each sample is its own batch. Returns `NaN`
/// for the error when fewer than two samples exist.
pub fn batch_means(series: &[f64]) -> (f64, f64) {
    let n = series.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let batches = BATCHES.min(n);
    let size = n / batches;
    let start = n - batches * size;
    let means: Vec<f64> = series[start..]
        .chunks_exact(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let centre = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - centre) * (m - centre)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

/// Sample mean and naive standard error of independent draws.
pub fn mean_and_error(series: &[f64]) -> (f64, f64) {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// 64-bit FNV-1a hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
