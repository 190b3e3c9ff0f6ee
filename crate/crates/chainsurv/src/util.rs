//! Small deterministic helpers shared across modules.

/// FNV-1a 64-bit hash. Used wherever a stable, platform-independent hash is
/// needed (seed derivation, word bucketing); `std`'s hasher is randomized
/// per process and unsuitable for reproducible runs.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Mix a base seed with a stream label so derived RNG streams stay disjoint.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    splitmix64(base ^ fnv1a64(label.as_bytes()))
}

/// Mix a base seed with numeric stream indices.
pub fn derive_seed_n(base: u64, parts: &[u64]) -> u64 {
    let mut s = splitmix64(base);
    for &p in parts {
        s = splitmix64(s ^ p.wrapping_mul(0x9e3779b97f4a7c15));
    }
    s
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Sample mean and standard deviation (n-1 denominator; 0 for n < 2).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_is_stable() {
        // reference value for "hello" from the FNV-1a specification
        assert_eq!(fnv1a64(b"hello"), 0xa430d84680aabd0b);
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
    }

    #[test]
    fn derived_seeds_differ_per_label() {
        assert_ne!(derive_seed(1, "fold0"), derive_seed(1, "fold1"));
        assert_ne!(derive_seed_n(1, &[0, 1]), derive_seed_n(1, &[1, 0]));
    }

    #[test]
    fn mean_std_basics() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let (m1, s1) = mean_std(&[7.0]);
        assert_eq!((m1, s1), (7.0, 0.0));
    }
}
