use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Tensor;
use crate::error::{Error, Result};

/// Xavier-uniform initialization, bit-reproducible for a fixed seed.
///
/// Entries are drawn from `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))`,
/// where a `[rows, cols]` matrix has `fan_in = cols` and `fan_out = rows`.
/// A 1-D shape `[n]` is treated as `[1, n]`.
pub fn xavier_init(shape: &[usize], seed: u64) -> Result<Tensor> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::invalid(format!("xavier_init: bad shape {shape:?}")));
    }
    let (fan_out, fan_in) = match shape {
        [n] => (1, *n),
        [r, c] => (*r, *c),
        _ => (shape[0], shape[1..].iter().product()),
    };
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data)
}

/// Stable per-name seed derivation so every parameter gets its own stream.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, mixed with the base seed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_tensor() {
        assert_eq!(xavier_init(&[4, 4], 42).unwrap(), xavier_init(&[4, 4], 42).unwrap());
        assert_ne!(xavier_init(&[4, 4], 42).unwrap(), xavier_init(&[4, 4], 43).unwrap());
    }

    #[test]
    fn square_300_within_bound() {
        let t = xavier_init(&[300, 300], 7).unwrap();
        assert!(t.data().iter().all(|v| v.abs() <= 0.1));
    }

    #[test]
    fn empirical_mean_near_zero() {
        let t = xavier_init(&[100_000], 3).unwrap();
        let mean = t.data().iter().sum::<f64>() / t.len() as f64;
        assert!(mean.abs() < 0.01, "{mean}");
    }

    #[test]
    fn zero_dim_rejected() {
        assert!(xavier_init(&[3, 0], 1).is_err());
        assert!(xavier_init(&[], 1).is_err());
    }
}
