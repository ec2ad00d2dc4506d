//! Reproducible random streams.
//!
//! Every trajectory owns a ChaCha stream whose seed is a pure function of the
//! master seed and the trajectory's grid coordinates, so results never depend
//! on scheduling or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub type SimRng = ChaCha12Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive 64-bit mix of a seed and a list of coordinates.
pub fn hash64(master: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(splitmix64(master), |acc, &c| {
        splitmix64(acc ^ splitmix64(c.wrapping_add(GOLDEN)))
    })
}

/// Seed for trajectory `traj` of sweep cell `(i1, i2)`. Direct runs use cell `(0, 0)`.
pub fn cell_seed(master: u64, i1: u64, i2: u64, traj: u64) -> u64 {
    hash64(master, &[i1, i2, traj])
}

pub fn stream(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Draw from `Beta(shape, 1)` by inversion (`U^(1/shape)`).
///
/// `shape = 0` is the point mass at zero, the limit of the family.
pub fn beta_one<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    debug_assert!(shape >= 0.0);
    if shape == 0.0 {
        return 0.0;
    }
    let u: f64 = rng.random();
    u.powf(1.0 / shape)
}

/// Index drawn with probability proportional to `weights`; `None` if they sum to zero.
pub fn categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = Some(i);
            acc += w;
            if target < acc {
                return Some(i);
            }
        }
    }
    // rounding left target just past the final partial sum
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_order_sensitive_and_stable() {
        assert_eq!(cell_seed(7, 1, 2, 3), cell_seed(7, 1, 2, 3));
        assert_ne!(cell_seed(7, 1, 2, 3), cell_seed(7, 2, 1, 3));
        assert_ne!(cell_seed(7, 0, 0, 0), cell_seed(8, 0, 0, 0));
        // frozen value guards against accidental changes to the mixer
        assert_eq!(hash64(0, &[]), splitmix64(0));
    }

    #[test]
    fn beta_one_mean() {
        let mut rng = stream(11);
        for shape in [0.1, 0.5, 1.0, 3.0] {
            let n = 200_000;
            let mean: f64 = (0..n).map(|_| beta_one(&mut rng, shape)).sum::<f64>() / n as f64;
            let expect = shape / (shape + 1.0);
            assert!((mean - expect).abs() < 5e-3, "shape={shape} mean={mean}");
        }
        assert_eq!(beta_one(&mut rng, 0.0), 0.0);
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let mut rng = stream(3);
        let w = [0.0, 2.0, 0.0, 1.0];
        let mut counts = [0usize; 4];
        for _ in 0..30_000 {
            counts[categorical(&mut rng, &w).unwrap()] += 1;
        }
        assert_eq!(counts[0] + counts[2], 0);
        let frac = counts[1] as f64 / 30_000.0;
        assert!((frac - 2.0 / 3.0).abs() < 0.02);
        assert_eq!(categorical(&mut rng, &[0.0, 0.0]), None);
    }
}
