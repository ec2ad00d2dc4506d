//! Concentration metrics over stake vectors.

/// Sample Gini coefficient `Σᵢⱼ|xᵢ−xⱼ| / (2n²·mean)`, via the sorted form.
///
/// A zero vector has no inequality to measure and is reported as 0.
pub fn gini(x: &[f64]) -> f64 {
    let n = x.len();
    let total: f64 = x.iter().sum();
    if n == 0 || !(total > 0.0) {
        log::debug!("gini of a zero-sum vector reported as 0");
        return 0.0;
    }
    let mut sorted = x.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let nf = n as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, v)| (2.0 * (i as f64 + 1.0) - nf - 1.0) * v)
        .sum();
    (weighted / (nf * total)).clamp(0.0, 1.0)
}

/// `‖x‖₂ / ‖x‖₁`; 1 for a dictator, `1/√n` for a uniform vector, 0 for the zero vector.
pub fn norm_ratio(x: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(scale > 0.0) {
        log::debug!("norm ratio of a zero vector reported as 0");
        return 0.0;
    }
    // rescale so inflationary runs cannot overflow the squares
    let (l1, l2sq) = x.iter().fold((0.0, 0.0), |(a, b), v| {
        let s = v.abs() / scale;
        (a + s, b + s * s)
    });
    l2sq.sqrt() / l1
}

/// Mean and population standard deviation; `(0, 0)` for an empty slice.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (0.0, 0.0);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Exp};

    fn brute_gini(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let mut s = 0.0;
        for a in x {
            for b in x {
                s += (a - b).abs();
            }
        }
        s / (2.0 * n * n * mean)
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[2.0; 5]), 0.0);
        assert_eq!(gini(&[0.0, 0.0, 7.0, 0.0]), 0.75);
        assert_eq!(gini(&[0.0; 3]), 0.0);
        let mut rng = stream(4);
        let exp = Exp::new(1.0).unwrap();
        let x: Vec<f64> = (0..10_000).map(|_| exp.sample(&mut rng)).collect();
        assert!((gini(&x) - 0.5).abs() < 0.02);
    }

    #[test]
    fn norm_ratio_examples() {
        assert_eq!(norm_ratio(&[0.0, 5.0, 0.0]), 1.0);
        assert_eq!(norm_ratio(&[1.0; 4]), 0.5);
        assert!((norm_ratio(&[3.0, 4.0]) - 5.0 / 7.0).abs() < 1e-15);
        assert_eq!(norm_ratio(&[0.0, 0.0]), 0.0);
        assert!((norm_ratio(&[1e300, 1e300]) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[]), (0.0, 0.0));
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
    }

    proptest! {
        #[test]
        fn gini_matches_pairwise_definition(x in proptest::collection::vec(0.0f64..1e3, 1..40)) {
            prop_assume!(x.iter().sum::<f64>() > 0.0);
            let g = gini(&x);
            prop_assert!((0.0..=1.0).contains(&g));
            prop_assert!((g - brute_gini(&x)).abs() < 1e-10);
        }

        #[test]
        fn norm_ratio_bounds(x in proptest::collection::vec(0.0f64..1e3, 1..40)) {
            prop_assume!(x.iter().sum::<f64>() > 0.0);
            let r = norm_ratio(&x);
            let n = x.len() as f64;
            prop_assert!(r >= 1.0 / n.sqrt() - 1e-12 && r <= 1.0 + 1e-12);
        }
    }
}
