//! Distribution comparisons on raw samples.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

/// Two-sample Kolmogorov–Smirnov distance `sup_v |F_a(v) - F_b(v)|`.
///
/// Ties (atoms, lattice values) are handled by advancing both empirical
/// distribution functions past every copy of a value before comparing.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { 1.0 };
    }
    let mut a: Vec<f64> = a.to_vec();
    let mut b: Vec<f64> = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Fraction of samples exactly equal to zero.
pub fn zero_frequency(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().filter(|&&v| v == 0.0).count() as f64 / samples.len() as f64
}

/// Standard error `sqrt(p(1-p)/n)` of a frequency estimate.
pub fn binomial_stderr(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force: evaluates both ECDFs at every sample value.
    fn ks_brute(a: &[f64], b: &[f64]) -> f64 {
        let ecdf = |s: &[f64], v: f64| s.iter().filter(|&&x| x <= v).count() as f64 / s.len() as f64;
        a.iter()
            .chain(b)
            .map(|&v| (ecdf(a, v) - ecdf(b, v)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identical_and_disjoint() {
        let a = [0.0, 0.0, 1.0, 2.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
        assert_eq!(ks_two_sample(&[0.0; 5], &[0.0; 9]), 0.0);
    }

    #[test]
    fn matches_brute_force_with_ties() {
        let a = [0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 3.0];
        let b = [0.0, 0.5, 0.5, 0.7, 1.0, 2.0, 2.0, 4.0, 4.0];
        assert!((ks_two_sample(&a, &b) - ks_brute(&a, &b)).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn agrees_with_brute_force(a in proptest::collection::vec(0u8..12, 1..40), b in proptest::collection::vec(0u8..12, 1..40)) {
            let a: Vec<f64> = a.into_iter().map(|v| v as f64 / 4.0).collect();
            let b: Vec<f64> = b.into_iter().map(|v| v as f64 / 4.0).collect();
            proptest::prop_assert!((ks_two_sample(&a, &b) - ks_brute(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn frequencies() {
        assert_eq!(zero_frequency(&[0.0, 1.0, 0.0, 2.0]), 0.5);
        assert!((binomial_stderr(0.5, 100) - 0.05).abs() < 1e-15);
    }
}
