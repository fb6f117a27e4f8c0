//! Exact Lyapunov spectrum λ_1(n) > … > λ_n(n) of a frequency measure, the
//! normalizer c(n), normalized gaps and the finite-n correction bound.
//!
//! Every series is split at K = max support + 1: terms k < K are summed
//! directly and the constant tail ρ∞·Σ_{k≥K} is evaluated in closed form with
//! digamma/trigamma, so results carry no truncation error.

use crate::ensemble::FrequencyMeasure;
use crate::error::{Error, Result};
use crate::special::{digamma, trigamma};

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::Domain("dimension n must be positive".into()))
    } else {
        Ok(())
    }
}

fn check_index(n: usize, i: usize) -> Result<()> {
    check_n(n)?;
    if i == 0 || i > n {
        Err(Error::Domain(format!("index i = {i} outside 1..={n}")))
    } else {
        Ok(())
    }
}

/// Limits of (1/T)·log y_i(T) for the product chain, descending.
///
/// These equal λ_i(n) + log n: the long-run average of the shifts is
/// α − log n (see [`crate::ensemble::mean_shift`]), while the shifted
/// log-values converge to λ_i(n) + α.
pub fn lyapunov_exponents(measure: &FrequencyMeasure, n: usize) -> Result<Vec<f64>> {
    let offset = (n as f64).ln();
    Ok(lambda(measure, n)?.into_iter().map(|l| l + offset).collect())
}

/// λ_i(n) = −Σ_k ρ(⟦k,∞⟧)(log(1 − 1/(k+n)) + 1/(k+n−i)) for i = 1..=n.
pub fn lambda(measure: &FrequencyMeasure, n: usize) -> Result<Vec<f64>> {
    check_n(n)?;
    (1..=n).map(|i| lambda_i(measure, n, i)).collect()
}

fn lambda_i(measure: &FrequencyMeasure, n: usize, i: usize) -> Result<f64> {
    let nf = n as f64;
    let shift = (n - i) as f64;
    let big_k = measure.tail_start();
    let mut sum = 0.0;
    for k in 1..big_k {
        let kf = k as f64;
        sum -= measure.tail(k) * ((-1.0 / (kf + nf)).ln_1p() + 1.0 / (kf + shift));
    }
    let rho_inf = measure.weight_at_infinity();
    if rho_inf > 0.0 {
        let kf = big_k as f64;
        sum += rho_inf * (digamma(kf + shift)? - (kf + nf - 1.0).ln());
    }
    Ok(sum)
}

/// c(n) = Σ_k ρ(⟦k,∞⟧)/(k+n−1)².
pub fn c_of_n(measure: &FrequencyMeasure, n: usize) -> Result<f64> {
    check_n(n)?;
    let nf = n as f64;
    let big_k = measure.tail_start();
    let mut sum = 0.0;
    for k in 1..big_k {
        let d = k as f64 + nf - 1.0;
        sum += measure.tail(k) / (d * d);
    }
    let rho_inf = measure.weight_at_infinity();
    if rho_inf > 0.0 {
        sum += rho_inf * trigamma(big_k as f64 + nf - 1.0)?;
    }
    if sum > 0.0 {
        Ok(sum)
    } else {
        Err(Error::Domain("measure has zero total mass; c(n) vanishes".into()))
    }
}

/// (λ_i − λ_1)/c(n) from precomputed exponents.
pub fn normalized_gaps(lambda: &[f64], c_n: f64) -> Vec<f64> {
    let Some(&top) = lambda.first() else {
        return Vec::new();
    };
    lambda.iter().map(|l| (l - top) / c_n).collect()
}

/// λ_i − λ_1 = Σ_k ρ(⟦k,∞⟧)(1/(k+n−1) − 1/(k+n−i)), evaluated without
/// cancellation between the two O(log n) exponents.
///
/// The tail uses ψ(K+n−i) − ψ(K+n−1) = −Σ_{j=K+n−i}^{K+n−2} 1/j.
pub fn gap_differences(measure: &FrequencyMeasure, n: usize) -> Result<Vec<f64>> {
    check_n(n)?;
    let nf = n as f64;
    let big_k = measure.tail_start();
    let rho_inf = measure.weight_at_infinity();
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let shift = (n - i) as f64;
        let mut sum = 0.0;
        for k in 1..big_k {
            let kf = k as f64;
            sum += measure.tail(k) * (1.0 / (kf + nf - 1.0) - 1.0 / (kf + shift));
        }
        if rho_inf > 0.0 {
            let lo = big_k + (n - i) as u64;
            let hi = big_k + n as u64 - 1;
            let harmonic_block: f64 = (lo..hi).rev().map(|j| 1.0 / j as f64).sum();
            sum -= rho_inf * harmonic_block;
        }
        out.push(sum);
    }
    Ok(out)
}

/// ((i−1)²/(n−i+1))·c(n), the bound on |λ_i − λ_1 + (i−1)c(n)|.
pub fn epsilon_bound(measure: &FrequencyMeasure, n: usize, i: usize) -> Result<f64> {
    check_index(n, i)?;
    let c = c_of_n(measure, n)?;
    Ok(epsilon_from_c(n, i, c))
}

fn epsilon_from_c(n: usize, i: usize, c: f64) -> f64 {
    let im1 = (i - 1) as f64;
    im1 * im1 / (n - i + 1) as f64 * c
}

/// Σ_k ρ(⟦k,∞⟧)(1/k − 1/(k+n−i)), which equals λ_i(n) + α.
pub fn laplace_identity_value(measure: &FrequencyMeasure, n: usize, i: usize) -> Result<f64> {
    check_index(n, i)?;
    if i == n {
        return Ok(0.0);
    }
    let shift = (n - i) as f64;
    let big_k = measure.tail_start();
    let mut sum = 0.0;
    for k in 1..big_k {
        let kf = k as f64;
        sum += measure.tail(k) * (1.0 / kf - 1.0 / (kf + shift));
    }
    let rho_inf = measure.weight_at_infinity();
    if rho_inf > 0.0 {
        // ψ(K+m) − ψ(K) = Σ_{j=K}^{K+m−1} 1/j
        let kf = big_k;
        let block: f64 = (kf..kf + (n - i) as u64).rev().map(|j| 1.0 / j as f64).sum();
        sum += rho_inf * block;
    }
    Ok(sum)
}

/// The full limit spectrum at dimension n.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSpectrum {
    pub n: usize,
    pub lambda: Vec<f64>,
    pub c_n: f64,
    pub normalized_gaps: Vec<f64>,
    pub epsilon_bounds: Vec<f64>,
}

impl LyapunovSpectrum {
    pub fn compute(measure: &FrequencyMeasure, n: usize) -> Result<Self> {
        let lambda = lambda(measure, n)?;
        let c_n = c_of_n(measure, n)?;
        let normalized_gaps = gap_differences(measure, n)?
            .into_iter()
            .map(|g| g / c_n)
            .collect();
        let epsilon_bounds = (1..=n).map(|i| epsilon_from_c(n, i, c_n)).collect();
        Ok(Self {
            n,
            lambda,
            c_n,
            normalized_gaps,
            epsilon_bounds,
        })
    }

    /// normalized_gap_i + (i − 1), which tends to 0 in the picket-fence limit.
    pub fn deviation(&self, i: usize) -> f64 {
        self.normalized_gaps[i - 1] + (i - 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::alpha;
    use crate::special::EULER_GAMMA;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn single_atom() -> FrequencyMeasure {
        FrequencyMeasure::new(BTreeMap::from([(1, 1.0)]), 0.0).unwrap()
    }

    fn mixed() -> FrequencyMeasure {
        FrequencyMeasure::new(BTreeMap::from([(3, 0.5)]), 0.5).unwrap()
    }

    pub(crate) fn test_measures() -> Vec<FrequencyMeasure> {
        vec![
            FrequencyMeasure::ginibre(),
            single_atom(),
            mixed(),
            FrequencyMeasure::new(BTreeMap::from([(2, 0.3), (5, 0.2), (11, 0.1)]), 0.4).unwrap(),
            FrequencyMeasure::new(BTreeMap::from([(1, 0.5), (6, 0.5)]), 0.0).unwrap(),
        ]
    }

    #[test]
    fn lambda_examples() {
        let g = FrequencyMeasure::ginibre();
        assert_abs_diff_eq!(lambda(&g, 1).unwrap()[0], -EULER_GAMMA, epsilon = 1e-12);
        let l3 = lambda(&g, 3).unwrap();
        let ln3 = 3f64.ln();
        let expected = [1.5 - EULER_GAMMA - ln3, 1.0 - EULER_GAMMA - ln3, -EULER_GAMMA - ln3];
        for (a, b) in l3.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(l3[0], -0.1758, epsilon = 1e-4);
        assert_abs_diff_eq!(
            lambda(&single_atom(), 1).unwrap()[0],
            -(0.5f64.ln() + 1.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn ginibre_exponents_are_digamma() {
        let g = FrequencyMeasure::ginibre();
        for n in [1usize, 3, 8] {
            let ex = lyapunov_exponents(&g, n).unwrap();
            for i in 1..=n {
                assert_abs_diff_eq!(ex[i - 1], digamma((n - i + 1) as f64).unwrap(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn c_examples() {
        let g = FrequencyMeasure::ginibre();
        assert_abs_diff_eq!(c_of_n(&g, 1).unwrap(), PI * PI / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c_of_n(&g, 100).unwrap(), 0.010_050_166_663_333_57, epsilon = 1e-12);
        assert_abs_diff_eq!(c_of_n(&single_atom(), 2).unwrap(), 0.25, epsilon = 1e-15);
        assert!(c_of_n(&g, 0).is_err());
    }

    #[test]
    fn gap_examples() {
        let g = FrequencyMeasure::ginibre();
        let s = LyapunovSpectrum::compute(&g, 100).unwrap();
        assert_eq!(s.normalized_gaps[0], 0.0);
        // −(1/99)/ψ'(100)
        assert_abs_diff_eq!(s.normalized_gaps[1], -1.005_058_964_630_111, epsilon = 1e-12);
        assert_abs_diff_eq!(s.deviation(2), -0.005_058_964_630_111, epsilon = 1e-12);
        let s = LyapunovSpectrum::compute(&g, 1000).unwrap();
        assert!((s.normalized_gaps[1] + 1.0005).abs() < 1e-4);
        assert!(s.deviation(2).abs() <= s.epsilon_bounds[1] / s.c_n);
    }

    #[test]
    fn epsilon_examples() {
        let g = FrequencyMeasure::ginibre();
        assert_eq!(epsilon_bound(&g, 5, 1).unwrap(), 0.0);
        assert_abs_diff_eq!(epsilon_bound(&g, 100, 2).unwrap(), 1.015_168_349_831_674e-4, epsilon = 1e-15);
        assert_abs_diff_eq!(epsilon_bound(&single_atom(), 4, 4).unwrap(), 0.5625, epsilon = 1e-15);
        assert!(epsilon_bound(&g, 3, 4).is_err());
        assert!(epsilon_bound(&g, 3, 0).is_err());
    }

    #[test]
    fn laplace_examples() {
        let g = FrequencyMeasure::ginibre();
        assert_eq!(laplace_identity_value(&g, 1, 1).unwrap(), 0.0);
        assert_abs_diff_eq!(laplace_identity_value(&g, 2, 1).unwrap(), 1.0, epsilon = 1e-15);
        for m in test_measures() {
            assert_eq!(laplace_identity_value(&m, 7, 7).unwrap(), 0.0);
        }
    }

    #[test]
    fn gap_routes_agree() {
        for m in test_measures() {
            for n in [1usize, 2, 9, 40] {
                let lam = lambda(&m, n).unwrap();
                let c = c_of_n(&m, n).unwrap();
                let plain = normalized_gaps(&lam, c);
                let s = LyapunovSpectrum::compute(&m, n).unwrap();
                for (a, b) in plain.iter().zip(&s.normalized_gaps) {
                    assert!((a - b).abs() < 1e-9, "n={n}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn strict_ordering_and_identity() {
        for m in test_measures() {
            for n in 1..=50usize {
                let lam = lambda(&m, n).unwrap();
                assert!(lam.windows(2).all(|w| w[0] > w[1]));
                let a = alpha(&m, n).unwrap();
                for i in 1..=n {
                    let rhs = laplace_identity_value(&m, n, i).unwrap();
                    assert!((lam[i - 1] + a - rhs).abs() < 1e-9, "n={n} i={i}");
                }
            }
        }
    }

    #[test]
    fn epsilon_bound_holds() {
        for m in test_measures() {
            for n in [1usize, 2, 3, 10, 64, 500] {
                let s = LyapunovSpectrum::compute(&m, n).unwrap();
                for i in 1..=n {
                    let lhs = s.deviation(i).abs() * s.c_n;
                    assert!(lhs <= s.epsilon_bounds[i - 1] + 1e-12, "n={n} i={i}");
                }
            }
        }
    }
}
