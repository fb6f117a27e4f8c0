use std::collections::BTreeMap;

use num_complex::Complex64;
use picket_core::chain::{exact_log_squared_singular_values, run_chain, simulate_chain, ChainState};
use picket_core::ensemble::{mean_shift, measure_from_sequence, shift_s, EnsembleSequence, Entry, FrequencyMeasure};
use picket_core::moments::infinite_factor;
use picket_core::sampler::{sample_factor, sample_haar_corner, sample_prefix, ComplexMatrix, RngStream};
use picket_core::spectrum::{c_of_n, laplace_identity_value, LyapunovSpectrum};

fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Two-sample KS critical value at significance 1e-3.
fn ks_critical(n: usize, m: usize) -> f64 {
    let c = (-(0.5e-3f64).ln() / 2.0).sqrt();
    c * (((n + m) as f64) / (n * m) as f64).sqrt()
}

/// Normalized discrete Fourier matrix.
fn fourier_unitary(n: usize) -> ComplexMatrix {
    let entries: Vec<Complex64> = (0..n * n)
        .map(|k| {
            let (r, c) = (k / n, k % n);
            let angle = 2.0 * std::f64::consts::PI * (r * c) as f64 / n as f64;
            Complex64::from_polar(1.0 / (n as f64).sqrt(), angle)
        })
        .collect();
    ComplexMatrix::from_row_major(n, n, &entries).unwrap()
}

#[test]
fn haar_corner_is_conjugation_invariant() {
    let (n, l, samples) = (3usize, 7u64, 4000u64);
    let w = fourier_unitary(n);
    let mut plain_sv = Vec::new();
    let mut plain_entry = Vec::new();
    let mut conj_sv = Vec::new();
    let mut conj_entry = Vec::new();
    for k in 0..samples {
        let x = sample_haar_corner(n, l, RngStream::new(1, k)).unwrap();
        plain_sv.extend(x.singular_values().iter().map(|s| s * s));
        plain_entry.push(x.as_matrix()[(0, 0)].norm_sqr());
        let y = sample_haar_corner(n, l, RngStream::new(2, k)).unwrap();
        let z = w.as_matrix() * y.as_matrix() * w.as_matrix().adjoint();
        let z = ComplexMatrix::new(z).unwrap();
        conj_sv.extend(z.singular_values().iter().map(|s| s * s));
        conj_entry.push(z.as_matrix()[(0, 0)].norm_sqr());
    }
    let crit = ks_critical(plain_sv.len(), conj_sv.len());
    assert!(ks_statistic(&mut plain_sv, &mut conj_sv) < crit);
    let crit = ks_critical(plain_entry.len(), conj_entry.len());
    assert!(ks_statistic(&mut plain_entry, &mut conj_entry) < crit);
}

fn log_abs_det(x: &ComplexMatrix) -> f64 {
    x.as_matrix().clone().determinant().norm().ln()
}

#[test]
fn determinant_identity_exact_and_sweep() {
    let seq = EnsembleSequence::parse(4, "inf,6,9").unwrap();
    for trial in 0..10 {
        let prefix = seq.prefix(30);
        let factors = sample_prefix(&prefix, 4, 17, trial).unwrap();
        let expected: f64 = 2.0 * factors.iter().map(log_abs_det).sum::<f64>();
        let exact: f64 = exact_log_squared_singular_values(&factors).unwrap().iter().sum();
        assert!((exact - expected).abs() < 1e-8 * expected.abs().max(1.0));
        let state = run_chain(4, factors.into_iter().zip(prefix)).unwrap();
        let sweep: f64 = state.log_squared_singular_values().iter().sum();
        assert!((sweep - expected).abs() < 1e-8 * expected.abs().max(1.0));
    }
}

#[test]
fn sweep_and_exact_paths_agree() {
    let (n, t, trials) = (3usize, 200usize, 100u64);
    let prefix = vec![Entry::Infinity; t];
    let mut diff = vec![0.0; n];
    for trial in 0..trials {
        let factors = sample_prefix(&prefix, n, 5, trial).unwrap();
        let exact = exact_log_squared_singular_values(&factors).unwrap();
        let state = run_chain(n, factors.into_iter().zip(prefix.iter().copied())).unwrap();
        let est = state.lyapunov_estimate().unwrap();
        for i in 0..n {
            diff[i] += (est.values[i] - exact[i] / t as f64) / trials as f64;
        }
    }
    for d in diff {
        assert!(d.abs() < 0.02, "mean difference {d}");
    }
}

#[test]
fn shift_bookkeeping_over_whole_periods() {
    let seq = EnsembleSequence::parse(2, "inf,5,3").unwrap();
    let period_sum: f64 = seq.pattern().iter().map(|&e| shift_s(2, e).unwrap()).sum();
    let mut state = ChainState::new(2).unwrap();
    for tau in 1..=300 {
        let e = seq.entry(tau);
        state.step(&sample_factor(e, 2, RngStream::for_factor(0, 0, tau as u64)).unwrap(), e).unwrap();
        if tau % 3 == 0 {
            let expected = (tau / 3) as f64 * period_sum;
            assert!((state.shift_sum() - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }
}

#[test]
fn shifted_exponents_reach_laplace_values() {
    // (1/T)(log y_i + Σ s) → λ_i + α whatever the normalization of each part.
    let seq = EnsembleSequence::parse(2, "inf,5").unwrap();
    let measure = measure_from_sequence(&seq);
    let t = 10_000;
    let state = simulate_chain(&seq, t, 3, 0).unwrap();
    let est = state.lyapunov_estimate().unwrap();
    for i in 1..=2 {
        let shifted = est.values[i - 1] + state.shift_sum() / t as f64;
        let target = laplace_identity_value(&measure, 2, i).unwrap();
        assert!((shifted - target).abs() < 0.05, "i={i}: {shifted} vs {target}");
    }
    assert!((state.shift_sum() / t as f64 - mean_shift(&measure, 2).unwrap()).abs() < 1e-3);
}

/// Σ_{k≥1} 1/((k+n−1)²(k+n−m)), truncated at 10^6 with an integral tail.
fn ginibre_deviation_sum(n: usize, m: usize) -> f64 {
    let cut = 1_000_000u64;
    let mut s = 0.0;
    for k in (1..=cut).rev() {
        let a = (k + n as u64 - 1) as f64;
        let b = (k + n as u64 - m as u64) as f64;
        s += 1.0 / (a * a * b);
    }
    let edge = (cut + n as u64) as f64 - 0.5;
    s + 1.0 / (2.0 * edge * edge)
}

#[test]
fn ginibre_deviation_matches_exact_expansion() {
    let g = FrequencyMeasure::ginibre();
    for (n, m) in [(10usize, 2usize), (10, 3), (50, 5), (100, 2), (400, 7)] {
        let spec = LyapunovSpectrum::compute(&g, n).unwrap();
        let c = c_of_n(&g, n).unwrap();
        let expected = -(((m - 1) * (m - 1)) as f64) / c * ginibre_deviation_sum(n, m);
        assert!(
            (spec.deviation(m) - expected).abs() < 1e-10,
            "n={n} m={m}: {} vs {expected}",
            spec.deviation(m)
        );
    }
}

#[test]
fn picket_fence_deviation_shrinks() {
    let mixed = FrequencyMeasure::new(BTreeMap::from([(3, 0.5)]), 0.5).unwrap();
    for measure in [FrequencyMeasure::ginibre(), mixed] {
        for i in 2..=5 {
            let devs: Vec<f64> = [100usize, 1000, 10_000]
                .iter()
                .map(|&n| LyapunovSpectrum::compute(&measure, n).unwrap().deviation(i).abs())
                .collect();
            assert!(devs[0] > devs[1] && devs[1] > devs[2], "{devs:?}");
        }
    }
}

/// Π_{k=1}^{K} e^{c/k}(u+c−k)/(u−k) with the remaining factors approximated by
/// exp(Σ_{k>K} (c/k + log(1 + c/(u−k)))) ≈ exp(−c(2u+c)/(2K+1)).
fn truncated_product(u: Complex64, c: f64, cut: u64) -> Complex64 {
    let mut log = Complex64::new(0.0, 0.0);
    for k in 1..=cut {
        let kf = k as f64;
        log += c / kf + ((u + c - kf) / (u - kf)).ln();
    }
    let tail = -c * (2.0 * u + c) / (2.0 * cut as f64 + 1.0);
    (log + tail).exp()
}

#[test]
fn infinite_factor_matches_truncated_product() {
    for u in [Complex64::new(-0.3, 0.0), Complex64::new(-2.5, 1.0), Complex64::new(0.5, -0.7)] {
        for c in [0.1, 0.5, 1.0] {
            let closed = infinite_factor(u, c).unwrap();
            let product = truncated_product(u, c, 1_000_000);
            assert!((closed - product).norm() < 1e-6 * closed.norm().max(1.0), "u={u} c={c}");
        }
    }
}

#[test]
fn ginibre_variance_closed_form() {
    // n = 1: y = Π E_τ with E_τ ~ Exp(1), so E[(y e^{Tγ})^c] = (Γ(1+c)e^{cγ})^T.
    use picket_core::moments::variance_m2;
    use picket_core::special::EULER_GAMMA;
    let ln_gamma = |x: f64| picket_core::special::ln_gamma_complex(Complex64::new(x, 0.0)).unwrap().re;
    for t in [10usize, 100, 1000] {
        let c = 1.0 / t as f64;
        let tf = t as f64;
        let expected = (tf * (ln_gamma(1.0 + 2.0 * c) + 2.0 * c * EULER_GAMMA)).exp()
            - (2.0 * tf * (ln_gamma(1.0 + c) + c * EULER_GAMMA)).exp();
        let v = variance_m2(1, &vec![Entry::Infinity; t], 1.0, t).unwrap().value;
        assert!((v - expected).abs() < 1e-9, "T={t}: {v} vs {expected}");
    }
}
