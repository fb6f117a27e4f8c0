//! Log squared singular values of X_T ⋯ X_1.
//!
//! [`ChainState`] runs the long-T QR sweep: each factor is applied to an
//! orthonormal frame and only the logarithms of the R-diagonal accumulate, so
//! chains of 10^5 factors never overflow. [`exact_log_squared_singular_values`]
//! is the short-T path used to validate moment formulas; it returns the true
//! singular values of the finite product.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::ensemble::{shift_s, EnsembleSequence, Entry};
use crate::error::{Error, Result};
use crate::linalg::{log_singular_values, qr_positive, unitarity_defect};
use crate::sampler::{map_trials, sample_factor, ComplexMatrix, RngStream};

/// Re-orthonormalize the frame once ‖frame*·frame − I‖_max exceeds this.
pub const FRAME_DRIFT_LIMIT: f64 = 1e-10;

/// Longest product accepted by the exact path.
pub const EXACT_PATH_MAX_FACTORS: usize = 200;

/// Running state of the QR sweep.
#[derive(Debug, Clone)]
pub struct ChainState {
    n: usize,
    tau: usize,
    frame: DMatrix<Complex64>,
    log_scales: Vec<f64>,
    shift_sum: f64,
    /// Per-step log R_ii, row-major by step; feeds batch-mean error bars.
    increments: Vec<f64>,
    reorthonormalizations: usize,
}

impl ChainState {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("dimension n must be positive".into()));
        }
        Ok(Self {
            n,
            tau: 0,
            frame: DMatrix::identity(n, n),
            log_scales: vec![0.0; n],
            shift_sum: 0.0,
            increments: Vec::new(),
            reorthonormalizations: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of factors absorbed.
    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn frame(&self) -> &DMatrix<Complex64> {
        &self.frame
    }

    /// Accumulated Σ log R_ii per direction (unsorted).
    pub fn log_scales(&self) -> &[f64] {
        &self.log_scales
    }

    /// Σ_{τ' ≤ τ} s_n(L_τ').
    pub fn shift_sum(&self) -> f64 {
        self.shift_sum
    }

    pub fn reorthonormalizations(&self) -> usize {
        self.reorthonormalizations
    }

    /// Current estimates of log y_i, sorted descending.
    pub fn log_squared_singular_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.log_scales.iter().map(|s| 2.0 * s).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    /// Absorb factor X drawn with parameter `entry`.
    pub fn step(&mut self, x: &ComplexMatrix, entry: Entry) -> Result<()> {
        let step_index = self.tau + 1;
        if x.rows() != self.n || x.cols() != self.n {
            return Err(Error::Dimension {
                expected: format!("{0}x{0}", self.n),
                found: format!("{}x{}", x.rows(), x.cols()),
            });
        }
        let shift = shift_s(self.n, entry)?;
        let product = x.as_matrix() * &self.frame;
        let scale = x.as_matrix().norm();
        let (q, r) = qr_positive(product);
        let floor = self.n as f64 * f64::EPSILON * scale;
        let mut logs = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let d = r[(i, i)].re;
            if d.is_nan() || d <= floor {
                return Err(Error::SingularFactor { tau: step_index });
            }
            logs.push(d.ln());
        }
        self.frame = q;
        if unitarity_defect(&self.frame) > FRAME_DRIFT_LIMIT {
            let (q, r) = qr_positive(self.frame.clone());
            for (i, l) in logs.iter_mut().enumerate() {
                *l += r[(i, i)].re.ln();
            }
            self.frame = q;
            self.reorthonormalizations += 1;
        }
        for (acc, l) in self.log_scales.iter_mut().zip(&logs) {
            *acc += l;
        }
        self.increments.extend_from_slice(&logs);
        self.shift_sum += shift;
        self.tau = step_index;
        Ok(())
    }

    /// (1/T)·log y_i estimates, sorted descending, with batch-mean standard
    /// errors over contiguous blocks of ⌈√T⌉ steps.
    ///
    /// With fewer than two full blocks the standard errors are NaN.
    pub fn lyapunov_estimate(&self) -> Result<LyapunovEstimate> {
        if self.tau == 0 {
            return Err(Error::Domain("no factors absorbed yet".into()));
        }
        let t = self.tau;
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| self.log_scales[b].total_cmp(&self.log_scales[a]));
        let values = order
            .iter()
            .map(|&d| 2.0 * self.log_scales[d] / t as f64)
            .collect();

        let block = (t as f64).sqrt().ceil() as usize;
        let blocks = t / block;
        let stderr = order
            .iter()
            .map(|&d| {
                if blocks < 2 {
                    return f64::NAN;
                }
                let means: Vec<f64> = (0..blocks)
                    .map(|b| {
                        let sum: f64 = (b * block..(b + 1) * block)
                            .map(|step| self.increments[step * self.n + d])
                            .sum();
                        2.0 * sum / block as f64
                    })
                    .collect();
                let mean = means.iter().sum::<f64>() / blocks as f64;
                let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (blocks - 1) as f64;
                (var / blocks as f64).sqrt()
            })
            .collect();
        Ok(LyapunovEstimate { values, t, stderr })
    }
}

/// Estimated exponents (1/T)·log y_i, descending.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate {
    pub values: Vec<f64>,
    pub t: usize,
    pub stderr: Vec<f64>,
}

/// Run a full chain over `factors` paired with their parameters.
pub fn run_chain(n: usize, factors: impl IntoIterator<Item = (ComplexMatrix, Entry)>) -> Result<ChainState> {
    let mut state = ChainState::new(n)?;
    for (x, e) in factors {
        state.step(&x, e)?;
    }
    Ok(state)
}

/// Run trial `trial` of the chain over the first `t` entries of `seq`,
/// drawing factor τ from stream (seed, trial, τ).
pub fn simulate_chain(seq: &EnsembleSequence, t: usize, seed: u64, trial: u64) -> Result<ChainState> {
    let n = seq.n();
    let mut state = ChainState::new(n)?;
    for tau in 1..=t {
        let entry = seq.entry(tau);
        let x = sample_factor(entry, n, RngStream::for_factor(seed, trial, tau as u64))?;
        state.step(&x, entry)?;
    }
    Ok(state)
}

/// Lyapunov estimates of `trials` independent chains, in trial order.
pub fn simulate_trials(seq: &EnsembleSequence, t: usize, trials: usize, seed: u64) -> Result<Vec<LyapunovEstimate>> {
    if t == 0 {
        return Err(Error::Domain("T must be positive".into()));
    }
    map_trials(trials, |trial| simulate_chain(seq, t, seed, trial)?.lyapunov_estimate())
        .into_iter()
        .collect()
}

/// Exact log y_i of X_T ⋯ X_1 (factors given in application order X_1, X_2, …),
/// sorted descending.
///
/// The product is carried as Q·diag(e^d)·M with Q unitary and the columns of
/// X·Q·diag(e^d) pre-sorted by norm before each QR, then the singular values
/// of diag(e^d)·M come from a one-sided Jacobi sweep in log-scaled form.
pub fn exact_log_squared_singular_values(factors: &[ComplexMatrix]) -> Result<Vec<f64>> {
    let Some(first) = factors.first() else {
        return Err(Error::Domain("at least one factor is required".into()));
    };
    if factors.len() > EXACT_PATH_MAX_FACTORS {
        return Err(Error::Domain(format!(
            "exact path accepts at most {EXACT_PATH_MAX_FACTORS} factors, got {}",
            factors.len()
        )));
    }
    let n = first.rows();
    for x in factors {
        if x.rows() != n || x.cols() != n {
            return Err(Error::Dimension {
                expected: format!("{n}x{n}"),
                found: format!("{}x{}", x.rows(), x.cols()),
            });
        }
    }

    let mut q = DMatrix::<Complex64>::identity(n, n);
    let mut log_d = vec![0.0; n];
    let mut m = DMatrix::<Complex64>::identity(n, n);
    for (idx, x) in factors.iter().enumerate() {
        let xq = x.as_matrix() * &q;
        let mut order: Vec<usize> = (0..n).collect();
        let col_log_norm: Vec<f64> = (0..n)
            .map(|j| xq.column(j).norm().ln() + log_d[j])
            .collect();
        order.sort_by(|&a, &b| col_log_norm[b].total_cmp(&col_log_norm[a]));
        let permuted = DMatrix::from_fn(n, n, |i, j| xq[(i, order[j])]);
        let (q0, r0) = qr_positive(permuted);
        let mut new_log_d = vec![0.0; n];
        for i in 0..n {
            let d = r0[(i, i)].re;
            if d.is_nan() || d <= 0.0 {
                return Err(Error::SingularFactor { tau: idx + 1 });
            }
            new_log_d[i] = d.ln() + log_d[order[i]];
        }
        let mut new_m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            let diag = r0[(i, i)].re;
            for j in i..n {
                let coeff = r0[(i, j)] / diag * (log_d[order[j]] - log_d[order[i]]).exp();
                if coeff == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for col in 0..n {
                    new_m[(i, col)] += coeff * m[(order[j], col)];
                }
            }
        }
        q = q0;
        log_d = new_log_d;
        m = new_m;
    }
    // Singular values of diag(e^d)·M equal those of M*·diag(e^d), whose j-th
    // column is e^{d_j}·conj(row j of M).
    let columns: Vec<Vec<Complex64>> = (0..n)
        .map(|j| m.row(j).iter().map(|z| z.conj()).collect())
        .collect();
    Ok(log_singular_values(log_d, columns)
        .into_iter()
        .map(|s| 2.0 * s)
        .collect())
}
