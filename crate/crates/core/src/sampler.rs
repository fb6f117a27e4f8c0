//! Random factor matrices: complex Ginibre and scaled truncated Haar unitary
//! corners, drawn from reproducible counter-derived streams.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::ensemble::Entry;
use crate::error::{Error, Result};

/// Dense complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn new(inner: DMatrix<Complex64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return Err(Error::Domain("matrix dimensions must be positive".into()));
        }
        if inner.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numeric("matrix has non-finite entries".into()));
        }
        Ok(Self(inner))
    }

    /// Build from entries in row-major order.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension {
                expected: format!("{} entries", rows * cols),
                found: entries.len().to_string(),
            });
        }
        Self::new(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<Complex64> {
        self.0.transpose().iter().copied().collect()
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.0.clone().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }
}

/// A reproducible random stream identified by (seed, stream id).
///
/// Backed by ChaCha8, whose 2^64 stream ids give independent sequences under
/// one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Stream for factor `tau` of trial `trial`; independent of scheduling.
    pub fn for_factor(seed: u64, trial: u64, tau: u64) -> Self {
        debug_assert!(tau < 1 << 24 && trial < 1 << 40);
        Self::new(seed, mix64((trial << 24) | tau))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// SplitMix64 finalizer; a bijection on u64.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn standard_complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn gaussian_block<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<Complex64> {
    // Column-major fill order, fixed for reproducibility.
    DMatrix::from_fn(rows, cols, |_, _| standard_complex_gaussian(rng))
}

/// n×n matrix of iid standard complex Gaussians (E|g|² = 1).
pub fn sample_ginibre(n: usize, stream: RngStream) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::Domain("dimension n must be positive".into()));
    }
    let mut rng = stream.rng();
    Ok(ComplexMatrix(gaussian_block(n, n, &mut rng)))
}

/// √L times the top-left n×n block of an L×L Haar unitary.
///
/// Only the first n columns are generated: a thin QR of an L×n Gaussian block
/// with R's diagonal rotated to the positive reals is Haar on the Stiefel
/// manifold.
pub fn sample_haar_corner(n: usize, l: u64, stream: RngStream) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::Domain("dimension n must be positive".into()));
    }
    if l <= n as u64 {
        return Err(Error::Domain(format!("L = {l} must exceed n = {n}")));
    }
    let l_rows = usize::try_from(l).map_err(|_| Error::Domain(format!("L = {l} too large")))?;
    let mut rng = stream.rng();
    let block = gaussian_block(l_rows, n, &mut rng);
    let qr = block.qr();
    let r_diag = qr.r().diagonal();
    let mut q = qr.q();
    for (j, r) in r_diag.iter().enumerate() {
        let norm = r.norm();
        if norm == 0.0 {
            return Err(Error::Numeric("rank-deficient Gaussian block".into()));
        }
        let phase = r / norm;
        q.column_mut(j).scale_mut_complex(phase);
    }
    let scale = (l as f64).sqrt();
    let corner = q.rows(0, n).map(|z| z * scale);
    Ok(ComplexMatrix(corner))
}

trait ScaleComplex {
    fn scale_mut_complex(&mut self, s: Complex64);
}

impl<S: nalgebra::StorageMut<Complex64, nalgebra::Dyn, nalgebra::U1>> ScaleComplex
    for nalgebra::Matrix<Complex64, nalgebra::Dyn, nalgebra::U1, S>
{
    fn scale_mut_complex(&mut self, s: Complex64) {
        for z in self.iter_mut() {
            *z *= s;
        }
    }
}

/// Draw X ~ 𝒫_{n,L}: Ginibre for L = ∞, a scaled Haar corner otherwise.
pub fn sample_factor(entry: Entry, n: usize, stream: RngStream) -> Result<ComplexMatrix> {
    match entry {
        Entry::Infinity => sample_ginibre(n, stream),
        Entry::Finite(l) => sample_haar_corner(n, l, stream),
    }
}

/// Draw the factors X_1, …, X_T of one trial.
pub fn sample_prefix(entries: &[Entry], n: usize, seed: u64, trial: u64) -> Result<Vec<ComplexMatrix>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, &e)| sample_factor(e, n, RngStream::for_factor(seed, trial, i as u64 + 1)))
        .collect()
}

/// Run `f(trial)` for every trial index on the current rayon pool and return
/// the results in trial order.
pub fn map_trials<T, F>(trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..trials as u64).into_par_iter().map(f).collect()
}
