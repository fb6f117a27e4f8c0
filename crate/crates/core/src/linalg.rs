//! Small dense kernels shared by the product chains: a QR with positive
//! R-diagonal and a one-sided Jacobi SVD on log-scaled columns.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// QR factorization with R's diagonal real and nonnegative.
pub(crate) fn qr_positive(m: DMatrix<Complex64>) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let qr = m.qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..r.nrows().min(r.ncols()) {
        let d = r[(j, j)];
        let norm = d.norm();
        if norm == 0.0 {
            continue;
        }
        let phase = d / norm;
        for z in q.column_mut(j).iter_mut() {
            *z *= phase;
        }
        let conj = phase.conj();
        for z in r.row_mut(j).iter_mut() {
            *z *= conj;
        }
        r[(j, j)] = Complex64::new(norm, 0.0);
    }
    (q, r)
}

/// max |(Q*Q − I)_{ij}|
pub(crate) fn unitarity_defect(q: &DMatrix<Complex64>) -> f64 {
    let gram = q.adjoint() * q;
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).norm());
        }
    }
    worst
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Log singular values of the matrix whose j-th column is exp(scales[j])·columns[j].
///
/// Columns are kept as (log scale, unit vector) pairs so matrices with
/// column norms spanning far beyond the f64 exponent range are handled; each
/// Jacobi rotation is expressed through the ratio of the two scales.
/// Returned values are sorted descending.
pub(crate) fn log_singular_values(mut scales: Vec<f64>, mut columns: Vec<Vec<Complex64>>) -> Vec<f64> {
    let n = columns.len();
    assert_eq!(scales.len(), n);
    let renormalize = |s: &mut f64, v: &mut Vec<Complex64>| {
        let nv = norm(v);
        if nv > 0.0 {
            *s += nv.ln();
            v.iter_mut().for_each(|z| *z /= nv);
        } else {
            *s = f64::NEG_INFINITY;
        }
    };
    for (s, v) in scales.iter_mut().zip(columns.iter_mut()) {
        renormalize(s, v);
    }
    let tol = (n.max(1) as f64) * f64::EPSILON;
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                if scales[p] == f64::NEG_INFINITY || scales[q] == f64::NEG_INFINITY {
                    continue;
                }
                let (big, small) = if scales[p] >= scales[q] { (p, q) } else { (q, p) };
                let w = inner(&columns[big], &columns[small]);
                let wn = w.norm();
                if wn <= tol {
                    continue;
                }
                rotated = true;
                let r = (scales[small] - scales[big]).exp();
                let alpha = norm(&columns[big]).powi(2);
                let beta = norm(&columns[small]).powi(2);
                let r_zeta = (r * r * beta - alpha) / (2.0 * wn);
                let sign = if r_zeta >= 0.0 { 1.0 } else { -1.0 };
                let tau = sign / (r_zeta.abs() + (r * r + r_zeta * r_zeta).sqrt());
                let t = r * tau;
                let c = 1.0 / (1.0 + t * t).sqrt();
                let e = w.conj() / wn;
                let (vb, vs) = (columns[big].clone(), columns[small].clone());
                let new_big: Vec<Complex64> = vb
                    .iter()
                    .zip(&vs)
                    .map(|(b, s)| *b * c - e * *s * (c * tau * r * r))
                    .collect();
                let new_small: Vec<Complex64> =
                    vb.iter().zip(&vs).map(|(b, s)| (*b * tau + e * *s) * c).collect();
                columns[big] = new_big;
                columns[small] = new_small;
                renormalize(&mut scales[big], &mut columns[big]);
                renormalize(&mut scales[small], &mut columns[small]);
            }
        }
        if !rotated {
            break;
        }
    }
    scales.sort_by(|a, b| b.total_cmp(a));
    scales
}
