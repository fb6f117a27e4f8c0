//! Moments E[Π_i Σ_j (y_j e^{Σ_τ s_n(L_τ)})^{c_i}] of a finite product, for one
//! exponent (m = 1) and for two equal exponents (m = 2, used for the
//! variance), evaluated three independent ways:
//!
//! * residues: the m = 1 contour integral summed over its poles at
//!   u = −c − ℓ + 1, ℓ = 1..=n;
//! * quadrature: the trapezoidal rule on concentric circles around those
//!   poles, doubling nodes until successive values agree;
//! * Monte Carlo: sampled factors pushed through the exact small-T path.
//!
//! Each factor contributes F_τ(u) = Π_{k=1}^{L_τ−n} e^{c/k}(u+c−k)/(u−k); for a
//! Ginibre factor the infinite product is e^{cγ}Γ(1−u)/Γ(1−u−c).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::chain::{exact_log_squared_singular_values, EXACT_PATH_MAX_FACTORS};
use crate::ensemble::{shift_s, Entry};
use crate::error::{Error, Result};
use crate::sampler::{map_trials, sample_prefix};
use crate::special::{gamma_ratio, EULER_GAMMA};

/// Radial gap between the two m = 2 contours; exponents must stay below it.
pub const PAIR_RING_SEPARATION: f64 = 0.35;
const INNER_RING_MARGIN: f64 = 0.25;
const SINGLE_RING_MARGIN: f64 = 0.5;
pub const MAX_NODES: usize = 1 << 14;
const CONVERGENCE_TOL: f64 = 1e-10;
const IMAGINARY_TOL: f64 = 1e-8;

/// Exponent structure of the moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponents {
    /// E[Σ_j y_j^c]
    Single(f64),
    /// E[(Σ_j y_j^c)²]
    Pair(f64),
}

impl Exponents {
    pub fn c(self) -> f64 {
        match self {
            Exponents::Single(c) | Exponents::Pair(c) => c,
        }
    }

    fn power(self) -> i32 {
        match self {
            Exponents::Single(_) => 1,
            Exponents::Pair(_) => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentQuery {
    n: usize,
    prefix: Vec<Entry>,
    exponents: Exponents,
    shifted: bool,
}

impl MomentQuery {
    pub fn new(n: usize, prefix: Vec<Entry>, exponents: Exponents, shifted: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("dimension n must be positive".into()));
        }
        if prefix.is_empty() {
            return Err(Error::Validation("prefix must contain at least one factor".into()));
        }
        for e in &prefix {
            e.check(n).map_err(|err| Error::Validation(err.to_string()))?;
        }
        let c = exponents.c();
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Validation(format!("exponent c must be positive, got {c}")));
        }
        Ok(Self {
            n,
            prefix,
            exponents,
            shifted,
        })
    }

    pub fn single(n: usize, prefix: Vec<Entry>, c: f64, shifted: bool) -> Result<Self> {
        Self::new(n, prefix, Exponents::Single(c), shifted)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prefix(&self) -> &[Entry] {
        &self.prefix
    }

    pub fn exponents(&self) -> Exponents {
        self.exponents
    }

    pub fn shifted(&self) -> bool {
        self.shifted
    }

    /// Σ_τ s_n(L_τ).
    pub fn shift_total(&self) -> f64 {
        self.prefix
            .iter()
            .map(|&e| shift_s(self.n, e).expect("validated entries"))
            .sum()
    }

    /// Factor converting the shifted moment into the requested one.
    fn unshift_factor(&self) -> f64 {
        if self.shifted {
            1.0
        } else {
            (-self.exponents.c() * self.exponents.power() as f64 * self.shift_total()).exp()
        }
    }

    fn groups(&self) -> Vec<(Entry, usize)> {
        group_entries(&self.prefix)
    }
}

fn group_entries(prefix: &[Entry]) -> Vec<(Entry, usize)> {
    let mut groups: Vec<(Entry, usize)> = Vec::new();
    for &e in prefix {
        match groups.iter_mut().find(|(g, _)| *g == e) {
            Some((_, count)) => *count += 1,
            None => groups.push((e, 1)),
        }
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Residue,
    Quadrature,
    MonteCarlo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Residue => "residue",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

/// A moment value with the method that produced it and an error estimate:
/// the standard error for Monte Carlo, the node-doubling difference for
/// quadrature, a rounding-level bound for residues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentResult {
    pub value: f64,
    pub method: Method,
    pub error_estimate: f64,
}

/// e^{cγ}·Γ(1−u)/Γ(1−u−c) = Π_{k≥1} e^{c/k}(u+c−k)/(u−k).
pub fn infinite_factor(u: Complex64, c: f64) -> Result<Complex64> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::Domain(format!("exponent c must be nonnegative, got {c}")));
    }
    if u.im == 0.0 && u.re >= 1.0 && u.re == u.re.round() {
        return Err(Error::Pole(format!("infinite factor has a pole at u = {}", u.re)));
    }
    let one = Complex64::new(1.0, 0.0);
    Ok((c * EULER_GAMMA).exp() * gamma_ratio(one - u, one - u - c)?)
}

/// log F_τ(u) up to a multiple of 2πi.
fn log_factor(entry: Entry, n: usize, u: Complex64, c: f64) -> Result<Complex64> {
    match entry {
        Entry::Finite(l) => {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 1..=(l - n as u64) {
                let kf = k as f64;
                let den = u - kf;
                if den == Complex64::new(0.0, 0.0) {
                    return Err(Error::Pole(format!("factor has a pole at u = {kf}")));
                }
                acc += c / kf + (u + c - kf).ln() - den.ln();
            }
            Ok(acc)
        }
        Entry::Infinity => Ok(infinite_factor(u, c)?.ln()),
    }
}

/// Π_τ F_τ(u) over grouped entries.
fn factor_product(groups: &[(Entry, usize)], n: usize, u: Complex64, c: f64) -> Result<Complex64> {
    let mut log = Complex64::new(0.0, 0.0);
    for &(e, count) in groups {
        log += log_factor(e, n, u, c)? * count as f64;
    }
    Ok(log.exp())
}

/// Π_{ℓ=1}^n (u+ℓ−1)/(u+c+ℓ−1) · Π_τ F_τ(u).
fn integrand(groups: &[(Entry, usize)], n: usize, u: Complex64, c: f64) -> Result<Complex64> {
    let mut ratio = Complex64::new(1.0, 0.0);
    for l in 0..n {
        ratio *= (u + l as f64) / (u + c + l as f64);
    }
    Ok(ratio * factor_product(groups, n, u, c)?)
}

/// Shifted m = 1 moment by residues:
/// Σ_ℓ Π_{h≠ℓ}(h−ℓ−c)/(h−ℓ) · Π_τ F_τ(−c−ℓ+1).
pub fn residue_moment_m1(query: &MomentQuery) -> Result<MomentResult> {
    let Exponents::Single(c) = query.exponents else {
        return Err(Error::Validation("residue expansion is implemented for m = 1 only".into()));
    };
    let n = query.n;
    let groups = query.groups();
    let mut total = 0.0;
    let mut magnitude = 0.0;
    for l in 1..=n {
        let mut coeff = 1.0;
        for h in (1..=n).filter(|&h| h != l) {
            let d = h as f64 - l as f64;
            coeff *= (d - c) / d;
        }
        if coeff == 0.0 {
            continue;
        }
        let u = Complex64::new(-c - l as f64 + 1.0, 0.0);
        let f = factor_product(&groups, n, u, c)?;
        if !f.re.is_finite() || f.im.abs() > IMAGINARY_TOL * f.re.abs().max(1.0) {
            return Err(Error::Numeric(format!("residue factor at ℓ = {l} is not real: {f}")));
        }
        total += coeff * f.re;
        magnitude += (coeff * f.re).abs();
    }
    let scale = query.unshift_factor();
    let terms = (query.prefix.len() * n) as f64;
    Ok(MomentResult {
        value: total * scale,
        method: Method::Residue,
        error_estimate: 16.0 * f64::EPSILON * terms * magnitude * scale,
    })
}

/// Circle placement for the contour integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourLayout {
    pub center: f64,
    pub radius: f64,
    /// Outer radius for m = 2; equal to `radius` for m = 1.
    pub outer_radius: f64,
}

impl ContourLayout {
    pub fn for_exponents(n: usize, exponents: Exponents) -> Result<Self> {
        let c = exponents.c();
        let half_span = (n as f64 - 1.0) / 2.0;
        let center = -c - half_span;
        match exponents {
            Exponents::Single(_) => Ok(Self {
                center,
                radius: half_span + SINGLE_RING_MARGIN,
                outer_radius: half_span + SINGLE_RING_MARGIN,
            }),
            Exponents::Pair(_) => {
                if c >= PAIR_RING_SEPARATION {
                    return Err(Error::Infeasible(format!(
                        "m = 2 contours need the outer ring minus c to enclose the inner ring, \
                         i.e. c < {PAIR_RING_SEPARATION}; got c = {c}"
                    )));
                }
                Ok(Self {
                    center,
                    radius: half_span + INNER_RING_MARGIN,
                    outer_radius: half_span + INNER_RING_MARGIN + PAIR_RING_SEPARATION,
                })
            }
        }
    }

    fn perturbed(self, delta: f64) -> Self {
        Self {
            radius: self.radius + delta,
            outer_radius: self.outer_radius + delta,
            ..self
        }
    }
}

/// Integrand samples and the factor (u − center) from du = i(u − center)dθ.
fn ring(
    groups: &[(Entry, usize)],
    n: usize,
    c: f64,
    center: f64,
    radius: f64,
    nodes: usize,
) -> Result<Vec<(Complex64, Complex64)>> {
    (0..nodes)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / nodes as f64;
            let offset = Complex64::from_polar(radius, theta);
            let u = offset + center;
            Ok((u, integrand(groups, n, u, c)? * offset))
        })
        .collect()
}

/// (1/2πi)∮G(u)du on one circle with the trapezoidal rule.
fn single_contour(groups: &[(Entry, usize)], n: usize, c: f64, layout: ContourLayout, nodes: usize) -> Result<Complex64> {
    let samples = ring(groups, n, c, layout.center, layout.radius, nodes)?;
    Ok(samples.iter().map(|(_, w)| *w).sum::<Complex64>() / nodes as f64)
}

/// (1/2πi)²∮∮ K(u1,u2) G(u1) G(u2) du1 du2 with u1 on the inner and u2 on the
/// outer circle.
fn double_contour<K>(
    groups: &[(Entry, usize)],
    n: usize,
    c: f64,
    layout: ContourLayout,
    nodes: usize,
    kernel: &K,
) -> Result<Complex64>
where
    K: Fn(Complex64, Complex64) -> Complex64,
{
    let inner = ring(groups, n, c, layout.center, layout.radius, nodes)?;
    let outer = ring(groups, n, c, layout.center, layout.outer_radius, nodes)?;
    let mut total = Complex64::new(0.0, 0.0);
    for &(u2, w2) in &outer {
        let mut row = Complex64::new(0.0, 0.0);
        for &(u1, w1) in &inner {
            row += kernel(u1, u2) * w1;
        }
        total += row * w2;
    }
    Ok(total / (nodes * nodes) as f64)
}

/// Double `nodes` until two successive values agree to 1e-10 (relative to
/// max(1, |value|)) or [`MAX_NODES`] is reached.
fn refine<F>(start: usize, mut eval: F) -> Result<(Complex64, f64)>
where
    F: FnMut(usize) -> Result<Complex64>,
{
    let mut nodes = start.clamp(4, MAX_NODES);
    let mut prev = eval(nodes)?;
    while nodes < MAX_NODES {
        nodes *= 2;
        let next = eval(nodes)?;
        let diff = (next - prev).norm();
        prev = next;
        if diff < CONVERGENCE_TOL * next.norm().max(1.0) {
            return Ok((next, diff));
        }
        if nodes == MAX_NODES {
            return Ok((next, diff));
        }
    }
    Ok((prev, f64::NAN))
}

fn real_part(z: Complex64, what: &str) -> Result<f64> {
    if !z.re.is_finite() || z.im.abs() > IMAGINARY_TOL * z.re.abs().max(1.0) {
        return Err(Error::Numeric(format!("{what} has imaginary part {} (value {z})", z.im)));
    }
    Ok(z.re)
}

/// The contour-integral moment by trapezoidal quadrature.
///
/// `nodes` is the starting node count per circle; it doubles until converged.
pub fn contour_moment(query: &MomentQuery, nodes: usize) -> Result<MomentResult> {
    let layout = ContourLayout::for_exponents(query.n, query.exponents)?;
    contour_moment_with_layout(query, nodes, layout)
}

/// As [`contour_moment`] with explicit circles (for contour-independence checks).
pub fn contour_moment_with_layout(query: &MomentQuery, nodes: usize, layout: ContourLayout) -> Result<MomentResult> {
    let n = query.n;
    let c = query.exponents.c();
    let groups = query.groups();
    let (value, err) = match query.exponents {
        Exponents::Single(_) => {
            let (z, e) = refine(nodes, |m| single_contour(&groups, n, c, layout, m))?;
            (z / -c, e / c)
        }
        Exponents::Pair(_) => {
            let kernel = |u1: Complex64, u2: Complex64| {
                let d = u2 - u1;
                d * d / ((d - c) * (d + c))
            };
            let (z, e) = refine(nodes, |m| double_contour(&groups, n, c, layout, m, &kernel))?;
            (z / (c * c), e / (c * c))
        }
    };
    let scale = query.unshift_factor();
    Ok(MomentResult {
        value: real_part(value, "contour moment")? * scale,
        method: Method::Quadrature,
        error_estimate: err * scale,
    })
}

/// Contour layout nudged by `delta` on every radius.
pub fn perturbed_layout(n: usize, exponents: Exponents, delta: f64) -> Result<ContourLayout> {
    Ok(ContourLayout::for_exponents(n, exponents)?.perturbed(delta))
}

/// Var(Σ_j (y_j e^{Σ s})^c) with c = ĉ/T, as the double contour integral with
/// kernel 1/((u2−u1)² − c²).
pub fn variance_m2(n: usize, prefix: &[Entry], c_hat: f64, t: usize) -> Result<MomentResult> {
    variance_m2_nodes(n, prefix, c_hat, t, 64)
}

pub fn variance_m2_nodes(n: usize, prefix: &[Entry], c_hat: f64, t: usize, nodes: usize) -> Result<MomentResult> {
    if prefix.len() != t {
        return Err(Error::Validation(format!(
            "prefix has {} entries but T = {t}",
            prefix.len()
        )));
    }
    if !(c_hat.is_finite() && c_hat > 0.0) {
        return Err(Error::Validation(format!("ĉ must be positive, got {c_hat}")));
    }
    let c = c_hat / t as f64;
    let query = MomentQuery::new(n, prefix.to_vec(), Exponents::Pair(c), true)?;
    let kernel = move |u1: Complex64, u2: Complex64| {
        let d = u2 - u1;
        (d * d - c * c).inv()
    };
    variance_with_kernel(&query, nodes, &kernel)
}

fn variance_with_kernel<K>(query: &MomentQuery, nodes: usize, kernel: &K) -> Result<MomentResult>
where
    K: Fn(Complex64, Complex64) -> Complex64,
{
    let layout = ContourLayout::for_exponents(query.n, query.exponents)?;
    let c = query.exponents.c();
    let groups = query.groups();
    let (z, err) = refine(nodes, |m| double_contour(&groups, query.n, c, layout, m, kernel))?;
    Ok(MomentResult {
        value: real_part(z, "variance")?,
        method: Method::Quadrature,
        error_estimate: err,
    })
}

/// log y_j for one trial's factors, descending.
fn trial_log_y(n: usize, prefix: &[Entry], seed: u64, trial: u64) -> Result<Vec<f64>> {
    let factors = sample_prefix(prefix, n, seed, trial)?;
    exact_log_squared_singular_values(&factors)
}

fn power_sum(log_y: &[f64], c: f64, shift: f64) -> f64 {
    log_y.iter().map(|l| (c * (l + shift)).exp()).sum()
}

fn check_mc(query: &MomentQuery, trials: usize) -> Result<()> {
    if trials < 2 {
        return Err(Error::Validation("Monte Carlo needs at least 2 trials".into()));
    }
    if query.prefix.len() > EXACT_PATH_MAX_FACTORS {
        return Err(Error::Validation(format!(
            "Monte Carlo moments need T ≤ {EXACT_PATH_MAX_FACTORS}"
        )));
    }
    Ok(())
}

fn per_trial(query: &MomentQuery, trials: usize, seed: u64) -> Result<Vec<f64>> {
    let shift = if query.shifted { query.shift_total() } else { 0.0 };
    let c = query.exponents.c();
    map_trials(trials, |t| Ok(power_sum(&trial_log_y(query.n, &query.prefix, seed, t)?, c, shift)))
        .into_iter()
        .collect()
}

/// Sample mean and standard error of the moment's integrand.
///
/// Trial t draws factor τ from stream (seed, t, τ); results do not depend on
/// the thread count.
pub fn mc_moment(query: &MomentQuery, trials: usize, seed: u64) -> Result<MomentResult> {
    Ok(mc_moments(std::slice::from_ref(query), trials, seed)?.remove(0))
}

/// [`mc_moment`] for several queries sharing one prefix and shift convention,
/// evaluated on the same sampled products.
pub fn mc_moments(queries: &[MomentQuery], trials: usize, seed: u64) -> Result<Vec<MomentResult>> {
    let Some(first) = queries.first() else {
        return Ok(Vec::new());
    };
    if queries
        .iter()
        .any(|q| q.n != first.n || q.prefix != first.prefix || q.shifted != first.shifted)
    {
        return Err(Error::Validation("queries must share n, prefix and shift convention".into()));
    }
    check_mc(first, trials)?;
    let shift = if first.shifted { first.shift_total() } else { 0.0 };
    let rows: Vec<Vec<f64>> = map_trials(trials, |t| {
        let log_y = trial_log_y(first.n, &first.prefix, seed, t)?;
        Ok(queries
            .iter()
            .map(|q| power_sum(&log_y, q.exponents.c(), shift).powi(q.exponents.power()))
            .collect())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok((0..queries.len())
        .map(|k| {
            let samples: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let (mean, var) = mean_var(&samples);
            MomentResult {
                value: mean,
                method: Method::MonteCarlo,
                error_estimate: (var / trials as f64).sqrt(),
            }
        })
        .collect())
}

/// Sample variance of Σ_j (y_j e^{S})^c with the standard error of the
/// variance estimator, √((m4 − s⁴)/N).
pub fn mc_variance(query: &MomentQuery, trials: usize, seed: u64) -> Result<MomentResult> {
    check_mc(query, trials)?;
    let samples = per_trial(query, trials, seed)?;
    let (mean, var) = mean_var(&samples);
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / trials as f64;
    Ok(MomentResult {
        value: var,
        method: Method::MonteCarlo,
        error_estimate: ((m4 - var * var).max(0.0) / trials as f64).sqrt(),
    })
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
