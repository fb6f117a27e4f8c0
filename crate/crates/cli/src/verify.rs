//! The property suite behind `picket verify`.

use std::collections::BTreeMap;

use picket_core::chain::run_chain;
use picket_core::ensemble::{alpha, empirical_tail, measure_from_sequence, EnsembleSequence, Entry, FrequencyMeasure};
use picket_core::moments::{contour_moment, mc_moments, residue_moment_m1, variance_m2, MomentQuery};
use picket_core::sampler::{map_trials, sample_factor, RngStream};
use picket_core::spectrum::{lambda, laplace_identity_value};

use crate::commands::DEFAULT_SEED;
use crate::config::ExperimentConfig;
use crate::record::ResultRecord;
use crate::CliError;

/// Pass thresholds, one per property. A property passes when its measured
/// discrepancy is at most its tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub determinant: f64,
    pub tail: f64,
    pub laplace: f64,
    pub quadrature: f64,
    /// Standard errors allowed between Monte Carlo and residues.
    pub mc_sigmas: f64,
    /// Upper bound on Var(T+1 decade)/Var(T decade).
    pub variance_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            determinant: 1e-6,
            tail: 0.0,
            laplace: 1e-9,
            quadrature: 1e-8,
            mc_sigmas: 4.0,
            variance_ratio: 1.0,
        }
    }
}

struct Check {
    property: &'static str,
    discrepancy: f64,
    tolerance: f64,
}

fn determinant_identity(seed: u64) -> Result<f64, CliError> {
    let worst = map_trials(12, |chain| -> Result<f64, CliError> {
        let n = 1 + (chain as usize % 6);
        let seq = EnsembleSequence::parse(n, "inf,+1,+3")?;
        let mut det_sum = 0.0;
        let mut factors = Vec::new();
        for tau in 1..=300 {
            let e = seq.entry(tau);
            let x = sample_factor(e, n, RngStream::for_factor(seed, chain, tau as u64))?;
            det_sum += x.as_matrix().clone().determinant().norm().ln();
            factors.push((x, e));
        }
        let state = run_chain(n, factors)?;
        let sum: f64 = state.log_squared_singular_values().iter().sum();
        Ok((sum - 2.0 * det_sum).abs())
    });
    worst.into_iter().try_fold(0.0, |acc, r| Ok(f64::max(acc, r?)))
}

/// Closed-form tail counts against a direct count, and whole-period tails
/// against the derived measure.
fn tail_counts() -> Result<f64, CliError> {
    let mut worst = 0.0f64;
    for (n, pattern) in [(2, "inf,5,3,+2"), (4, "+1,+1,9,inf,+6")] {
        let seq = EnsembleSequence::parse(n, pattern)?;
        let measure = measure_from_sequence(&seq);
        for t in 1..=40 {
            for k in 1..=8 {
                let direct = seq
                    .prefix(t)
                    .iter()
                    .filter(|e| match e {
                        Entry::Infinity => true,
                        Entry::Finite(l) => *l - n as u64 >= k,
                    })
                    .count() as f64
                    / t as f64;
                let fast = empirical_tail(&seq, k, t)?.to_f64();
                worst = worst.max((fast - direct).abs());
                if t % seq.period() == 0 {
                    worst = worst.max((measure.tail_weight(k)? - direct).abs());
                }
            }
        }
    }
    Ok(worst)
}

fn laplace_identity() -> Result<f64, CliError> {
    let measures = [
        FrequencyMeasure::ginibre(),
        FrequencyMeasure::new(BTreeMap::from([(3, 0.5)]), 0.5)?,
        FrequencyMeasure::new(BTreeMap::from([(2, 0.3), (5, 0.2), (11, 0.1)]), 0.4)?,
    ];
    let mut worst = 0.0f64;
    for m in &measures {
        for n in 1..=30 {
            let lam = lambda(m, n)?;
            let a = alpha(m, n)?;
            for i in 1..=n {
                worst = worst.max((lam[i - 1] + a - laplace_identity_value(m, n, i)?).abs());
            }
        }
    }
    Ok(worst)
}

/// (max |quadrature − residue|, max Monte Carlo z-score).
fn three_way(seed: u64) -> Result<(f64, f64), CliError> {
    let cases = [
        (1, vec![Entry::Finite(2)]),
        (2, vec![Entry::Infinity, Entry::Finite(5), Entry::Infinity, Entry::Finite(5)]),
        (3, vec![Entry::Finite(4), Entry::Infinity]),
    ];
    let (mut quad, mut z) = (0.0f64, 0.0f64);
    for (n, prefix) in cases {
        let queries = [0.3, 1.0]
            .iter()
            .map(|&c| MomentQuery::single(n, prefix.clone(), c, true))
            .collect::<Result<Vec<_>, _>>()?;
        let mc = mc_moments(&queries, 20_000, seed)?;
        for (q, m) in queries.iter().zip(&mc) {
            let r = residue_moment_m1(q)?.value;
            quad = quad.max((contour_moment(q, 512)?.value - r).abs() / r.abs().max(1.0));
            z = z.max((m.value - r).abs() / m.error_estimate);
        }
    }
    Ok((quad, z))
}

/// Largest ratio of successive variances over T ∈ {10, 100, 1000}.
fn variance_decay() -> Result<f64, CliError> {
    let v = [10usize, 100, 1000]
        .iter()
        .map(|&t| Ok(variance_m2(1, &vec![Entry::Infinity; t], 1.0, t)?.value))
        .collect::<Result<Vec<f64>, CliError>>()?;
    Ok((v[1] / v[0]).max(v[2] / v[1]))
}

pub fn cmd_verify(cfg: &ExperimentConfig, tol: &Tolerances) -> Result<ResultRecord, CliError> {
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let (quad, z) = three_way(seed)?;
    let checks = [
        Check {
            property: "determinant_identity",
            discrepancy: determinant_identity(seed)?,
            tolerance: tol.determinant,
        },
        Check {
            property: "tail_vs_direct_count",
            discrepancy: tail_counts()?,
            tolerance: tol.tail,
        },
        Check {
            property: "laplace_identity",
            discrepancy: laplace_identity()?,
            tolerance: tol.laplace,
        },
        Check {
            property: "quadrature_vs_residue",
            discrepancy: quad,
            tolerance: tol.quadrature,
        },
        Check {
            property: "monte_carlo_vs_residue_sigmas",
            discrepancy: z,
            tolerance: tol.mc_sigmas,
        },
        Check {
            property: "variance_decay_ratio",
            discrepancy: variance_decay()?,
            tolerance: tol.variance_ratio,
        },
    ];
    let mut rec = ResultRecord::new("verify", cfg, vec!["property", "discrepancy", "tolerance", "pass"]);
    for c in &checks {
        let pass = c.discrepancy <= c.tolerance;
        rec.passed &= pass;
        rec.push(vec![c.property.into(), c.discrepancy.into(), c.tolerance.into(), pass.into()]);
    }
    rec.meta("seed", seed);
    Ok(rec)
}
