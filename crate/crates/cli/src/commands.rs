//! Subcommands. Each validates its whole configuration into a plan before
//! any computation starts.

use picket_core::chain::{simulate_trials, EXACT_PATH_MAX_FACTORS};
use picket_core::ensemble::{alpha, mean_shift, measure_from_sequence, EnsembleSequence, FrequencyMeasure};
use picket_core::moments::{
    contour_moment, mc_moments, mc_variance, residue_moment_m1, variance_m2_nodes, ContourLayout, Exponents,
    MomentQuery, MomentResult,
};
use picket_core::spectrum::{lambda, lyapunov_exponents, LyapunovSpectrum};

use crate::config::ExperimentConfig;
use crate::record::{Cell, ResultRecord};
use crate::CliError;

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_NODES: usize = 512;
pub const DEFAULT_SIMULATE_TRIALS: usize = 8;
pub const DEFAULT_MOMENT_TRIALS: usize = 200_000;
pub const DEFAULT_I_MAX: usize = 5;
/// Quadrature must match residues to this.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;
/// Monte Carlo must fall within this many standard errors of the residue value.
pub const MC_SIGMAS: f64 = 4.0;

fn require<T: Clone>(value: &Option<T>, key: &str, command: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::Validation(format!("{command} requires `{key}`")))
}

fn positive(value: usize, key: &str) -> Result<usize, CliError> {
    if value == 0 {
        return Err(CliError::Validation(format!("`{key}` must be positive")));
    }
    Ok(value)
}

fn sequence(cfg: &ExperimentConfig, command: &str) -> Result<EnsembleSequence, CliError> {
    let n = positive(require(&cfg.n, "n", command)?, "n")?;
    let pattern = cfg.pattern.as_deref().unwrap_or("inf");
    Ok(EnsembleSequence::parse(n, pattern)?)
}

pub struct AnalyticPlan {
    seq: EnsembleSequence,
    measure: FrequencyMeasure,
    rows: usize,
}

pub fn plan_analytic(cfg: &ExperimentConfig) -> Result<AnalyticPlan, CliError> {
    let seq = sequence(cfg, "analytic")?;
    let n = seq.n();
    let rows = positive(cfg.i_max.unwrap_or(n), "i_max")?.min(n);
    Ok(AnalyticPlan {
        measure: measure_from_sequence(&seq),
        seq,
        rows,
    })
}

/// λ_i(n), normalized gaps and ε bounds; `lyapunov_limit` is λ_i(n) + log n,
/// the limit of (1/T)·log y_i.
pub fn cmd_analytic(cfg: &ExperimentConfig, plan: &AnalyticPlan) -> Result<ResultRecord, CliError> {
    let n = plan.seq.n();
    let spec = LyapunovSpectrum::compute(&plan.measure, n)?;
    let limit = lyapunov_exponents(&plan.measure, n)?;
    let mut rec = ResultRecord::new(
        "analytic",
        cfg,
        vec!["i", "lambda_i", "normalized_gap_i", "epsilon_bound_i", "lyapunov_limit_i"],
    );
    for i in 1..=plan.rows {
        rec.push(vec![
            i.into(),
            spec.lambda[i - 1].into(),
            spec.normalized_gaps[i - 1].into(),
            spec.epsilon_bounds[i - 1].into(),
            limit[i - 1].into(),
        ]);
    }
    rec.meta("n", n);
    rec.meta("pattern", plan.seq.to_string());
    rec.meta("measure", serde_json::to_value(&plan.measure)?);
    rec.meta("c_n", spec.c_n);
    rec.meta("alpha", alpha(&plan.measure, n)?);
    rec.meta("mean_shift", mean_shift(&plan.measure, n)?);
    Ok(rec)
}

pub struct SimulatePlan {
    seq: EnsembleSequence,
    t: usize,
    trials: usize,
    seed: u64,
}

pub fn plan_simulate(cfg: &ExperimentConfig) -> Result<SimulatePlan, CliError> {
    let seq = sequence(cfg, "simulate")?;
    let t = positive(require(&cfg.t, "T", "simulate")?, "T")?;
    let trials = positive(cfg.trials.unwrap_or(DEFAULT_SIMULATE_TRIALS), "trials")?;
    Ok(SimulatePlan {
        seq,
        t,
        trials,
        seed: cfg.seed.unwrap_or(DEFAULT_SEED),
    })
}

/// Per-trial (1/T)·log y_i plus one aggregate row per i with z-scores
/// against λ_i and against λ_i + log n.
pub fn cmd_simulate(cfg: &ExperimentConfig, plan: &SimulatePlan) -> Result<ResultRecord, CliError> {
    let n = plan.seq.n();
    let measure = measure_from_sequence(&plan.seq);
    let lam = lambda(&measure, n)?;
    let limit = lyapunov_exponents(&measure, n)?;
    let runs = simulate_trials(&plan.seq, plan.t, plan.trials, plan.seed)?;
    let mut rec = ResultRecord::new(
        "simulate",
        cfg,
        vec!["row", "trial", "i", "estimate", "stderr", "lambda_i", "z_score", "lyapunov_limit_i", "z_limit"],
    );
    for (trial, run) in runs.iter().enumerate() {
        for i in 0..n {
            rec.push(vec![
                "trial".into(),
                trial.into(),
                (i + 1).into(),
                run.values[i].into(),
                run.stderr[i].into(),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
            ]);
        }
    }
    let k = plan.trials as f64;
    for i in 0..n {
        let mean = runs.iter().map(|r| r.values[i]).sum::<f64>() / k;
        let stderr = if plan.trials > 1 {
            let var = runs.iter().map(|r| (r.values[i] - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            runs[0].stderr[i]
        };
        rec.push(vec![
            "aggregate".into(),
            Cell::Empty,
            (i + 1).into(),
            mean.into(),
            stderr.into(),
            lam[i].into(),
            ((mean - lam[i]) / stderr).into(),
            limit[i].into(),
            ((mean - limit[i]) / stderr).into(),
        ]);
    }
    rec.meta("n", n);
    rec.meta("pattern", plan.seq.to_string());
    rec.meta("T", plan.t);
    rec.meta("trials", plan.trials);
    rec.meta("seed", plan.seed);
    Ok(rec)
}

pub struct MomentsPlan {
    query: MomentQuery,
    nodes: usize,
    trials: usize,
    seed: u64,
    chat: Option<f64>,
}

pub fn plan_moments(cfg: &ExperimentConfig) -> Result<MomentsPlan, CliError> {
    let seq = sequence(cfg, "moments")?;
    let t = positive(require(&cfg.t, "T", "moments")?, "T")?;
    if t > EXACT_PATH_MAX_FACTORS {
        return Err(CliError::Validation(format!("moments requires T ≤ {EXACT_PATH_MAX_FACTORS}, got {t}")));
    }
    let c = require(&cfg.c, "c", "moments")?;
    if !(c.is_finite() && c > 0.0) {
        return Err(CliError::Validation(format!("`c` must be positive, got {c}")));
    }
    if let Some(chat) = cfg.chat {
        if !(chat.is_finite() && chat > 0.0) {
            return Err(CliError::Validation(format!("`chat` must be positive, got {chat}")));
        }
    }
    let trials = cfg.trials.unwrap_or(DEFAULT_MOMENT_TRIALS);
    if trials < 2 {
        return Err(CliError::Validation("moments requires trials ≥ 2".into()));
    }
    let nodes = positive(cfg.nodes.unwrap_or(DEFAULT_NODES), "nodes")?;
    let query = MomentQuery::single(seq.n(), seq.prefix(t), c, true)?;
    Ok(MomentsPlan {
        query,
        nodes,
        trials,
        seed: cfg.seed.unwrap_or(DEFAULT_SEED),
        chat: cfg.chat,
    })
}

fn moment_row(quantity: &str, r: &MomentResult, agrees: Option<bool>) -> Vec<Cell> {
    vec![
        quantity.into(),
        r.method.name().into(),
        r.value.into(),
        r.error_estimate.into(),
        agrees.map_or(Cell::Empty, Cell::Bool),
    ]
}

/// Residue, quadrature and Monte Carlo values of the shifted m = 1 moment,
/// each with an agreement verdict against the residue value. With `chat` the
/// variance at c = ĉ/T is added by quadrature and Monte Carlo.
pub fn cmd_moments(cfg: &ExperimentConfig, plan: &MomentsPlan) -> Result<ResultRecord, CliError> {
    let q = &plan.query;
    let n = q.n();
    let t = q.prefix().len();
    // Surface contour infeasibility before any sampling.
    let variance_query = match plan.chat {
        Some(chat) => {
            let vq = MomentQuery::single(n, q.prefix().to_vec(), chat / t as f64, true)?;
            ContourLayout::for_exponents(n, Exponents::Pair(vq.exponents().c()))?;
            Some((chat, vq))
        }
        None => None,
    };
    let residue = residue_moment_m1(q)?;
    let quad = contour_moment(q, plan.nodes)?;
    let mc = mc_moments(std::slice::from_ref(q), plan.trials, plan.seed)?.remove(0);
    let quad_ok = (quad.value - residue.value).abs() <= QUADRATURE_TOLERANCE * residue.value.abs().max(1.0);
    let mc_ok = (mc.value - residue.value).abs() <= MC_SIGMAS * mc.error_estimate;
    let mut rec = ResultRecord::new("moments", cfg, vec!["quantity", "method", "value", "error_estimate", "agrees"]);
    rec.push(moment_row("moment", &residue, Some(true)));
    rec.push(moment_row("moment", &quad, Some(quad_ok)));
    rec.push(moment_row("moment", &mc, Some(mc_ok)));
    rec.passed = quad_ok && mc_ok;
    if let Some((chat, vq)) = variance_query {
        let var = variance_m2_nodes(n, q.prefix(), chat, t, plan.nodes.min(64))?;
        let mc_var = mc_variance(&vq, plan.trials, plan.seed)?;
        let var_ok = (mc_var.value - var.value).abs() <= MC_SIGMAS * mc_var.error_estimate;
        rec.push(moment_row("variance", &var, None));
        rec.push(moment_row("variance", &mc_var, Some(var_ok)));
        rec.passed &= var_ok;
        rec.meta("chat", chat);
    }
    rec.meta("n", n);
    rec.meta("T", t);
    rec.meta("c", q.exponents().c());
    let prefix: Vec<String> = q.prefix().iter().map(|e| e.to_string()).collect();
    rec.meta("prefix", prefix.join(","));
    rec.meta("shift_total", q.shift_total());
    rec.meta("trials", plan.trials);
    rec.meta("seed", plan.seed);
    rec.meta("agreement", rec.passed);
    Ok(rec)
}

pub struct PicketPlan {
    pattern: String,
    grid: Vec<usize>,
    i_max: usize,
}

pub fn plan_picketfence(cfg: &ExperimentConfig) -> Result<PicketPlan, CliError> {
    let grid = require(&cfg.n_grid, "n_grid", "picketfence")?;
    if grid.is_empty() || grid[0] == 0 {
        return Err(CliError::Validation("`n_grid` entries must be positive".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Validation("`n_grid` must be strictly ascending".into()));
    }
    let i_max = positive(cfg.i_max.unwrap_or(DEFAULT_I_MAX), "i_max")?;
    if i_max > grid[0] {
        return Err(CliError::Validation(format!("`i_max` = {i_max} exceeds the smallest n = {}", grid[0])));
    }
    let pattern = cfg.pattern.clone().unwrap_or_else(|| "inf".into());
    for &n in &grid {
        EnsembleSequence::parse(n, &pattern)?;
    }
    Ok(PicketPlan { pattern, grid, i_max })
}

/// Deviations of the normalized gaps from −(i−1) along an n-grid, with the
/// envelope ε_i(n)/c(n) = (i−1)²/(n−i+1). Rows with
/// i > ⌊√n⌋ lie outside the theorem's window and are marked.
pub fn cmd_picketfence(cfg: &ExperimentConfig, plan: &PicketPlan) -> Result<ResultRecord, CliError> {
    let mut rec = ResultRecord::new(
        "picketfence",
        cfg,
        vec!["n", "i", "normalized_gap", "deviation", "epsilon_envelope", "within_envelope", "in_window"],
    );
    for &n in &plan.grid {
        let measure = measure_from_sequence(&EnsembleSequence::parse(n, &plan.pattern)?);
        let spec = LyapunovSpectrum::compute(&measure, n)?;
        let window = (n as f64).sqrt().floor() as usize;
        for i in 1..=plan.i_max {
            let dev = spec.deviation(i);
            let eps = spec.epsilon_bounds[i - 1] / spec.c_n;
            rec.push(vec![
                n.into(),
                i.into(),
                spec.normalized_gaps[i - 1].into(),
                dev.into(),
                eps.into(),
                (dev.abs() <= eps + 1e-9).into(),
                (i <= window).into(),
            ]);
        }
    }
    rec.meta("pattern", plan.pattern.clone());
    rec.meta("i_max", plan.i_max);
    Ok(rec)
}
