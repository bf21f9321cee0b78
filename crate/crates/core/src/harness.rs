//! End-to-end experiments for the four error components (propagation of
//! chaos, optimization, statistical, sparse), the non-realizability floor
//! and the cross-term bookkeeping.
//!
//! Every run is an independent job seeded from the base seed and its grid
//! coordinates, so results do not depend on how rayon schedules the jobs.
//! The statistical estimate shares random numbers across sample sizes
//! within a repetition.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{self, HermiteExpansion, ScheduleVerdict};
use crate::dynamics::{
    eval_set, l2_risk_with_stderr, step_in_place, DynamicsConfig, GradientMode, DEFAULT_BATCH,
    DEFAULT_DT, DEFAULT_EVAL_SIZE,
};
use crate::error::{Error, Result};
use crate::model::{sample_dataset, ActivationSpec, DataLaw, Ensemble, TargetSpec};
use crate::moments::{empirical_weighted_norm, InitSpec, WeightSequence};
use crate::output::fmt_f64;
use crate::rng::{derive_seed, Tag};
use crate::stats::{self, fit_linear, fit_loglog, LinearFit};
use crate::transport::{coupled_run_observed, CouplingOptions, CouplingRecord, DEFAULT_N_REF};

/// Smallest grid any estimator accepts.
pub const MIN_GRID: usize = 4;
pub const DEFAULT_N_LARGE: usize = 2048;

fn check_geometric(name: &str, grid: &[f64]) -> Result<()> {
    if grid.len() < MIN_GRID {
        return Err(Error::invalid(name, format!("need at least {MIN_GRID} values")));
    }
    if grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid(name, "values must be positive"));
    }
    let q = grid[1] / grid[0];
    if !(q > 1.0) {
        return Err(Error::invalid(name, "must be increasing"));
    }
    for p in grid.windows(2) {
        if ((p[1] / p[0]) / q - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(name, "must be geometric"));
        }
    }
    Ok(())
}

fn steps_for(horizon: f64, dt: f64) -> Result<u64> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("horizon", "must be positive"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    let steps = (horizon / dt).round();
    if steps < 1.0 {
        return Err(Error::invalid("horizon", "shorter than one step"));
    }
    Ok(steps as u64)
}

/// Mean over repetitions at one grid coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub value: f64,
    pub stderr: f64,
    pub reps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PocOptions {
    pub dt: f64,
    pub batch_size: usize,
    pub n_ref: usize,
    pub record_every: u64,
    pub seed: u64,
    /// Highest order of the weighted moment norm tracked along the run.
    pub moment_order: u32,
}

impl Default for PocOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            batch_size: DEFAULT_BATCH,
            n_ref: DEFAULT_N_REF,
            record_every: 10,
            seed: 0,
            moment_order: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PocReport {
    /// `N ↦` mean synchronous bound at the horizon.
    pub grid: Vec<GridPoint>,
    pub fit: LinearFit,
    /// Set for a single repetition: no spread estimate behind the means.
    pub wide_ci: bool,
    /// Recorded times where the exact W2² exceeded the synchronous bound.
    pub dominance_violations: usize,
    /// Largest ratio of the weighted moment norm (weights `w*` of the μP
    /// law) to its value at `t = 0`, over all runs and recorded times.
    pub max_moment_ratio: f64,
    #[serde(skip)]
    pub records: Vec<CouplingRecord>,
}

/// Slack allowed when comparing the exact distance to the synchronous bound.
pub const DOMINANCE_SLACK: f64 = 1e-12;

/// Synchronous-coupling estimate of `E_poc` over a geometric width grid.
pub fn estimate_e_poc(
    spec: &ActivationSpec,
    target: &TargetSpec,
    lambda: f64,
    horizon: f64,
    n_grid: &[usize],
    reps: u32,
    opts: &PocOptions,
) -> Result<PocReport> {
    let xs: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    check_geometric("N_grid", &xs)?;
    if reps == 0 {
        return Err(Error::invalid("reps", "must be at least 1"));
    }
    let steps = steps_for(horizon, opts.dt)?;
    DynamicsConfig::population(lambda, opts.dt, steps, opts.batch_size, 0)?;
    let law = DataLaw::noiseless(target.clone());
    let d = target.input_dim();
    let weights = WeightSequence::reciprocal_of_init(&InitSpec::Mup { d: d as u32 }, opts.moment_order)?;

    let jobs: Vec<(usize, u32)> = n_grid
        .iter()
        .flat_map(|&n| (0..reps).map(move |r| (n, r)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(n, r)| -> Result<(CouplingRecord, f64)> {
            let seed = derive_seed(opts.seed, &[n as u64, r as u64]);
            let cfg = DynamicsConfig::population(lambda, opts.dt, steps, opts.batch_size, seed)?;
            let copts = CouplingOptions {
                record_every: opts.record_every,
                repetition: r,
                ..Default::default()
            };
            let mut norms = Vec::new();
            let rec = coupled_run_observed(n, opts.n_ref, &cfg, spec, &law, &copts, |_, sys, _| {
                norms.push(empirical_weighted_norm(sys, &weights, opts.moment_order));
            })?;
            let norms = norms.into_iter().collect::<Result<Vec<f64>>>()?;
            let ratio = norms.iter().fold(0.0f64, |m, v| m.max(v / norms[0]));
            Ok((rec, ratio))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut grid = Vec::with_capacity(n_grid.len());
    for (k, &n) in n_grid.iter().enumerate() {
        let vals: Vec<f64> = runs[k * reps as usize..(k + 1) * reps as usize]
            .iter()
            .map(|(rec, _)| rec.final_sync_bound())
            .collect();
        grid.push(GridPoint {
            x: n as f64,
            value: stats::mean(&vals),
            stderr: stats::stderr(&vals),
            reps,
        });
    }
    let means: Vec<f64> = grid.iter().map(|g| g.value).collect();
    let fit = fit_loglog(&xs, &means)?;
    let dominance_violations = runs
        .iter()
        .map(|(rec, _)| rec.dominance_violations(DOMINANCE_SLACK).len())
        .sum();
    let max_moment_ratio = runs.iter().fold(0.0f64, |m, (_, r)| m.max(*r));
    Ok(PocReport {
        grid,
        fit,
        wide_ci: reps == 1,
        dominance_violations,
        max_moment_ratio,
        records: runs.into_iter().map(|(rec, _)| rec).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptOptions {
    pub dt: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub eval_size: usize,
    /// Fit window as fractions of the final time.
    pub window: (f64, f64),
    /// Trailing fraction of the series averaged into the plateau.
    pub plateau_fraction: f64,
    /// Points whose excess is within this many spreads of the plateau are
    /// left out of the fit.
    pub floor_sigmas: f64,
}

impl Default for OptOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            batch_size: DEFAULT_BATCH,
            seed: 0,
            eval_size: DEFAULT_EVAL_SIZE,
            window: (0.1, 0.5),
            plateau_fraction: 0.1,
            floor_sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptPoint {
    pub time: f64,
    pub risk: f64,
    /// `risk − plateau`.
    pub excess: f64,
    pub mc_stderr: f64,
    pub in_fit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptReport {
    pub n_large: usize,
    pub initial_risk: f64,
    pub grid: Vec<OptPoint>,
    pub plateau: f64,
    pub noise_floor: f64,
    /// Fit of `log excess` against time over the window.
    pub fit: Option<LinearFit>,
    pub alpha_hat: Option<f64>,
    pub no_decay: bool,
}

impl OptReport {
    pub fn final_risk(&self) -> f64 {
        self.grid.last().map(|p| p.risk).unwrap_or(self.initial_risk)
    }
}

/// One long run at width `n_large`; the excess risk over the terminal
/// plateau is fitted to an exponential on the tail window.
pub fn estimate_e_opt(
    spec: &ActivationSpec,
    target: &TargetSpec,
    lambda: f64,
    t_grid: &[f64],
    n_large: usize,
    opts: &OptOptions,
) -> Result<OptReport> {
    if t_grid.len() < MIN_GRID {
        return Err(Error::invalid("T_grid", format!("need at least {MIN_GRID} values")));
    }
    if t_grid.windows(2).any(|p| !(p[1] > p[0])) || !(t_grid[0] > 0.0) {
        return Err(Error::invalid("T_grid", "must be positive and increasing"));
    }
    let (lo, hi) = opts.window;
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::invalid("window", "need 0 <= start < end <= 1"));
    }
    if !(opts.plateau_fraction > 0.0 && opts.plateau_fraction < 1.0) {
        return Err(Error::invalid("plateau_fraction", "must lie in (0, 1)"));
    }
    let marks = t_grid
        .iter()
        .map(|&t| steps_for(t, opts.dt))
        .collect::<Result<Vec<u64>>>()?;
    if marks.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::invalid("T_grid", "two times round to the same step"));
    }
    let steps = *marks.last().unwrap();
    let cfg = DynamicsConfig::population(lambda, opts.dt, steps, opts.batch_size, opts.seed)?;
    let law = DataLaw::noiseless(target.clone());
    let eval = eval_set(target, opts.eval_size, derive_seed(opts.seed, &[Tag::Eval as u64]))?;

    let mut ens = Ensemble::mup_init(target.input_dim(), n_large, opts.seed)?;
    let (initial_risk, _) = l2_risk_with_stderr(&ens, target, spec, &eval)?;
    let mut raw = Vec::with_capacity(marks.len());
    let mut next = 0;
    for step in 0..steps {
        step_in_place(&mut ens, &cfg, spec, &law, step)?;
        if step + 1 == marks[next] {
            let (r, s) = l2_risk_with_stderr(&ens, target, spec, &eval)?;
            raw.push((ens.time, r, s));
            next += 1;
        }
    }

    let k = ((raw.len() as f64 * opts.plateau_fraction).ceil() as usize).max(1);
    let tail: Vec<f64> = raw[raw.len() - k..].iter().map(|p| p.1).collect();
    let plateau = stats::mean(&tail);
    let spread = stats::stderr(&tail) * (tail.len() as f64).sqrt();
    let mc = stats::mean(&raw[raw.len() - k..].iter().map(|p| p.2).collect::<Vec<_>>());
    let noise_floor = opts.floor_sigmas * spread.max(mc);

    let t_end = raw.last().unwrap().0;
    let grid: Vec<OptPoint> = raw
        .iter()
        .map(|&(time, risk, mc_stderr)| {
            let excess = risk - plateau;
            OptPoint {
                time,
                risk,
                excess,
                mc_stderr,
                in_fit: time >= lo * t_end && time <= hi * t_end && excess > noise_floor,
            }
        })
        .collect();
    let (ts, ls): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .filter(|p| p.in_fit)
        .map(|p| (p.time, p.excess.ln()))
        .unzip();
    let fit = if ts.len() >= 3 { Some(fit_linear(&ts, &ls)?) } else { None };
    let alpha_hat = fit.and_then(|f| (f.slope < 0.0).then_some(-f.slope));
    Ok(OptReport {
        n_large,
        initial_risk,
        grid,
        plateau,
        noise_floor,
        fit,
        alpha_hat,
        no_decay: alpha_hat.is_none(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatOptions {
    pub dt: f64,
    /// Batch size of the population-trained twin; large so that its own
    /// sampling noise stays below the smallest excess on the grid.
    pub twin_batch: usize,
    pub label_noise: f64,
    pub seed: u64,
    pub eval_size: usize,
    /// A mean excess within this many standard errors of zero is flagged.
    pub floor_sigmas: f64,
}

impl Default for StatOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            twin_batch: 2048,
            label_noise: 2.0,
            seed: 0,
            eval_size: DEFAULT_EVAL_SIZE,
            floor_sigmas: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatPoint {
    pub n: usize,
    /// Mean of empirical-run risk minus population-twin risk.
    pub excess: f64,
    pub stderr: f64,
    pub empirical_risk: f64,
    pub population_risk: f64,
    pub below_floor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatReport {
    pub width: usize,
    pub grid: Vec<StatPoint>,
    /// Log-log fit over the points with positive mean excess.
    pub fit: Option<LinearFit>,
    pub wide_ci: bool,
}

/// Full-batch training on `n` noisy samples against a population-trained
/// twin sharing its initialization and Brownian increments.
#[allow(clippy::too_many_arguments)]
pub fn estimate_e_stat(
    spec: &ActivationSpec,
    target: &TargetSpec,
    lambda: f64,
    horizon: f64,
    width: usize,
    n_grid: &[usize],
    reps: u32,
    opts: &StatOptions,
) -> Result<StatReport> {
    let xs: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    check_geometric("n_grid", &xs)?;
    if reps == 0 {
        return Err(Error::invalid("reps", "must be at least 1"));
    }
    if width == 0 {
        return Err(Error::invalid("N", "must be at least 1"));
    }
    let steps = steps_for(horizon, opts.dt)?;
    DynamicsConfig::population(lambda, opts.dt, steps, opts.twin_batch, 0)?;
    let law = DataLaw::new(target.clone(), opts.label_noise)?;
    let eval = eval_set(target, opts.eval_size, derive_seed(opts.seed, &[Tag::Eval as u64]))?;

    // Common random numbers across the sample-size grid: per repetition one
    // initialization, one Brownian stream, nested datasets and one twin.
    let n_max = *n_grid.last().unwrap();
    let jobs: Vec<(u32, Option<usize>)> = (0..reps)
        .flat_map(|r| std::iter::once((r, None)).chain(n_grid.iter().map(move |&n| (r, Some(n)))))
        .collect();
    let risks = jobs
        .par_iter()
        .map(|&(r, n)| -> Result<f64> {
            let seed = derive_seed(opts.seed, &[r as u64]);
            let cfg = match n {
                None => DynamicsConfig::population(lambda, opts.dt, steps, opts.twin_batch, seed)?,
                Some(n) => {
                    let full = sample_dataset(&law, n_max, derive_seed(seed, &[Tag::Dataset as u64]))?;
                    DynamicsConfig {
                        lambda,
                        dt: opts.dt,
                        steps,
                        gradient: GradientMode::Empirical {
                            dataset: Arc::new(full.prefix(n)),
                        },
                        seed,
                    }
                }
            };
            let mut ens = Ensemble::mup_init(target.input_dim(), width, seed)?;
            for step in 0..cfg.steps {
                step_in_place(&mut ens, &cfg, spec, &law, step)?;
            }
            Ok(l2_risk_with_stderr(&ens, target, spec, &eval)?.0)
        })
        .collect::<Result<Vec<f64>>>()?;
    let per_rep = n_grid.len() + 1;
    let runs: Vec<Vec<(f64, f64)>> = (0..n_grid.len())
        .map(|k| {
            (0..reps as usize)
                .map(|r| (risks[r * per_rep + 1 + k], risks[r * per_rep]))
                .collect()
        })
        .collect();

    let grid: Vec<StatPoint> = n_grid
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let chunk = &runs[k];
            let ex: Vec<f64> = chunk.iter().map(|(e, p)| e - p).collect();
            let excess = stats::mean(&ex);
            let stderr = stats::stderr(&ex);
            StatPoint {
                n,
                excess,
                stderr,
                empirical_risk: stats::mean(&chunk.iter().map(|c| c.0).collect::<Vec<_>>()),
                population_risk: stats::mean(&chunk.iter().map(|c| c.1).collect::<Vec<_>>()),
                below_floor: excess <= opts.floor_sigmas * stderr,
            }
        })
        .collect();
    let (fx, fy): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .filter(|p| p.excess > 0.0)
        .map(|p| (p.n as f64, p.excess))
        .unzip();
    let fit = if fx.len() >= 3 { Some(fit_loglog(&fx, &fy)?) } else { None };
    Ok(StatReport {
        width,
        grid,
        fit,
        wide_ci: reps == 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsePoint {
    pub lambda: f64,
    pub kappa: f64,
    pub s_up: u64,
    pub tail_energy: f64,
}

/// Least-squares fit `κ ≈ α·λ² + β·λ·log(1/λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaShape {
    pub alpha: f64,
    pub beta: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseReport {
    pub grid: Vec<SparsePoint>,
    pub shape: Option<KappaShape>,
}

/// Thresholds the coefficient sequence at every `λ` of the grid.
pub fn estimate_e_sparse(
    coefficients: &HermiteExpansion,
    lambda_grid: &[f64],
    c_sigma: f64,
    mult_sigma: u32,
) -> Result<SparseReport> {
    if lambda_grid.len() < MIN_GRID {
        return Err(Error::invalid("lambda_grid", format!("need at least {MIN_GRID} values")));
    }
    let grid = lambda_grid
        .iter()
        .map(|&lambda| {
            let t = dictionary::threshold(coefficients, lambda, c_sigma, mult_sigma)?;
            Ok(SparsePoint {
                lambda,
                kappa: t.kappa,
                s_up: t.s_up,
                tail_energy: t.tail_energy(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let shape = kappa_shape(&grid);
    Ok(SparseReport { grid, shape })
}

fn kappa_shape(grid: &[SparsePoint]) -> Option<KappaShape> {
    let rows: Vec<(f64, f64, f64)> = grid
        .iter()
        .map(|p| (p.lambda * p.lambda, p.lambda * (1.0 / p.lambda).ln(), p.kappa))
        .collect();
    let (mut s11, mut s12, mut s22, mut s1y, mut s2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(u, v, y) in &rows {
        s11 += u * u;
        s12 += u * v;
        s22 += v * v;
        s1y += u * y;
        s2y += v * y;
    }
    let det = s11 * s22 - s12 * s12;
    if !(det.abs() > 1e-300) {
        return None;
    }
    let alpha = (s22 * s1y - s12 * s2y) / det;
    let beta = (s11 * s2y - s12 * s1y) / det;
    let ys: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let my = stats::mean(&ys);
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = rows
        .iter()
        .map(|&(u, v, y)| {
            let e = y - alpha * u - beta * v;
            e * e
        })
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(KappaShape { alpha, beta, r2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub width: usize,
    pub lambda: f64,
    pub dt: f64,
    pub steps: u64,
    pub batch_size: usize,
    pub seed: u64,
    pub eval_size: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            width: 256,
            lambda: 0.01,
            dt: DEFAULT_DT,
            steps: 4000,
            batch_size: DEFAULT_BATCH,
            seed: 1,
            eval_size: DEFAULT_EVAL_SIZE,
        }
    }
}

/// Population-mode training from μP initialization; returns the held-out
/// L2 risk at the end.
pub fn terminal_risk(spec: &ActivationSpec, target: &TargetSpec, opts: &TrainOptions) -> Result<f64> {
    let cfg = DynamicsConfig::population(opts.lambda, opts.dt, opts.steps, opts.batch_size, opts.seed)?;
    let law = DataLaw::noiseless(target.clone());
    let eval = eval_set(target, opts.eval_size, derive_seed(opts.seed, &[Tag::Eval as u64]))?;
    let mut ens = Ensemble::mup_init(target.input_dim(), opts.width, opts.seed)?;
    for step in 0..cfg.steps {
        step_in_place(&mut ens, &cfg, spec, &law, step)?;
    }
    Ok(l2_risk_with_stderr(&ens, target, spec, &eval)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorBranch {
    /// `m ≤ k`: the target lies in the span of the degree-`k` features.
    Realizable,
    /// `m > k`: the target is orthogonal to every degree-`k` feature.
    Floor,
}

pub const FLOOR_FRACTION: f64 = 0.8;
pub const REALIZABLE_CEILING: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorReport {
    pub k: u32,
    pub m: u32,
    pub d: usize,
    pub branch: FloorBranch,
    pub trained_risk: f64,
    /// `‖f*‖²`, 1 for a normalized Hermite target.
    pub floor: f64,
    /// Floor branch: risk must stay at or above this. Realizable branch:
    /// risk must fall below it.
    pub threshold: f64,
    pub pass: bool,
}

pub fn floor_branch(k: u32, m: u32) -> FloorBranch {
    if m <= k {
        FloorBranch::Realizable
    } else {
        FloorBranch::Floor
    }
}

/// Trains a `monomial(k)` network on the normalized Hermite target `ĥ_m`
/// along the diagonal direction of `R^d`.
pub fn nonrealizability_floor(k: u32, m: u32, d: usize, opts: &TrainOptions) -> Result<FloorReport> {
    if d == 0 {
        return Err(Error::invalid("d", "must be at least 1"));
    }
    let spec = ActivationSpec::monomial(k)?;
    let target = TargetSpec::hermite_single(m, vec![1.0; d])?;
    let trained_risk = terminal_risk(&spec, &target, opts)?;
    let floor = 1.0;
    let branch = floor_branch(k, m);
    let (threshold, pass) = match branch {
        FloorBranch::Floor => (FLOOR_FRACTION * floor, trained_risk >= FLOOR_FRACTION * floor),
        FloorBranch::Realizable => (REALIZABLE_CEILING * floor, trained_risk < REALIZABLE_CEILING * floor),
    };
    Ok(FloorReport {
        k,
        m,
        d,
        branch,
        trained_risk,
        floor,
        threshold,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Components {
    pub poc: f64,
    pub opt: f64,
    pub stat: f64,
    pub sparse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossPair {
    pub pair: String,
    /// `√(a·b)`, or 0 for a pair that vanishes exactly.
    pub bound: f64,
    pub exact_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTermReport {
    pub pairs: Vec<CrossPair>,
    pub factor: f64,
    /// `factor · Σ √(a·b)` over the four non-vanishing pairs.
    pub bound: f64,
    pub component_sum: f64,
}

pub const CROSS_FACTOR: f64 = 2.0;

/// Bookkeeping for the cross terms between the four components: the pairs
/// involving the chaos term and the statistical or sparse term vanish, the
/// other four are bounded by Cauchy–Schwarz.
pub fn cross_term_report(c: &Components) -> Result<CrossTermReport> {
    for (name, v) in [("poc", c.poc), ("opt", c.opt), ("stat", c.stat), ("sparse", c.sparse)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(name, "component must be nonnegative"));
        }
    }
    let pair = |name: &str, a: f64, b: f64| CrossPair {
        pair: name.to_string(),
        bound: (a * b).sqrt(),
        exact_zero: false,
    };
    let zero = |name: &str| CrossPair {
        pair: name.to_string(),
        bound: 0.0,
        exact_zero: true,
    };
    let pairs = vec![
        pair("poc_opt", c.poc, c.opt),
        pair("opt_stat", c.opt, c.stat),
        pair("opt_sparse", c.opt, c.sparse),
        pair("stat_sparse", c.stat, c.sparse),
        zero("poc_stat"),
        zero("poc_sparse"),
    ];
    let bound = CROSS_FACTOR * pairs.iter().map(|p| p.bound).sum::<f64>();
    Ok(CrossTermReport {
        pairs,
        factor: CROSS_FACTOR,
        bound,
        component_sum: c.poc + c.opt + c.stat + c.sparse,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DecompositionReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poc: Option<PocReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opt: Option<OptReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stat: Option<StatReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparse: Option<SparseReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Components>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_terms: Option<CrossTermReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleVerdict>,
}

impl DecompositionReport {
    /// Scalar components read off the grids: the chaos term at the largest
    /// width, the excess risk at the last fitted time, the statistical excess
    /// at the largest sample size (clamped at 0) and `κ` at the first `λ`.
    pub fn components(&self) -> Option<Components> {
        let poc = self.poc.as_ref()?.grid.last()?.value;
        let opt = self.opt.as_ref()?;
        let opt = opt
            .grid
            .iter()
            .rev()
            .find(|p| p.in_fit)
            .map(|p| p.excess)
            .unwrap_or(0.0)
            .max(0.0);
        let stat = self.stat.as_ref()?.grid.last()?.excess.max(0.0);
        let sparse = self.sparse.as_ref()?.grid.first()?.kappa;
        Some(Components { poc, opt, stat, sparse })
    }

    /// Every grid must hold at least [`MIN_GRID`] points.
    pub fn validate(&self) -> Result<()> {
        let lens = [
            ("poc", self.poc.as_ref().map(|r| r.grid.len())),
            ("opt", self.opt.as_ref().map(|r| r.grid.len())),
            ("stat", self.stat.as_ref().map(|r| r.grid.len())),
            ("sparse", self.sparse.as_ref().map(|r| r.grid.len())),
        ];
        for (name, len) in lens {
            if let Some(len) = len {
                if len < MIN_GRID {
                    return Err(Error::invalid(name, format!("grid has {len} points")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid("report", e.to_string()))
    }

    /// One row per grid point: `component,x,value,stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("component,x,value,stderr\n");
        let mut row = |c: &str, x: f64, v: f64, s: f64| {
            let _ = writeln!(out, "{c},{},{},{}", fmt_f64(x), fmt_f64(v), fmt_f64(s));
        };
        if let Some(r) = &self.poc {
            for p in &r.grid {
                row("poc", p.x, p.value, p.stderr);
            }
        }
        if let Some(r) = &self.opt {
            for p in &r.grid {
                row("opt", p.time, p.excess, p.mc_stderr);
            }
        }
        if let Some(r) = &self.stat {
            for p in &r.grid {
                row("stat", p.n as f64, p.excess, p.stderr);
            }
        }
        if let Some(r) = &self.sparse {
            for p in &r.grid {
                row("sparse", p.lambda, p.kappa, 0.0);
            }
        }
        out
    }

    /// gnuplot commands plotting each component of `csv` on its own page.
    pub fn plot_script(&self, csv: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "set datafile separator ','");
        let _ = writeln!(s, "set terminal pdfcairo");
        let _ = writeln!(s, "set output 'decomposition.pdf'");
        let panels = [
            ("poc", self.poc.is_some(), "N", "mean synchronous bound", "set logscale xy"),
            ("opt", self.opt.is_some(), "T", "excess risk", "unset logscale; set logscale y"),
            ("stat", self.stat.is_some(), "n", "excess risk", "set logscale xy"),
            ("sparse", self.sparse.is_some(), "lambda", "kappa", "set logscale xy"),
        ];
        for (name, present, xl, yl, scale) in panels {
            if !present {
                continue;
            }
            let _ = writeln!(s, "{scale}");
            let _ = writeln!(s, "set xlabel '{xl}'; set ylabel '{yl}'");
            let _ = writeln!(
                s,
                "plot \"< grep '^{name},' {csv}\" using 2:3 with linespoints title '{name}'"
            );
        }
        s
    }
}
