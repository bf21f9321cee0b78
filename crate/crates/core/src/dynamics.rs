//! Euler–Maruyama integration of the mean-field Langevin particle system
//! with squared loss and standard Gaussian confinement.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{dot, ActivationSpec, DataLaw, Dataset, Ensemble, TargetSpec};
use crate::rng::{self, Tag};

/// Where the per-step gradient batch comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GradientMode {
    /// A fresh iid batch from the data law at every step.
    Population { batch_size: usize },
    /// A fixed dataset reused at every step (full-batch gradient).
    Empirical { dataset: Arc<Dataset> },
    /// No risk gradient: pure confinement plus noise.
    Disabled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsConfig {
    pub lambda: f64,
    pub dt: f64,
    pub steps: u64,
    pub gradient: GradientMode,
    pub seed: u64,
}

pub const DEFAULT_DT: f64 = 0.005;
pub const DEFAULT_BATCH: usize = 256;
pub const DEFAULT_EVAL_SIZE: usize = 20_000;

impl DynamicsConfig {
    pub fn population(lambda: f64, dt: f64, steps: u64, batch_size: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            lambda,
            dt,
            steps,
            gradient: GradientMode::Population { batch_size },
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Full validation: `λ > 0`, `dt > 0`, `λ·dt < 0.5`, nonempty batches.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", "must be positive"));
        }
        self.validate_step()
    }

    /// The conditions a single step needs; `λ = 0` (noiseless gradient flow)
    /// is allowed here.
    fn validate_step(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", "must be nonnegative"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        if self.lambda * self.dt >= 0.5 {
            return Err(Error::invalid("dt", "lambda * dt must be below 0.5"));
        }
        match &self.gradient {
            GradientMode::Population { batch_size: 0 } => {
                Err(Error::invalid("batch_size", "must be at least 1"))
            }
            GradientMode::Empirical { dataset } if dataset.is_empty() => Err(Error::Empty("dataset")),
            _ => Ok(()),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }
}

/// Chunk size below which rayon splitting costs more than it saves.
const MIN_PAR_LEN: usize = 32;

/// `f_μ(x) − y`.
pub fn residual(ens: &Ensemble, x: &[f64], y: f64, spec: &ActivationSpec) -> Result<f64> {
    Ok(crate::model::network_eval(ens, x, spec)? - y)
}

/// Residuals of `field` on every batch point.
pub fn batch_residuals(field: &Ensemble, batch: &Dataset, spec: &ActivationSpec) -> Result<Vec<f64>> {
    if batch.d != field.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: field.input_dim(),
            got: batch.d,
        });
    }
    Ok(batch
        .xs
        .par_chunks_exact(batch.d)
        .with_min_len(MIN_PAR_LEN)
        .zip(batch.ys.par_iter())
        .map(|(x, y)| field.eval_raw(x, spec) - y)
        .collect())
}

/// Drift of one particle given precomputed residuals; writes into `out`.
fn particle_drift(
    p: &[f64],
    residuals: &[f64],
    batch: &Dataset,
    lambda: f64,
    spec: &ActivationSpec,
    out: &mut [f64],
) {
    let d = p.len() - 2;
    let (w, b, a) = (&p[..d], p[d], p[d + 1]);
    out.fill(0.0);
    for (x, r) in batch.xs.chunks_exact(d).zip(residuals) {
        if *r == 0.0 {
            continue;
        }
        let u = dot(w, x) + b;
        let g = r * a * spec.deriv(u);
        for (o, xi) in out[..d].iter_mut().zip(x) {
            *o += g * xi;
        }
        out[d] += g;
        out[d + 1] += r * spec.eval(u);
    }
    let inv = 1.0 / batch.len() as f64;
    for (o, th) in out.iter_mut().zip(p) {
        *o = -*o * inv - lambda * th;
    }
}

/// Mean-field drift of particle `i`:
/// `−E_batch[r·∇_θ(a·σ(⟨w,x⟩+b))] − λθ` with `r = f_μ(x) − y`.
pub fn drift(
    ens: &Ensemble,
    i: usize,
    batch: &Dataset,
    lambda: f64,
    spec: &ActivationSpec,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if i >= ens.width() {
        return Err(Error::invalid("i", format!("particle index {i} out of range")));
    }
    let res = batch_residuals(ens, batch, spec)?;
    let mut out = vec![0.0; ens.param_dim()];
    particle_drift(ens.particle(i), &res, batch, lambda, spec, &mut out);
    Ok(out)
}

/// One Euler–Maruyama step of `particles` driven by the given residuals
/// (`None` means zero risk gradient). Brownian increments come from the
/// stream `(noise_seed, Brownian, step, i)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn advance(
    particles: &mut Ensemble,
    residuals: Option<&[f64]>,
    batch: Option<&Dataset>,
    lambda: f64,
    dt: f64,
    noise_seed: u64,
    step: u64,
    spec: &ActivationSpec,
) -> Result<()> {
    let p = particles.param_dim();
    let noise_scale = (2.0 * lambda * dt).sqrt();
    let failed = particles
        .flat_mut()
        .par_chunks_exact_mut(p)
        .with_min_len(MIN_PAR_LEN / 4)
        .enumerate()
        .map(|(i, theta)| {
            let mut drift = vec![0.0; p];
            match (residuals, batch) {
                (Some(res), Some(batch)) => particle_drift(theta, res, batch, lambda, spec, &mut drift),
                _ => {
                    for (o, th) in drift.iter_mut().zip(theta.iter()) {
                        *o = -lambda * th;
                    }
                }
            }
            let mut xi = vec![0.0; p];
            if noise_scale > 0.0 {
                rng::fill_normals(noise_seed, Tag::Brownian, step, i as u64, &mut xi);
            }
            for ((th, dr), z) in theta.iter_mut().zip(&drift).zip(&xi) {
                *th += dt * dr + noise_scale * z;
            }
            if theta.iter().all(|v| v.is_finite()) {
                usize::MAX
            } else {
                i
            }
        })
        .min()
        .unwrap_or(usize::MAX);
    if failed != usize::MAX {
        return Err(Error::NonFinite {
            step,
            particle: failed,
        });
    }
    particles.time = (step + 1) as f64 * dt;
    Ok(())
}

/// The batch used at `step`: a fresh draw keyed on `(seed, Batch, step)`, the
/// fixed dataset, or nothing.
pub(crate) fn step_batch(cfg: &DynamicsConfig, law: &DataLaw, step: u64) -> Option<Arc<Dataset>> {
    match &cfg.gradient {
        GradientMode::Population { batch_size } => {
            Some(Arc::new(law.draw(*batch_size, cfg.seed, Tag::Batch, step)))
        }
        GradientMode::Empirical { dataset } => Some(Arc::clone(dataset)),
        GradientMode::Disabled => None,
    }
}

/// `θ_i ← θ_i + dt·drift_i + √(2λ·dt)·ξ_i` for every particle, with one shared
/// batch. `step` is the index of the step being taken (0-based).
pub fn langevin_step(
    ens: &Ensemble,
    cfg: &DynamicsConfig,
    spec: &ActivationSpec,
    law: &DataLaw,
    step: u64,
) -> Result<Ensemble> {
    cfg.validate_step()?;
    if law.input_dim() != ens.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: ens.input_dim(),
            got: law.input_dim(),
        });
    }
    let mut next = ens.clone();
    step_in_place(&mut next, cfg, spec, law, step)?;
    Ok(next)
}

pub(crate) fn step_in_place(
    ens: &mut Ensemble,
    cfg: &DynamicsConfig,
    spec: &ActivationSpec,
    law: &DataLaw,
    step: u64,
) -> Result<()> {
    let batch = step_batch(cfg, law, step);
    let res = match &batch {
        Some(b) => Some(batch_residuals(ens, b, spec)?),
        None => None,
    };
    advance(
        ens,
        res.as_deref(),
        batch.as_deref(),
        cfg.lambda,
        cfg.dt,
        cfg.seed,
        step,
        spec,
    )
}

/// Noise-free evaluation inputs with `y = f*(x)`.
pub fn eval_set(target: &TargetSpec, size: usize, seed: u64) -> Result<Dataset> {
    if size == 0 {
        return Err(Error::Empty("eval_set"));
    }
    Ok(DataLaw::noiseless(target.clone()).draw(size, seed, Tag::Eval, 0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskPoint {
    pub time: f64,
    pub risk: f64,
    pub mc_stderr: f64,
}

/// Monte Carlo `(mean, standard error)` of `(f_μ(x) − f*(x))²` over the
/// inputs of `eval`.
pub fn l2_risk_with_stderr(
    ens: &Ensemble,
    target: &TargetSpec,
    spec: &ActivationSpec,
    eval: &Dataset,
) -> Result<(f64, f64)> {
    if eval.is_empty() {
        return Err(Error::Empty("eval_set"));
    }
    if eval.d != ens.input_dim() || target.input_dim() != ens.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: ens.input_dim(),
            got: eval.d,
        });
    }
    let sq: Vec<f64> = eval
        .xs
        .par_chunks_exact(eval.d)
        .with_min_len(MIN_PAR_LEN)
        .map(|x| {
            let r = ens.eval_raw(x, spec) - target.eval_raw(x);
            r * r
        })
        .collect();
    let n = sq.len() as f64;
    let mean = sq.iter().sum::<f64>() / n;
    let var = if sq.len() > 1 {
        sq.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok((mean, (var / n).sqrt()))
}

pub fn l2_risk(ens: &Ensemble, target: &TargetSpec, spec: &ActivationSpec, eval: &Dataset) -> Result<f64> {
    l2_risk_with_stderr(ens, target, spec, eval).map(|(m, _)| m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    /// Keep an ensemble snapshot every this many steps (0: initial and final only).
    pub snapshot_every: u64,
    /// Evaluate the risk every this many steps (0: initial and final only).
    pub risk_every: u64,
    pub eval_size: usize,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            snapshot_every: 0,
            risk_every: 100,
            eval_size: DEFAULT_EVAL_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Ensemble>,
    pub risk: Vec<RiskPoint>,
}

impl Trajectory {
    pub fn final_ensemble(&self) -> &Ensemble {
        self.snapshots.last().expect("trajectory always holds the initial snapshot")
    }

    pub fn final_risk(&self) -> Option<RiskPoint> {
        self.risk.last().copied()
    }
}

fn due(every: u64, step: u64, last: u64) -> bool {
    step == last || (every > 0 && step % every == 0)
}

/// Runs `cfg.steps` Langevin steps from `init`, recording snapshots and the
/// held-out L2 risk against the noise-free target.
pub fn simulate(
    init: &Ensemble,
    cfg: &DynamicsConfig,
    spec: &ActivationSpec,
    law: &DataLaw,
    opts: &SimulateOptions,
) -> Result<Trajectory> {
    cfg.validate()?;
    let target = &law.target;
    let eval = eval_set(target, opts.eval_size, rng::derive_seed(cfg.seed, &[Tag::Eval as u64]))?;
    simulate_with_eval(init, cfg, spec, law, opts, &eval)
}

/// [`simulate`] with a caller-supplied evaluation set.
pub fn simulate_with_eval(
    init: &Ensemble,
    cfg: &DynamicsConfig,
    spec: &ActivationSpec,
    law: &DataLaw,
    opts: &SimulateOptions,
    eval: &Dataset,
) -> Result<Trajectory> {
    cfg.validate()?;
    if law.input_dim() != init.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: init.input_dim(),
            got: law.input_dim(),
        });
    }
    let target = &law.target;
    let mut ens = init.clone();
    ens.time = 0.0;
    let mut snapshots = vec![ens.clone()];
    let (r0, s0) = l2_risk_with_stderr(&ens, target, spec, eval)?;
    let mut risk = vec![RiskPoint {
        time: 0.0,
        risk: r0,
        mc_stderr: s0,
    }];
    let last = cfg.steps;
    for step in 0..cfg.steps {
        step_in_place(&mut ens, cfg, spec, law, step)?;
        let done = step + 1;
        if due(opts.snapshot_every, done, last) {
            snapshots.push(ens.clone());
        }
        if due(opts.risk_every, done, last) {
            let (r, s) = l2_risk_with_stderr(&ens, target, spec, eval)?;
            risk.push(RiskPoint {
                time: ens.time,
                risk: r,
                mc_stderr: s,
            });
        }
    }
    Ok(Trajectory { snapshots, risk })
}

/// Centered moving average with window `w` (shrinking at the ends).
pub fn smooth(values: &[f64], w: usize) -> Vec<f64> {
    let half = w / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}
