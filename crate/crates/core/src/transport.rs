//! Exact squared Wasserstein distances between equal-size point clouds and
//! the synchronous-coupling experiment.

use std::fmt::Write as _;

use crate::dynamics::{advance, batch_residuals, step_batch, DynamicsConfig};
use crate::error::{Error, Result};
use crate::model::{ActivationSpec, DataLaw, Ensemble};
use crate::rng;

pub use crate::stats::{fit_loglog, LinearFit};

pub const DEFAULT_ASSIGNMENT_CAP: usize = 2048;
pub const DEFAULT_N_REF: usize = 4096;

/// `(1/N)·Σ (a_(i) − b_(i))²` over sorted order.
pub fn w2_squared_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("multiset"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// Minimum-cost perfect matching on a square cost matrix (row-major, `n×n`).
/// Shortest augmenting paths with dual potentials, `O(n³)`. Returns the
/// column assigned to each row.
pub fn assignment(cost: &[f64], n: usize) -> Result<Vec<usize>> {
    if cost.len() != n * n {
        return Err(Error::SizeMismatch {
            left: cost.len(),
            right: n * n,
        });
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("cost", "must be finite"));
    }
    // 1-based arrays; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        col_of_row[owner[j] - 1] = j - 1;
    }
    Ok(col_of_row)
}

/// Exact `W₂²` between two equal-width ensembles under squared Euclidean
/// ground cost, with the default assignment cap.
pub fn w2_squared(a: &Ensemble, b: &Ensemble) -> Result<f64> {
    w2_squared_capped(a, b, DEFAULT_ASSIGNMENT_CAP)
}

pub fn w2_squared_capped(a: &Ensemble, b: &Ensemble, cap: usize) -> Result<f64> {
    if a.width() != b.width() {
        return Err(Error::SizeMismatch {
            left: a.width(),
            right: b.width(),
        });
    }
    if a.param_dim() != b.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: a.param_dim(),
            got: b.param_dim(),
        });
    }
    let n = a.width();
    if n > cap {
        return Err(Error::CapExceeded { width: n, cap });
    }
    let cost = cost_matrix(a, b);
    let perm = assignment(&cost, n)?;
    Ok(perm
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum::<f64>()
        / n as f64)
}

fn cost_matrix(a: &Ensemble, b: &Ensemble) -> Vec<f64> {
    let mut cost = Vec::with_capacity(a.width() * b.width());
    for p in a.particles() {
        for q in b.particles() {
            cost.push(p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum());
        }
    }
    cost
}

/// `(1/N)·Σ|θ_i − θ̄_i|²` for index-matched particles.
pub fn synchronous_cost(a: &Ensemble, b: &Ensemble) -> Result<f64> {
    if a.flat().len() != b.flat().len() {
        return Err(Error::SizeMismatch {
            left: a.flat().len(),
            right: b.flat().len(),
        });
    }
    Ok(a.flat()
        .iter()
        .zip(b.flat())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.width() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingOptions {
    /// Record every this many steps (0: start and end only).
    pub record_every: u64,
    pub cap: usize,
    pub repetition: u32,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self {
            record_every: 10,
            cap: DEFAULT_ASSIGNMENT_CAP,
            repetition: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingRecord {
    pub n: usize,
    pub n_ref: usize,
    pub times: Vec<f64>,
    pub sync_bound: Vec<f64>,
    /// Present when `n` does not exceed the assignment cap.
    pub w2sq_exact: Option<Vec<f64>>,
    pub seed: u64,
    pub repetition: u32,
}

impl CouplingRecord {
    pub fn final_sync_bound(&self) -> f64 {
        *self.sync_bound.last().expect("a record always holds t = 0")
    }

    /// Times at which the exact distance exceeds the synchronous bound by
    /// more than `slack`.
    pub fn dominance_violations(&self, slack: f64) -> Vec<f64> {
        match &self.w2sq_exact {
            Some(w) => self
                .times
                .iter()
                .zip(w.iter().zip(&self.sync_bound))
                .filter(|(_, (w, s))| **w > **s + slack)
                .map(|(t, _)| *t)
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn csv_header() -> &'static str {
        "time,sync_bound,w2sq_exact,N,repetition\n"
    }

    /// Rows `(time, sync_bound, w2sq_exact, N, repetition)`; the exact column
    /// is empty above the cap.
    pub fn write_csv_rows(&self, out: &mut String) {
        for (k, (t, s)) in self.times.iter().zip(&self.sync_bound).enumerate() {
            let exact = self
                .w2sq_exact
                .as_ref()
                .map(|w| crate::output::fmt_f64(w[k]))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                crate::output::fmt_f64(*t),
                crate::output::fmt_f64(*s),
                exact,
                self.n,
                self.repetition
            );
        }
    }
}

/// Label mixed into the configured seed for the auxiliary system.
const AUX_STREAM: u64 = 0xa0c5;

/// Synchronous coupling of a width-`n` interacting system with `n` nonlinear
/// copies whose drift is evaluated against an independent width-`n_ref`
/// system standing in for the mean-field law. The copies start at the same
/// points and receive the same Brownian increments as the interacting
/// system; all three systems see the same batch at every step.
pub fn coupled_run(
    n: usize,
    n_ref: usize,
    cfg: &DynamicsConfig,
    spec: &ActivationSpec,
    law: &DataLaw,
    opts: &CouplingOptions,
) -> Result<CouplingRecord> {
    coupled_run_observed(n, n_ref, cfg, spec, law, opts, |_, _, _| {})
}

/// [`coupled_run`] with a callback receiving `(time, system, copies)` at every
/// recorded time.
pub fn coupled_run_observed(
    n: usize,
    n_ref: usize,
    cfg: &DynamicsConfig,
    spec: &ActivationSpec,
    law: &DataLaw,
    opts: &CouplingOptions,
    mut observe: impl FnMut(f64, &Ensemble, &Ensemble),
) -> Result<CouplingRecord> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::invalid("N", "must be at least 1"));
    }
    if n_ref < 8 * n {
        return Err(Error::invalid("N_ref", format!("must be at least 8·N = {}", 8 * n)));
    }
    let d = law.input_dim();
    let aux_seed = rng::derive_seed(cfg.seed, &[AUX_STREAM]);
    let mut system = Ensemble::mup_init(d, n, cfg.seed)?;
    let mut copies = system.clone();
    let mut aux = Ensemble::mup_init(d, n_ref, aux_seed)?;
    let exact = n <= opts.cap;

    let mut times = Vec::new();
    let mut sync = Vec::new();
    let mut w2 = Vec::new();
    let mut record = |t: f64, s: &Ensemble, c: &Ensemble| -> Result<()> {
        times.push(t);
        sync.push(synchronous_cost(s, c)?);
        if exact {
            w2.push(w2_squared_capped(s, c, opts.cap)?);
        }
        observe(t, s, c);
        Ok(())
    };
    record(0.0, &system, &copies)?;
    for step in 0..cfg.steps {
        let batch = step_batch(cfg, law, step);
        let (res_sys, res_aux) = match &batch {
            Some(b) => (
                Some(batch_residuals(&system, b, spec)?),
                Some(batch_residuals(&aux, b, spec)?),
            ),
            None => (None, None),
        };
        let b = batch.as_deref();
        advance(&mut system, res_sys.as_deref(), b, cfg.lambda, cfg.dt, cfg.seed, step, spec)?;
        advance(&mut copies, res_aux.as_deref(), b, cfg.lambda, cfg.dt, cfg.seed, step, spec)?;
        advance(&mut aux, res_aux.as_deref(), b, cfg.lambda, cfg.dt, aux_seed, step, spec)?;
        let done = step + 1;
        if done == cfg.steps || (opts.record_every > 0 && done % opts.record_every == 0) {
            record(system.time, &system, &copies)?;
        }
    }
    Ok(CouplingRecord {
        n,
        n_ref,
        times,
        sync_bound: sync,
        w2sq_exact: exact.then_some(w2),
        seed: cfg.seed,
        repetition: opts.repetition,
    })
}
