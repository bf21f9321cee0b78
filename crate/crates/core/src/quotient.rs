//! Finite-rank symmetry quotient: canonical charts for single neurons,
//! equivalence of atom lists, the architecture invariant table, and the
//! covering-number calculator.

use std::cmp::Ordering;
use std::fmt::{self, Write as _};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, ActivationKind, ActivationSpec, ParameterPoint};
use crate::rng::{self, Tag};

pub const DEFAULT_MERGE_TOL: f64 = 1e-8;

/// Rescale `(w, b)` to unit norm and multiply `a` by `norm^degree`. Points
/// already on the unit sphere (to a few ulps) are returned as is, which makes
/// the chart exactly idempotent.
fn normalize(theta: &ParameterPoint, degree: u32) -> ParameterPoint {
    let norm = (theta.w.iter().map(|v| v * v).sum::<f64>() + theta.b * theta.b).sqrt();
    if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
        return theta.clone();
    }
    let inv = 1.0 / norm;
    ParameterPoint {
        w: theta.w.iter().map(|v| v * inv).collect(),
        b: theta.b * inv,
        a: theta.a * norm.powi(degree as i32),
    }
}

/// Negates `(w, b)` when its first nonzero coordinate is negative; `a` is
/// multiplied by `a_sign` in that case.
fn sign_fix(theta: ParameterPoint, a_sign: f64) -> ParameterPoint {
    let first = theta.w.iter().chain(std::iter::once(&theta.b)).find(|v| **v != 0.0);
    match first {
        Some(v) if *v < 0.0 => ParameterPoint {
            w: theta.w.iter().map(|v| -v).collect(),
            b: -theta.b,
            a: a_sign * theta.a,
        },
        _ => theta,
    }
}

fn is_dead(theta: &ParameterPoint) -> bool {
    theta.a == 0.0 || (theta.b == 0.0 && theta.w.iter().all(|v| *v == 0.0))
}

/// Canonical representative of `θ` under the activation's finite-rank
/// symmetries. Neurons with `a = 0`, or with `(w, b) = 0` (whose feature is
/// the constant `a·σ(0) = 0` for every supported activation), collapse to the
/// dead point.
///
/// * relu, leaky relu: `|(w, b)| = 1`, `a ← a·|(w, b)|`.
/// * tanh, centered sigmoid (both odd): first nonzero of `(w, b)` positive.
/// * monomial `k`: `|(w, b)| = 1`, `a ← a·|(w, b)|^k`, then the sign rule
///   with `a ← (−1)^k·a` on a flip.
pub fn canonicalize(theta: &ParameterPoint, spec: &ActivationSpec) -> ParameterPoint {
    if is_dead(theta) {
        return ParameterPoint::dead(theta.dim());
    }
    match spec.kind {
        ActivationKind::Relu | ActivationKind::LeakyRelu { .. } => normalize(theta, 1),
        ActivationKind::Tanh | ActivationKind::CenteredSigmoid => sign_fix(theta.clone(), -1.0),
        ActivationKind::Monomial { k } => {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign_fix(normalize(theta, k), sign)
        }
    }
}

/// A finitely supported parameter measure: positive weights summing to at
/// most one, the remainder sitting on the dead neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomList {
    atoms: Vec<(f64, ParameterPoint)>,
    pub activation: ActivationSpec,
}

impl AtomList {
    pub fn new(atoms: Vec<(f64, ParameterPoint)>, activation: ActivationSpec) -> Result<Self> {
        if let Some((_, first)) = atoms.first() {
            if atoms.iter().any(|(_, p)| p.dim() != first.dim()) {
                return Err(Error::invalid("atoms", "all atoms must share one input dimension"));
            }
        }
        if atoms.iter().any(|(c, _)| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("atoms", "weights must be positive"));
        }
        if atoms.iter().map(|(c, _)| c).sum::<f64>() > 1.0 + 1e-12 {
            return Err(Error::invalid("atoms", "weights must sum to at most 1"));
        }
        Ok(Self { atoms, activation })
    }

    pub fn atoms(&self) -> &[(f64, ParameterPoint)] {
        &self.atoms
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.atoms.first().map(|(_, p)| p.dim())
    }

    /// `Σ_k c_k·a_k·σ(⟨w_k, x⟩ + b_k)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.atoms
            .iter()
            .map(|(c, p)| c * p.a * self.activation.eval(dot(&p.w, x) + p.b))
            .sum()
    }

    /// Canonicalized, dead atoms dropped, atoms within `tol` merged (weights
    /// summed), sorted lexicographically with ties broken by weight.
    pub fn canonical_form(&self, tol: f64) -> Vec<(f64, Vec<f64>)> {
        let mut items: Vec<(f64, Vec<f64>)> = self
            .atoms
            .iter()
            .map(|(c, p)| (*c, canonicalize(p, &self.activation)))
            .filter(|(_, p)| !is_dead(p))
            .map(|(c, p)| (c, p.to_flat()))
            .collect();
        items.sort_by(|a, b| lex_cmp(&a.1, &b.1).then(a.0.total_cmp(&b.0)));
        let mut merged: Vec<(f64, Vec<f64>)> = Vec::new();
        for (c, p) in items {
            match merged.iter_mut().find(|(_, q)| max_dist(q, &p) <= tol) {
                Some(slot) => slot.0 += c,
                None => merged.push((c, p)),
            }
        }
        merged.sort_by(|a, b| lex_cmp(&a.1, &b.1).then(a.0.total_cmp(&b.0)));
        merged
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn close(a: &(f64, Vec<f64>), b: &(f64, Vec<f64>), tol: f64) -> bool {
    (a.0 - b.0).abs() <= tol && max_dist(&a.1, &b.1) <= tol
}

/// Equality of the two lists' canonical forms within `tol`. Sorted order is
/// compared first; if near-ties reordered the lists, an optimal matching of
/// the canonical atoms decides.
pub fn equivalent_mod_gfin(a: &AtomList, b: &AtomList, tol: f64) -> Result<bool> {
    if a.activation != b.activation {
        return Err(Error::invalid("activation", "lists use different activations"));
    }
    if let (Some(da), Some(db)) = (a.input_dim(), b.input_dim()) {
        if da != db {
            return Err(Error::DimensionMismatch { expected: da, got: db });
        }
    }
    let ca = a.canonical_form(tol);
    let cb = b.canonical_form(tol);
    if ca.len() != cb.len() {
        return Ok(false);
    }
    if ca.iter().zip(&cb).all(|(x, y)| close(x, y, tol)) {
        return Ok(true);
    }
    let n = ca.len();
    let cost: Vec<f64> = ca
        .iter()
        .flat_map(|x| {
            cb.iter().map(move |y| {
                let d = max_dist(&x.1, &y.1).max((x.0 - y.0).abs());
                if d <= tol {
                    0.0
                } else {
                    1.0
                }
            })
        })
        .collect();
    let perm = crate::transport::assignment(&cost, n)?;
    Ok(perm.iter().enumerate().all(|(i, &j)| close(&ca[i], &cb[j], tol)))
}

/// Root-mean-square difference of the two atom networks over `n_probe`
/// standard Gaussian inputs drawn from the probe stream of `seed`.
pub fn function_distance(a: &AtomList, b: &AtomList, n_probe: usize, seed: u64) -> Result<f64> {
    let d = match (a.input_dim(), b.input_dim()) {
        (Some(x), Some(y)) if x != y => return Err(Error::DimensionMismatch { expected: x, got: y }),
        (Some(x), _) | (None, Some(x)) => x,
        (None, None) => return Ok(0.0),
    };
    if n_probe == 0 {
        return Err(Error::invalid("n_probe", "must be at least 1"));
    }
    let mut r = rng::stream(seed, Tag::Probe, 0, 0);
    let mut x = vec![0.0; d];
    let mut acc = 0.0;
    for _ in 0..n_probe {
        for v in x.iter_mut() {
            *v = StandardNormal.sample(&mut r);
        }
        let diff = a.eval(&x) - b.eval(&x);
        acc += diff * diff;
    }
    Ok((acc / n_probe as f64).sqrt())
}

/// True when the networks agree in `L²(ρ_X)` to within `tol` on the probes.
pub fn function_equality_check(a: &AtomList, b: &AtomList, n_probe: usize, tol: f64, seed: u64) -> Result<bool> {
    Ok(function_distance(a, b, n_probe, seed)? <= tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SparseDepthBound {
    Finite(u64),
    /// `O(log(1/λ))`.
    LogInverseLambda,
    /// Finite, with no closed-form count.
    FiniteUnspecified,
    Infinite,
    TargetDependent,
}

impl fmt::Display for SparseDepthBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SparseDepthBound::Finite(k) => write!(f, "{k}"),
            SparseDepthBound::LogInverseLambda => f.write_str("O(log(1/lambda))"),
            SparseDepthBound::FiniteUnspecified => f.write_str("finite"),
            SparseDepthBound::Infinite => f.write_str("inf"),
            SparseDepthBound::TargetDependent => f.write_str("depends on g"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    Zero,
    ExpSmall,
    TargetNorm,
    TargetDependent,
}

impl fmt::Display for ResidualKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResidualKind::Zero => "0",
            ResidualKind::ExpSmall => "exponentially small",
            ResidualKind::TargetNorm => "||f*||^2",
            ResidualKind::TargetDependent => "depends on g",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantRow {
    pub activation: String,
    pub target: String,
    pub d_eff: u32,
    pub d_orb: u32,
    /// Set where the orbit depth of the row is not pinned down.
    pub d_orb_ambiguous: bool,
    pub s_star: SparseDepthBound,
    pub residual: ResidualKind,
    /// `d_eff + 2 − D_orb`, the per-atom statistical factor.
    pub stat_factor: u32,
}

/// Dimensions substituted into the symbolic rows of the table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableParams {
    /// Ambient input dimension.
    pub d: u32,
    /// Breakpoints of the piecewise-linear target.
    pub breaks: u32,
    /// Rank of the multi-index projection.
    pub rank: u32,
    /// Monomial degree.
    pub k: u32,
}

impl Default for TableParams {
    fn default() -> Self {
        Self {
            d: 2,
            breaks: 1,
            rank: 1,
            k: 2,
        }
    }
}

fn row(
    activation: String,
    target: String,
    d_eff: u32,
    d_orb: u32,
    d_orb_ambiguous: bool,
    s_star: SparseDepthBound,
    residual: ResidualKind,
) -> Result<InvariantRow> {
    let factor = (d_eff + 2).checked_sub(d_orb).filter(|f| *f >= 1).ok_or_else(|| {
        Error::invalid("d_orb", format!("statistical factor d_eff + 2 - D_orb must be at least 1 for {activation}"))
    })?;
    Ok(InvariantRow {
        activation,
        target,
        d_eff,
        d_orb,
        d_orb_ambiguous,
        s_star,
        residual,
        stat_factor: factor,
    })
}

/// The six canonical activation–target rows, with the orbit depths taken
/// from the activation metadata.
pub fn invariant_table(p: &TableParams) -> Result<Vec<InvariantRow>> {
    if p.d == 0 || p.k == 0 || p.rank == 0 || p.rank > p.d {
        return Err(Error::invalid("table", "need d ≥ 1, k ≥ 1 and 1 ≤ rank ≤ d"));
    }
    let relu = ActivationSpec::relu();
    let tanh = ActivationSpec::tanh();
    let mono = ActivationSpec::monomial(p.k)?;
    let k = p.k;
    Ok(vec![
        row("relu".into(), "linear".into(), 1, relu.d_orb, false, SparseDepthBound::Finite(2), ResidualKind::Zero)?,
        row(
            "relu".into(),
            format!("piecewise_linear({} breaks)", p.breaks),
            1,
            relu.d_orb,
            false,
            SparseDepthBound::Finite(p.breaks as u64 + 2),
            ResidualKind::Zero,
        )?,
        row(
            "tanh".into(),
            "analytic single_index".into(),
            1,
            tanh.d_orb,
            false,
            SparseDepthBound::LogInverseLambda,
            ResidualKind::ExpSmall,
        )?,
        row(
            format!("monomial({k})"),
            format!("polynomial degree <= {k}"),
            p.d,
            mono.d_orb,
            true,
            SparseDepthBound::FiniteUnspecified,
            ResidualKind::Zero,
        )?,
        row(
            format!("monomial({k})"),
            format!("hermite degree > {k}"),
            p.d,
            mono.d_orb,
            true,
            SparseDepthBound::Infinite,
            ResidualKind::TargetNorm,
        )?,
        row(
            "relu".into(),
            format!("multi_index(rank {})", p.rank),
            p.rank,
            relu.d_orb,
            false,
            SparseDepthBound::TargetDependent,
            ResidualKind::TargetDependent,
        )?,
    ])
}

/// Per-atom statistical factors by case: relu full input `d+1`, relu
/// single-index 2, tanh single-index 3, monomial full input `d+2−D_orb`,
/// multi-index relu `rank+1`.
pub fn stat_factors(p: &TableParams) -> Result<Vec<(String, u32)>> {
    let mono = ActivationSpec::monomial(p.k)?;
    let relu = ActivationSpec::relu().d_orb;
    let tanh = ActivationSpec::tanh().d_orb;
    Ok(vec![
        ("relu, full input".into(), p.d + 2 - relu),
        ("relu, single-index".into(), 1 + 2 - relu),
        ("tanh, single-index".into(), 1 + 2 - tanh),
        (format!("monomial({}), full input", p.k), p.d + 2 - mono.d_orb),
        ("multi-index relu".into(), p.rank + 2 - relu),
    ])
}

/// Columns mirror the table: activation, target, d_eff, D_orb, S*, residual,
/// plus the statistical factor and the orbit-depth ambiguity flag.
pub fn invariant_csv(rows: &[InvariantRow]) -> String {
    let mut out = String::from("activation,target,d_eff,d_orb,s_star,residual,stat_factor,d_orb_ambiguous\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.activation, r.target, r.d_eff, r.d_orb, r.s_star, r.residual, r.stat_factor, r.d_orb_ambiguous
        );
    }
    out
}

/// `C·S·(d_eff + 2 − D_orb)·log(C·R^{q+1}/ε)`, and 0 once `ε ≥ C·R^{q+1}`.
pub fn covering_log(eps: f64, s: f64, d_eff: f64, d_orb: f64, r: f64, q: u32, c: f64) -> Result<f64> {
    for (name, v) in [("eps", eps), ("R", r), ("C", c)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(name, "must be positive"));
        }
    }
    if !(s >= 0.0) || !(d_eff + 2.0 - d_orb >= 0.0) {
        return Err(Error::invalid("S/d_eff/D_orb", "need S ≥ 0 and d_eff + 2 − D_orb ≥ 0"));
    }
    let scale = c * r.powi(q as i32 + 1);
    if eps >= scale {
        return Ok(0.0);
    }
    Ok(c * s * (d_eff + 2.0 - d_orb) * (scale / eps).ln())
}
