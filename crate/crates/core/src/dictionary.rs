//! Hermite expansions of single-index links, the coefficient threshold rule,
//! and the closed-form depth and rate calculators built on top of it.
//!
//! The basis is the normalized probabilists' Hermite family `ĥ_m`, orthonormal
//! under the standard Gaussian, so Parseval holds with unit constants.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ĥ_m(z)` via `ĥ_{m+1} = (z·ĥ_m − √m·ĥ_{m−1}) / √(m+1)`.
pub fn hermite_value(m: usize, z: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..m {
        let next = (z * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `[ĥ_0(z), …, ĥ_max(z)]`.
pub fn hermite_all(max: usize, z: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..=max {
        out.push(cur);
        let next = (z * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    out
}

/// Nodes and weights for expectations under the standard Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    kind: RuleKind,
}

#[derive(Debug, Clone, PartialEq)]
enum RuleKind {
    Hermite(usize),
    Piecewise { breaks: Vec<f64>, panel: f64 },
}

const PIECEWISE_HALF_WIDTH: f64 = 38.0;
const LEGENDRE_ORDER: usize = 20;

impl GaussianRule {
    /// `n`-point Gauss–Hermite rule, exact for polynomials of degree `2n − 1`.
    pub fn hermite(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("nodes", "must be at least 1"));
        }
        let (x, w) = gauss_hermite_physicists(n);
        let nodes = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
        let weights = w.iter().map(|v| v / PI.sqrt()).collect();
        Ok(Self {
            nodes,
            weights,
            kind: RuleKind::Hermite(n),
        })
    }

    /// Composite 20-point Gauss–Legendre on `[−38, 38]` split at `breaks`,
    /// with panels no wider than `panel`. Accurate for integrands that are
    /// smooth between the breakpoints, such as hinge functions.
    pub fn piecewise(breaks: &[f64], panel: f64) -> Result<Self> {
        if !(panel > 0.0 && panel.is_finite()) {
            return Err(Error::invalid("panel", "must be positive"));
        }
        let mut cuts = vec![-PIECEWISE_HALF_WIDTH, PIECEWISE_HALF_WIDTH];
        cuts.extend(
            breaks
                .iter()
                .copied()
                .filter(|b| b.abs() < PIECEWISE_HALF_WIDTH),
        );
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let (gx, gw) = gauss_legendre(LEGENDRE_ORDER);
        let norm = 1.0 / (2.0 * PI).sqrt();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for seg in cuts.windows(2) {
            let (lo, hi) = (seg[0], seg[1]);
            let panels = ((hi - lo) / panel).ceil().max(1.0) as usize;
            let h = (hi - lo) / panels as f64;
            for p in 0..panels {
                let a = lo + p as f64 * h;
                for (x, w) in gx.iter().zip(&gw) {
                    let z = a + 0.5 * h * (x + 1.0);
                    nodes.push(z);
                    weights.push(0.5 * h * w * norm * (-0.5 * z * z).exp());
                }
            }
        }
        Ok(Self {
            nodes,
            weights,
            kind: RuleKind::Piecewise {
                breaks: breaks.to_vec(),
                panel,
            },
        })
    }

    /// The same family at twice the resolution.
    pub fn refined(&self) -> Result<Self> {
        match &self.kind {
            RuleKind::Hermite(n) => Self::hermite(2 * n),
            RuleKind::Piecewise { breaks, panel } => Self::piecewise(breaks, panel / 2.0),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(z, w)| w * f(*z))
            .sum()
    }
}

/// Orthonormal Hermite functions `ψ_n(x)` and `ψ_{n−1}(x)` for the weight
/// `e^{−x²}`; the `e^{−x²/2}` factor keeps large-`n` values in range.
fn hermite_function_pair(n: usize, x: f64) -> (f64, f64) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut p1 = PIM4 * (-0.5 * x * x).exp();
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = x * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

/// Nodes are bracketed by sign changes on a grid finer than the smallest root
/// gap, then polished by safeguarded Newton steps.
fn gauss_hermite_physicists(n: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let edge = (2.0 * nf + 1.0).sqrt() + 1.0;
    let h = 0.1 * PI / (2.0 * nf + 1.0).sqrt();
    let mut nodes = Vec::with_capacity(n);
    let mut lo = 0.0;
    let mut f_lo = hermite_function_pair(n, lo).0;
    if n % 2 == 1 {
        nodes.push(0.0);
        lo = h;
        f_lo = hermite_function_pair(n, lo).0;
    }
    while nodes.len() < n.div_ceil(2) && lo < edge {
        let hi = lo + h;
        let f_hi = hermite_function_pair(n, hi).0;
        if f_lo == 0.0 || f_lo.signum() != f_hi.signum() {
            nodes.push(polish_root(n, lo, hi));
        }
        lo = hi;
        f_lo = f_hi;
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for (i, &z) in nodes.iter().enumerate() {
        let pp = (2.0 * nf).sqrt() * hermite_function_pair(n, z).1;
        let wi = 2.0 * (-z * z).exp() / (pp * pp);
        let wi = if wi.is_finite() { wi } else { 0.0 };
        // nodes are found in increasing order from the center outwards
        let (upper, lower) = if n % 2 == 1 {
            (n / 2 + i, n / 2 - i)
        } else {
            (n / 2 + i, n / 2 - 1 - i)
        };
        x[upper] = z;
        x[lower] = -z;
        w[upper] = wi;
        w[lower] = wi;
    }
    (x, w)
}

fn polish_root(n: usize, mut lo: f64, mut hi: f64) -> f64 {
    let sign_lo = hermite_function_pair(n, lo).0.signum();
    let mut z = 0.5 * (lo + hi);
    for _ in 0..100 {
        let (p, q) = hermite_function_pair(n, z);
        if p == 0.0 {
            return z;
        }
        if p.signum() == sign_lo {
            lo = z;
        } else {
            hi = z;
        }
        // ψ_n' = √(2n)ψ_{n−1} − xψ_n
        let dp = (2.0 * n as f64).sqrt() * q - z * p;
        let mut next = z - p / dp;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - z).abs() <= 1e-15 * z.abs().max(1.0) {
            return next;
        }
        z = next;
    }
    z
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if n == 200 && i == 1 { eprintln!("{z1} {p1} {pp}"); }
            if (z - z1).abs() <= 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Coefficients `f̂_m = E[g(Z)·ĥ_m(Z)]`, `m = 0..=order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteExpansion {
    pub coefficients: Vec<f64>,
    /// `‖g‖²` under the same rule.
    pub norm_sq: f64,
    pub quadrature_nodes: usize,
    /// False when refining the rule moved some coefficient by more than 1e−6.
    pub converged: bool,
    pub max_refinement_change: f64,
}

impl HermiteExpansion {
    /// Wrap a user-supplied coefficient sequence.
    pub fn from_coefficients(coefficients: Vec<f64>) -> Self {
        let norm_sq = coefficients.iter().map(|c| c * c).sum();
        Self {
            coefficients,
            norm_sq,
            quadrature_nodes: 0,
            converged: true,
            max_refinement_change: 0.0,
        }
    }

    pub fn order(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn energy(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }
}

pub const DEFAULT_ORDER: usize = 64;
pub const DEFAULT_NODES: usize = 200;
const CONVERGENCE_TOL: f64 = 1e-6;

fn project(g: &dyn Fn(f64) -> f64, order: usize, rule: &GaussianRule) -> (Vec<f64>, f64) {
    let mut coeffs = vec![0.0; order + 1];
    let mut norm_sq = 0.0;
    for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
        if w == 0.0 {
            continue;
        }
        let gz = g(z);
        norm_sq += w * gz * gz;
        for (c, h) in coeffs.iter_mut().zip(hermite_all(order, z)) {
            *c += w * gz * h;
        }
    }
    (coeffs, norm_sq)
}

/// Gauss–Hermite expansion with `nodes` points, flagged when doubling the
/// node count changes a coefficient by more than 1e−6.
pub fn expand(g: impl Fn(f64) -> f64, order: usize, nodes: usize) -> Result<HermiteExpansion> {
    expand_with(g, order, &GaussianRule::hermite(nodes)?)
}

/// Expansion under an arbitrary rule; use [`GaussianRule::piecewise`] for
/// links with kinks.
pub fn expand_with(
    g: impl Fn(f64) -> f64,
    order: usize,
    rule: &GaussianRule,
) -> Result<HermiteExpansion> {
    let (coefficients, norm_sq) = project(&g, order, rule);
    if !norm_sq.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("g", "no finite Gaussian second moment under quadrature"));
    }
    let (fine, _) = project(&g, order, &rule.refined()?);
    let max_change = coefficients
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(HermiteExpansion {
        coefficients,
        norm_sq,
        quadrature_nodes: rule.len(),
        converged: max_change <= CONVERGENCE_TOL,
        max_refinement_change: max_change,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub lambda: f64,
    pub c_sigma: f64,
    /// Indices `m` with `|f̂_m| > c_σ·λ`, increasing.
    pub retained: Vec<usize>,
    pub s_up: u64,
    pub kappa: f64,
    pub retained_energy: f64,
    pub big_c_sigma: f64,
    pub mult_sigma: u32,
}

impl ThresholdReport {
    pub fn tail_energy(&self) -> f64 {
        self.kappa - self.big_c_sigma * self.lambda * self.retained.len() as f64
    }
}

/// Threshold with the entropy-displacement constant `C_σ = 1`.
pub fn threshold(
    exp: &HermiteExpansion,
    lambda: f64,
    c_sigma: f64,
    mult_sigma: u32,
) -> Result<ThresholdReport> {
    threshold_with(exp, lambda, c_sigma, mult_sigma, 1.0)
}

/// `A_λ = {m : |f̂_m| > c_σλ}`, `S_up = |A_λ|·mult`,
/// `κ = Σ_{m∉A_λ} f̂_m² + C_σ·λ·|A_λ|`.
pub fn threshold_with(
    exp: &HermiteExpansion,
    lambda: f64,
    c_sigma: f64,
    mult_sigma: u32,
    big_c_sigma: f64,
) -> Result<ThresholdReport> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda", "must be positive"));
    }
    if !(c_sigma > 0.0) {
        return Err(Error::invalid("c_sigma", "must be positive"));
    }
    let cut = c_sigma * lambda;
    let mut retained = Vec::new();
    let mut retained_energy = 0.0;
    let mut tail = 0.0;
    for (m, c) in exp.coefficients.iter().enumerate() {
        if c.abs() > cut {
            retained.push(m);
            retained_energy += c * c;
        } else {
            tail += c * c;
        }
    }
    let count = retained.len();
    Ok(ThresholdReport {
        lambda,
        c_sigma,
        s_up: count as u64 * mult_sigma as u64,
        kappa: tail + big_c_sigma * lambda * count as f64,
        retained,
        retained_energy,
        big_c_sigma,
        mult_sigma,
    })
}

/// `(1/τ)·log(A/(c_σλ))·mult`, and 0 once `λ ≥ A/c_σ`.
pub fn exp_tail_depth_bound(a: f64, tau: f64, c_sigma: f64, lambda: f64, mult_sigma: u32) -> Result<f64> {
    for (name, v) in [("A", a), ("tau", tau), ("c_sigma", c_sigma), ("lambda", lambda)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(name, "must be positive"));
        }
    }
    if lambda >= a / c_sigma {
        return Ok(0.0);
    }
    Ok((a / (c_sigma * lambda)).ln() / tau * mult_sigma as f64)
}

/// Number of `m ≥ 0` with `A·e^{−τm} > c_σλ`: `1 + ⌊(1/τ)log(A/(c_σλ))⌋`.
pub fn exp_tail_count(a: f64, tau: f64, c_sigma: f64, lambda: f64) -> u64 {
    if lambda >= a / c_sigma {
        return 0;
    }
    1 + ((a / (c_sigma * lambda)).ln() / tau).floor() as u64
}

/// `‖g − Σ_{m∈A} f̂_m ĥ_m‖²` under `rule`.
pub fn parseval_residual(
    exp: &HermiteExpansion,
    retained: &[usize],
    g: impl Fn(f64) -> f64,
    rule: &GaussianRule,
) -> Result<f64> {
    if let Some(&m) = retained.iter().find(|&&m| m > exp.order()) {
        return Err(Error::invalid("retained", format!("index {m} exceeds the expansion order")));
    }
    let top = retained.iter().copied().max().unwrap_or(0);
    Ok(rule.expect(|z| {
        let h = hermite_all(top, z);
        let approx: f64 = retained.iter().map(|&m| exp.coefficients[m] * h[m]).sum();
        let r = g(z) - approx;
        r * r
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateRegime {
    Balanced,
    PolyTail { beta: f64 },
    SigmoidExp { a: f64, tau: f64 },
    BoundedAct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateParams {
    /// Width `N`.
    pub width: f64,
    /// Sample size `n`.
    pub samples: f64,
    pub horizon: f64,
    pub lambda: f64,
    /// Sparse depth `S`.
    pub depth: f64,
    pub d_eff: f64,
    pub d_orb: f64,
    /// Fitted decay constant standing in for the contraction rate.
    pub alpha_hat: f64,
    /// Sparse tail `κ`.
    #[serde(default)]
    pub kappa: f64,
    #[serde(default = "one")]
    pub c_sigma: f64,
    #[serde(default = "one_u32")]
    pub mult_sigma: u32,
}

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub regime: RateRegime,
    pub poc: f64,
    pub stat: f64,
    pub opt: f64,
    pub sparse: f64,
    pub total: f64,
    /// Power of `log n` in the statistical term.
    pub stat_log_power: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_balance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_bound: Option<f64>,
    /// The regime's closed-form headline rate, when it has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schematic: Option<f64>,
}

pub fn predicted_rates(regime: RateRegime, p: &RateParams) -> Result<RateReport> {
    let checks = [
        ("width", p.width),
        ("samples", p.samples),
        ("horizon", p.horizon),
        ("lambda", p.lambda),
        ("depth", p.depth),
        ("d_eff", p.d_eff),
        ("alpha_hat", p.alpha_hat),
        ("c_sigma", p.c_sigma),
    ];
    for (name, v) in checks {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(name, "must be positive"));
        }
    }
    if !(p.d_orb >= 0.0) || !(p.kappa >= 0.0) {
        return Err(Error::invalid("d_orb/kappa", "must be nonnegative"));
    }
    let log_n = p.samples.ln();
    let factor = p.d_eff + 2.0 - p.d_orb;
    let power = if matches!(regime, RateRegime::BoundedAct) { 1 } else { 2 };
    let poc = 1.0 / p.width;
    let stat = p.depth * factor * log_n.powi(power) / p.samples;
    let opt = (-p.alpha_hat * p.horizon).exp();
    let sparse = p.kappa;
    let (s_balance, depth_bound, schematic) = match regime {
        RateRegime::Balanced | RateRegime::BoundedAct => (None, None, None),
        RateRegime::PolyTail { beta } => {
            if !(beta > 1.0) {
                return Err(Error::invalid("beta", "must exceed 1"));
            }
            let s_bal = (p.samples / (log_n * log_n)).powf(1.0 / (2.0 * beta));
            let rate = poc
                + p.samples.powf(-beta / (beta + 1.0))
                    * log_n.powf((2.0 * beta + 1.0) / (beta + 1.0));
            (Some(s_bal), None, Some(rate))
        }
        RateRegime::SigmoidExp { a, tau } => {
            let count = if p.lambda >= a / p.c_sigma {
                0.0
            } else {
                1.0 + (a / (p.c_sigma * p.lambda)).ln() / tau
            };
            let rate = poc + log_n.powi(3) / p.samples;
            (None, Some(count * p.mult_sigma as f64), Some(rate))
        }
    };
    Ok(RateReport {
        regime,
        poc,
        stat,
        opt,
        sparse,
        total: poc + stat + opt + sparse,
        stat_log_power: power as u32,
        s_balance,
        depth_bound,
        schematic,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseResult {
    pub name: String,
    /// The clause's ratio; it passes when the ratio is below 1.
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleVerdict {
    pub clauses: Vec<ClauseResult>,
    pub all_pass: bool,
}

impl ScheduleVerdict {
    pub fn violated(&self) -> Vec<&str> {
        self.clauses
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Evaluates the three compatibility clauses at one point of a schedule.
/// Each little-o / divergence requirement is read as a ratio that must sit
/// below 1: `(λT)⁻¹/log N`, `S(λ)(log n)²/n`, and `log N/(α̂T)`.
pub fn schedule_check(
    width: f64,
    samples: f64,
    horizon: f64,
    lambda: f64,
    alpha_hat: f64,
    depth_of_lambda: impl Fn(f64) -> f64,
) -> Result<ScheduleVerdict> {
    for (name, v) in [
        ("width", width),
        ("samples", samples),
        ("horizon", horizon),
        ("lambda", lambda),
        ("alpha_hat", alpha_hat),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(name, "must be positive"));
        }
    }
    let log_n = samples.ln();
    let log_w = width.ln();
    let ratios = [
        ("entropy_horizon", 1.0 / (lambda * horizon) / log_w),
        ("statistical", depth_of_lambda(lambda) * log_n * log_n / samples),
        ("contraction", log_w / (alpha_hat * horizon)),
    ];
    let clauses: Vec<ClauseResult> = ratios
        .iter()
        .map(|(name, r)| ClauseResult {
            name: (*name).to_string(),
            ratio: *r,
            pass: r.is_finite() && *r >= 0.0 && *r < 1.0,
        })
        .collect();
    let all_pass = clauses.iter().all(|c| c.pass);
    Ok(ScheduleVerdict { clauses, all_pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn low_order_hermite() {
        for z in [-2.5, -0.3, 0.0, 1.7] {
            assert_eq!(hermite_value(0, z), 1.0);
            assert_eq!(hermite_value(1, z), z);
            assert_abs_diff_eq!(hermite_value(2, z), (z * z - 1.0) / 2f64.sqrt(), epsilon = 1e-14);
            assert_abs_diff_eq!(
                hermite_value(3, z),
                (z.powi(3) - 3.0 * z) / 6f64.sqrt(),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn orthonormal_under_200_nodes() {
        let rule = GaussianRule::hermite(200).unwrap();
        assert_abs_diff_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-13);
        for m in 0..=12 {
            for k in 0..=12 {
                let ip = rule.expect(|z| hermite_value(m, z) * hermite_value(k, z));
                let want = if m == k { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-10, "({m},{k}) -> {ip}");
            }
        }
    }

    #[test]
    fn piecewise_rule_integrates_gaussian_moments() {
        let rule = GaussianRule::piecewise(&[0.0, 1.3], 0.5).unwrap();
        assert_abs_diff_eq!(rule.expect(|_| 1.0), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(rule.expect(|z| z * z), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(rule.expect(|z| z.powi(4)), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn expand_identity_and_square() {
        let e = expand(|z| z, DEFAULT_ORDER, DEFAULT_NODES).unwrap();
        assert!(e.converged);
        assert_abs_diff_eq!(e.coefficients[1], 1.0, epsilon = 1e-12);
        for (m, c) in e.coefficients.iter().enumerate() {
            if m != 1 {
                assert!(c.abs() < 1e-10, "m={m}: {c}");
            }
        }
        let e = expand(|z| z * z, DEFAULT_ORDER, DEFAULT_NODES).unwrap();
        assert_abs_diff_eq!(e.coefficients[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(e.coefficients[2], 2f64.sqrt(), epsilon = 1e-8);
        for (m, c) in e.coefficients.iter().enumerate() {
            if m != 0 && m != 2 {
                assert!(c.abs() < 1e-10, "m={m}: {c}");
            }
        }
    }

    #[test]
    fn expand_relu_mean() {
        let relu = |z: f64| z.max(0.0);
        let rule = GaussianRule::piecewise(&[0.0], 0.5).unwrap();
        let e = expand_with(relu, DEFAULT_ORDER, &rule).unwrap();
        assert!(e.converged);
        assert_abs_diff_eq!(e.coefficients[0], 1.0 / (2.0 * PI).sqrt(), epsilon = 1e-8);
        // E[relu(Z)·Z] = 1/2
        assert_abs_diff_eq!(e.coefficients[1], 0.5, epsilon = 1e-12);

        // plain Gauss–Hermite cannot resolve the kink to this accuracy
        let gh = expand(relu, DEFAULT_ORDER, DEFAULT_NODES).unwrap();
        assert!((gh.coefficients[0] - 1.0 / (2.0 * PI).sqrt()).abs() > 1e-8);
        assert!(!gh.converged);
    }

    #[test]
    fn bessel_inequality() {
        let rule = GaussianRule::piecewise(&[-0.5, 0.7], 0.5).unwrap();
        let g = |z: f64| (z + 0.5).max(0.0) - 2.0 * (z - 0.7).max(0.0) + z.tanh();
        let e = expand_with(g, DEFAULT_ORDER, &rule).unwrap();
        assert!(e.energy() <= e.norm_sq + 1e-8);
        let e = expand(|z: f64| (0.3 * z).sin(), 40, DEFAULT_NODES).unwrap();
        assert!(e.energy() <= e.norm_sq + 1e-8);
    }

    fn exp_family(a: f64, tau: f64, order: usize) -> HermiteExpansion {
        HermiteExpansion::from_coefficients((0..=order).map(|m| a * (-tau * m as f64).exp()).collect())
    }

    #[test]
    fn threshold_examples() {
        let e = exp_family(1.0, 0.5, 64);
        let r = threshold(&e, 0.01, 1.0, 1).unwrap();
        assert_eq!(r.retained.len(), 10);
        assert_eq!(r.s_up, 10);
        assert_eq!(exp_tail_count(1.0, 0.5, 1.0, 0.01), 10);

        let r = threshold(&e, 2.0, 1.0, 2).unwrap();
        assert!(r.retained.is_empty());
        assert_eq!(r.s_up, 0);
        assert_abs_diff_eq!(r.kappa, e.energy(), epsilon = 1e-15);

        let finite = HermiteExpansion::from_coefficients(vec![0.0, 0.4, 0.0, -0.2, 1e-3]);
        let r = threshold(&finite, 1e-9, 1.0, 2).unwrap();
        assert_eq!(r.retained, vec![1, 3, 4]);
        assert_eq!(r.s_up, 6);
        assert_abs_diff_eq!(r.kappa, 3e-9, epsilon = 1e-20);
        assert!(threshold(&finite, 0.0, 1.0, 1).is_err());
        assert!(threshold(&finite, 0.1, -1.0, 1).is_err());
    }

    #[test]
    fn threshold_monotone_in_lambda() {
        let e = exp_family(2.0, 0.3, 64);
        let lams = [1e-5, 1e-4, 3e-3, 0.05, 0.4];
        for w in lams.windows(2) {
            let lo = threshold(&e, w[0], 1.0, 1).unwrap();
            let hi = threshold(&e, w[1], 1.0, 1).unwrap();
            assert!(hi.retained.iter().all(|m| lo.retained.contains(m)));
            assert!(lo.tail_energy() <= hi.tail_energy() + 1e-15);
            let recomputed: f64 = e
                .coefficients
                .iter()
                .enumerate()
                .filter(|(m, _)| !lo.retained.contains(m))
                .map(|(_, c)| c * c)
                .sum::<f64>()
                + w[0] * lo.retained.len() as f64;
            assert_abs_diff_eq!(lo.kappa, recomputed, epsilon = 1e-14);
        }
    }

    #[test]
    fn depth_bound_examples() {
        assert_abs_diff_eq!(
            exp_tail_depth_bound(1.0, 1.0, 1.0, (-1f64).exp(), 1).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(exp_tail_depth_bound(2.0, 0.7, 4.0, 0.5, 3).unwrap(), 0.0);
        assert!(exp_tail_depth_bound(-1.0, 1.0, 1.0, 0.1, 1).is_err());
    }

    #[test]
    fn parseval_examples() {
        let rule = GaussianRule::hermite(DEFAULT_NODES).unwrap();
        let cube = |z: f64| z * z * z;
        let e = expand(cube, 12, DEFAULT_NODES).unwrap();
        let r = parseval_residual(&e, &[1], cube, &rule).unwrap();
        assert_abs_diff_eq!(r, 6.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r, e.coefficients[3].powi(2), epsilon = 1e-8);
        let all: Vec<usize> = (0..=12).collect();
        assert!(parseval_residual(&e, &all, cube, &rule).unwrap() < 1e-10);
        let none = parseval_residual(&e, &[], cube, &rule).unwrap();
        assert_abs_diff_eq!(none, 15.0, epsilon = 1e-9);
        assert!(parseval_residual(&e, &[13], cube, &rule).is_err());
    }

    #[test]
    fn rate_examples() {
        let p = RateParams {
            width: 100.0,
            samples: std::f64::consts::E.powi(2),
            horizon: 1.0,
            lambda: 0.1,
            depth: 1.0,
            d_eff: 1.0,
            d_orb: 1.0,
            alpha_hat: 1.0,
            kappa: 0.0,
            c_sigma: 1.0,
            mult_sigma: 1,
        };
        let r = predicted_rates(RateRegime::Balanced, &p).unwrap();
        assert_abs_diff_eq!(r.stat, 8.0 / std::f64::consts::E.powi(2), epsilon = 1e-15);
        let b = predicted_rates(RateRegime::BoundedAct, &p).unwrap();
        assert_eq!((r.stat_log_power, b.stat_log_power), (2, 1));
        assert_abs_diff_eq!(b.stat * 2.0, r.stat, epsilon = 1e-15);

        let p = RateParams { samples: 1e4, ..p };
        let poly = predicted_rates(RateRegime::PolyTail { beta: 1.0 + 1e-12 }, &p).unwrap();
        let ln = 1e4f64.ln();
        assert_abs_diff_eq!(poly.s_balance.unwrap(), (1e4 / (ln * ln)).sqrt(), epsilon = 1e-6);
        assert!(predicted_rates(RateRegime::PolyTail { beta: 0.5 }, &p).is_err());
        assert!(predicted_rates(RateRegime::Balanced, &RateParams { width: 0.0, ..p }).is_err());
    }

    #[test]
    fn schedule_examples() {
        let n = 1e6f64;
        let lam = 1.0 / n;
        let alpha = lam;
        let t = n.ln().powi(2) / alpha;
        let depth = |l: f64| (1.0 / l).ln();
        let v = schedule_check(n * n, n, t, lam, alpha, depth).unwrap();
        assert!(v.all_pass, "{v:?}");

        let v = schedule_check(n * n, n, 1.0, lam, alpha, depth).unwrap();
        assert!(v.violated().contains(&"contraction"));

        let v = schedule_check(100.0, 10.0, 1e4, 0.1, 0.1, depth).unwrap();
        assert!(v.violated().contains(&"statistical"));
    }

    proptest! {
        #[test]
        fn depth_bound_dominates_decaying_modes(
            a in 0.1f64..10.0, tau in 0.05f64..3.0, log_lam in -12.0f64..0.0, mult in 1u32..4,
        ) {
            let lambda = log_lam.exp();
            let e = exp_family(a, tau, 400);
            let r = threshold(&e, lambda, 1.0, mult).unwrap();
            let bound = exp_tail_depth_bound(a, tau, 1.0, lambda, mult).unwrap();
            // modes m ≥ 1 satisfy m < L, hence their count never exceeds L
            let decaying = r.retained.iter().filter(|&&m| m >= 1).count() as f64 * mult as f64;
            prop_assert!(decaying <= bound + 1e-9);
            prop_assert!(r.s_up as f64 <= bound + mult as f64 + 1e-9);
        }
    }
}
