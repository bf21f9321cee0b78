//! Weighted moment classes: Gaussian moment formulas, the reciprocal
//! boundary `w*`, submultiplicativity, and empirical weighted norms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Ensemble;
use crate::output::fmt_f64;

/// Largest moment order `n` (so `E|θ|^{2n}` up to degree 128).
pub const MAX_ORDER: u32 = 64;

/// `E|θ|^{2n}` for `θ ~ N(0, I_m)`: `2ⁿ·Γ(n + m/2)/Γ(m/2) = Π_{j<n} (m + 2j)`.
/// The product is exact in floating point while it stays below 2⁵³.
pub fn gaussian_even_moment(n: u32, m: u32) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("n/m", "orders must be at least 1"));
    }
    let mut acc = 1.0f64;
    for j in 0..n {
        acc *= (m + 2 * j) as f64;
        if !acc.is_finite() {
            return Err(Error::Overflow(format!("gaussian_even_moment({n}, {m})")));
        }
    }
    Ok(acc)
}

/// `log E(c·χ²_m)^k = k·log c + Σ_{j<k} log(m + 2j)`.
fn log_scaled_chi2_moment(c: f64, m: u32, k: u32) -> f64 {
    if k == 0 {
        return 0.0;
    }
    k as f64 * c.ln() + (0..k).map(|j| ((m + 2 * j) as f64).ln()).sum::<f64>()
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    (0..k).map(|j| (((n - j) as f64) / ((j + 1) as f64)).ln()).sum()
}

/// Initial law whose moments are available in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// μP initialization on `R^{d+2}`: variances `1/d` on `w`, 1 on `b` and `a`.
    Mup { d: u32 },
    StandardGaussian { m: u32 },
    /// Independent centered coordinates with the given variances.
    DiagonalGaussian { variances: Vec<f64> },
    PointMass { point: Vec<f64> },
}

impl InitSpec {
    /// Groups of equal variance as `(variance, count)`.
    fn blocks(&self) -> Result<Vec<(f64, u32)>> {
        match self {
            InitSpec::Mup { d } => {
                if *d == 0 {
                    return Err(Error::invalid("init.d", "must be at least 1"));
                }
                Ok(vec![(1.0 / *d as f64, *d), (1.0, 2)])
            }
            InitSpec::StandardGaussian { m } => {
                if *m == 0 {
                    return Err(Error::invalid("init.m", "must be at least 1"));
                }
                Ok(vec![(1.0, *m)])
            }
            InitSpec::DiagonalGaussian { variances } => {
                if variances.is_empty() || variances.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::invalid("init.variances", "must be nonempty, finite and nonnegative"));
                }
                let mut sorted: Vec<f64> = variances.iter().copied().filter(|v| *v > 0.0).collect();
                sorted.sort_by(f64::total_cmp);
                let mut blocks: Vec<(f64, u32)> = Vec::new();
                for v in sorted {
                    match blocks.last_mut() {
                        Some((c, k)) if *c == v => *k += 1,
                        _ => blocks.push((v, 1)),
                    }
                }
                Ok(blocks)
            }
            InitSpec::PointMass { .. } => Ok(Vec::new()),
        }
    }

    /// `log E|θ|^{2n}`; `−∞` when the moment vanishes.
    pub fn log_moment(&self, n: u32) -> Result<f64> {
        if n == 0 {
            return Ok(0.0);
        }
        if n > MAX_ORDER {
            return Err(Error::invalid("n", format!("moment order above {MAX_ORDER}")));
        }
        if let InitSpec::PointMass { point } = self {
            if point.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("init.point", "must be finite"));
            }
            let r2: f64 = point.iter().map(|v| v * v).sum();
            return Ok(if r2 == 0.0 { f64::NEG_INFINITY } else { n as f64 * r2.ln() });
        }
        let blocks = self.blocks()?;
        if blocks.is_empty() {
            return Ok(f64::NEG_INFINITY);
        }
        // log-moments of the running partial sum of blocks, orders 0..=n
        let mut acc: Vec<f64> = (0..=n).map(|k| log_scaled_chi2_moment(blocks[0].0, blocks[0].1, k)).collect();
        for &(c, m) in &blocks[1..] {
            let own: Vec<f64> = (0..=n).map(|k| log_scaled_chi2_moment(c, m, k)).collect();
            acc = (0..=n)
                .map(|order| {
                    let terms: Vec<f64> = (0..=order)
                        .map(|k| ln_binomial(order, k) + acc[k as usize] + own[(order - k) as usize])
                        .collect();
                    log_sum_exp(&terms)
                })
                .collect();
        }
        Ok(acc[n as usize])
    }

    /// `(E|θ|^{2n})^{1/(2n)}`, the moment-growth sequence.
    pub fn g0(&self, n: u32) -> Result<f64> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        Ok((self.log_moment(n)? / (2.0 * n as f64)).exp())
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// `(E_{μ₀}|θ|^{2n})^{−1/(2n)}`; `+∞` for an order with zero mass.
pub fn wstar(n: u32, init: &InitSpec) -> Result<f64> {
    let g = init.g0(n)?;
    Ok(if g == 0.0 { f64::INFINITY } else { 1.0 / g })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightOrigin {
    ReciprocalOfInit,
    User,
}

/// Weights `w(1..=len)`, with `w(0) = 1` implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    values: Vec<f64>,
    pub origin: WeightOrigin,
    pub c_w: Option<f64>,
}

impl WeightSequence {
    pub fn user(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("weights"));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("weights", "must be positive and finite"));
        }
        Ok(Self {
            values,
            origin: WeightOrigin::User,
            c_w: None,
        })
    }

    pub fn from_fn(n_max: u32, f: impl Fn(u32) -> f64) -> Result<Self> {
        Self::user((1..=n_max).map(f).collect())
    }

    /// `w*` for the given initial law, through order `n_max`.
    pub fn reciprocal_of_init(init: &InitSpec, n_max: u32) -> Result<Self> {
        let values = (1..=n_max).map(|n| wstar(n, init)).collect::<Result<Vec<_>>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("init", "degenerate law: w* is infinite"));
        }
        Ok(Self {
            values,
            origin: WeightOrigin::ReciprocalOfInit,
            c_w: None,
        })
    }

    /// Highest stored order.
    pub fn len(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, n: u32) -> Option<f64> {
        match n {
            0 => Some(1.0),
            _ => self.values.get(n as usize - 1).copied(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Smallest `C ≥ 1` with `w(m+n) ≥ C⁻¹·w(m)·w(n)` for `1 ≤ m, n ≤ n_max`;
/// also stores it on the sequence.
pub fn check_submultiplicative(w: &mut WeightSequence, n_max: u32) -> Result<(bool, f64)> {
    if w.len() < 2 * n_max {
        return Err(Error::invalid("weights", format!("need values through order {}", 2 * n_max)));
    }
    let mut c = 1.0f64;
    for m in 1..=n_max {
        for n in 1..=n_max {
            let (wm, wn, wmn) = (w.get(m).unwrap(), w.get(n).unwrap(), w.get(m + n).unwrap());
            c = c.max(wm * wn / wmn);
        }
    }
    w.c_w = Some(c);
    Ok((c.is_finite(), c))
}

/// `sup_{1≤n≤n_max} w(n)·(mean_i |θ_i|^{2n})^{1/(2n)}`.
pub fn empirical_weighted_norm(ens: &Ensemble, w: &WeightSequence, n_max: u32) -> Result<f64> {
    if n_max == 0 {
        return Err(Error::invalid("n_max", "must be at least 1"));
    }
    if w.len() < n_max {
        return Err(Error::invalid("weights", format!("need values through order {n_max}")));
    }
    let radii: Vec<f64> = ens.particles().map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    if r_max == 0.0 {
        return Ok(0.0);
    }
    let mut best = 0.0f64;
    for n in 1..=n_max {
        let mean = radii.iter().map(|r| (r / r_max).powi(2 * n as i32)).sum::<f64>() / radii.len() as f64;
        best = best.max(w.get(n).unwrap() * r_max * mean.powf(1.0 / (2.0 * n as f64)));
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalityReport {
    pub orders: Vec<u32>,
    /// `w̃(n)·g₀(n)`.
    pub ratio: Vec<f64>,
    /// `(w̃(n)·g₀(n))^{2n}`, the size of the `n`-th term of the weighted norm.
    pub moment_scale: Vec<f64>,
    /// Log-log slope of the ratio over the upper half of the grid.
    pub tail_slope: f64,
    pub divergent: bool,
}

/// Divergence threshold on the moment scale.
pub const DIVERGENCE_THRESHOLD: f64 = 1e3;

/// Compares a candidate weight against the initial law's moment growth.
/// Divergence is flagged when the ratio grows monotonically over the upper
/// half of the grid with a positive power-law trend and the moment scale at
/// `n_max` exceeds [`DIVERGENCE_THRESHOLD`].
pub fn maximality_witness(w_tilde: &WeightSequence, init: &InitSpec, n_max: u32) -> Result<MaximalityReport> {
    if n_max < 4 {
        return Err(Error::invalid("n_max", "need at least 4 orders"));
    }
    if w_tilde.len() < n_max {
        return Err(Error::invalid("weights", format!("need values through order {n_max}")));
    }
    let orders: Vec<u32> = (1..=n_max).collect();
    let ratio = orders
        .iter()
        .map(|&n| Ok(w_tilde.get(n).unwrap() * init.g0(n)?))
        .collect::<Result<Vec<f64>>>()?;
    let moment_scale: Vec<f64> = orders.iter().zip(&ratio).map(|(&n, r)| r.powi(2 * n as i32)).collect();
    let tail = (n_max / 2) as usize..n_max as usize;
    let xs: Vec<f64> = orders[tail.clone()].iter().map(|&n| n as f64).collect();
    let tail_slope = crate::stats::fit_loglog(&xs, &ratio[tail.clone()])?.slope;
    let monotone = ratio[tail].windows(2).all(|p| p[1] >= p[0] * (1.0 - 1e-12));
    let divergent = monotone && tail_slope > 0.05 && *moment_scale.last().unwrap() >= DIVERGENCE_THRESHOLD;
    Ok(MaximalityReport {
        orders,
        ratio,
        moment_scale,
        tail_slope,
        divergent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRow {
    pub n: u32,
    pub g0: f64,
    pub wstar: f64,
    pub empirical_norm: Option<f64>,
    pub time: f64,
}

/// Columns `n, g0, wstar, empirical_norm, time`; a missing empirical value is
/// left empty.
pub fn moments_csv(rows: &[MomentRow]) -> String {
    let mut out = String::from("n,g0,wstar,empirical_norm,time\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.n,
            fmt_f64(r.g0),
            fmt_f64(r.wstar),
            r.empirical_norm.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.time)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParameterPoint;
    use crate::rng::{self, Tag};

    fn double_factorial(k: u64) -> u64 {
        (1..=k).rev().step_by(2).product()
    }

    #[test]
    fn gaussian_moment_examples() {
        assert_eq!(gaussian_even_moment(1, 1).unwrap(), 1.0);
        assert_eq!(gaussian_even_moment(1, 5).unwrap(), 5.0);
        assert_eq!(gaussian_even_moment(2, 3).unwrap(), 15.0);
        for n in 1..=8u32 {
            assert_eq!(gaussian_even_moment(n, 1).unwrap(), double_factorial(2 * n as u64 - 1) as f64);
        }
        assert!(matches!(gaussian_even_moment(400, 1), Err(Error::Overflow(_))));
        assert!(gaussian_even_moment(0, 1).is_err());
    }

    #[test]
    fn closed_forms_agree() {
        for n in 1..=10 {
            let direct = gaussian_even_moment(n, 4).unwrap().ln();
            let via_blocks = InitSpec::DiagonalGaussian {
                variances: vec![1.0; 4],
            }
            .log_moment(n)
            .unwrap();
            let split = InitSpec::DiagonalGaussian {
                variances: vec![1.0, 1.0, 1.0, 1.0 + 1e-12],
            }
            .log_moment(n)
            .unwrap();
            assert!((direct - via_blocks).abs() < 1e-12);
            assert!((direct - split).abs() < 1e-10);
        }
        // μP with d = 2: |θ|² = (Z₁² + Z₂²)/2 + Z₃² + Z₄², so E|θ|² = 3
        let mup = InitSpec::Mup { d: 2 };
        assert!((mup.log_moment(1).unwrap().exp() - 3.0).abs() < 1e-12);
        // E|θ|⁴ = E[(A + B)²], A = χ²₂/2 (mean 1, second moment 2), B = χ²₂ (mean 2, second moment 8)
        assert!((mup.log_moment(2).unwrap().exp() - (2.0 + 2.0 * 2.0 + 8.0)).abs() < 1e-10);
    }

    #[test]
    fn wstar_examples() {
        let g = InitSpec::StandardGaussian { m: 1 };
        assert!((wstar(1, &g).unwrap() - 1.0).abs() < 1e-15);
        for m in [1, 3, 7] {
            let g = InitSpec::StandardGaussian { m };
            for n in 1..=12 {
                let v = wstar(n, &g).unwrap() * (n as f64).sqrt();
                assert!((0.3..=3.0).contains(&v), "m={m} n={n}: {v}");
            }
            for n in 1..32 {
                assert!(wstar(n + 1, &g).unwrap() <= wstar(n, &g).unwrap());
            }
        }
        let p = InitSpec::PointMass { point: vec![3.0, 4.0] };
        for n in 1..=10 {
            assert!((wstar(n, &p).unwrap() - 0.2).abs() < 1e-15);
        }
        let origin = InitSpec::PointMass { point: vec![0.0, 0.0] };
        assert_eq!(wstar(3, &origin).unwrap(), f64::INFINITY);
    }

    #[test]
    fn submultiplicative_examples() {
        let mut one = WeightSequence::from_fn(48, |_| 1.0).unwrap();
        assert_eq!(check_submultiplicative(&mut one, 24).unwrap(), (true, 1.0));
        let mut inv_sqrt = WeightSequence::from_fn(48, |n| (n as f64).powf(-0.5)).unwrap();
        let (ok, c) = check_submultiplicative(&mut inv_sqrt, 24).unwrap();
        assert!(ok && (c - 2f64.sqrt()).abs() < 1e-12);
        let mut geo = WeightSequence::from_fn(20, |n| 2f64.powi(n as i32)).unwrap();
        assert_eq!(check_submultiplicative(&mut geo, 10).unwrap(), (true, 1.0));
        assert!(check_submultiplicative(&mut geo, 11).is_err());
    }

    #[test]
    fn empirical_norm_examples() {
        let w1 = WeightSequence::from_fn(4, |_| 1.0).unwrap();
        let origin = Ensemble::from_points(&[ParameterPoint::dead(2)], 0).unwrap();
        assert_eq!(empirical_weighted_norm(&origin, &w1, 4).unwrap(), 0.0);
        let r = Ensemble::from_points(&[ParameterPoint::new(vec![1.0, 2.0], 2.0, 4.0).unwrap()], 0).unwrap();
        assert!((empirical_weighted_norm(&r, &w1, 4).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_ensemble_has_unit_weighted_norm() {
        let m = 4;
        let init = InitSpec::StandardGaussian { m };
        let w = WeightSequence::reciprocal_of_init(&init, 4).unwrap();
        let mut flat = vec![0.0; 100_000 * m as usize];
        rng::fill_normals(1, Tag::Init, 0, 0, &mut flat);
        let ens = Ensemble::from_flat(m as usize - 2, flat, 0).unwrap();
        let v = empirical_weighted_norm(&ens, &w, 4).unwrap();
        assert!((0.8..=1.3).contains(&v), "{v}");
    }

    #[test]
    fn maximality_examples() {
        let init = InitSpec::Mup { d: 2 };
        let w = WeightSequence::reciprocal_of_init(&init, 64).unwrap();
        let r = maximality_witness(&w, &init, 64).unwrap();
        assert!(r.ratio.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(!r.divergent);

        let one = WeightSequence::from_fn(64, |_| 1.0).unwrap();
        let r = maximality_witness(&one, &init, 64).unwrap();
        assert!(r.divergent);
        assert!((r.tail_slope - 0.5).abs() < 0.1);

        let inv = WeightSequence::from_fn(64, |n| 1.0 / n as f64).unwrap();
        let r = maximality_witness(&inv, &init, 64).unwrap();
        assert!(!r.divergent);
        assert!((r.tail_slope + 0.5).abs() < 0.1);
    }

    #[test]
    fn csv_layout() {
        let rows = [MomentRow {
            n: 1,
            g0: 1.0,
            wstar: 1.0,
            empirical_norm: None,
            time: 0.0,
        }];
        let csv = moments_csv(&rows);
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 5);
    }
}
