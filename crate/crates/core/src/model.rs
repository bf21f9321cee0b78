//! Parameters, activations, targets, the data law, and network evaluation.
//!
//! A neuron is `θ = (w, b, a) ∈ R^{d+2}` and contributes the feature
//! `a·σ(⟨w, x⟩ + b)`. A width-`N` network averages `N` such features, which
//! is the mean-field normalization every other module assumes.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dictionary::hermite_value;
use crate::error::{Error, Result};
use crate::rng::{self, Tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    pub w: Vec<f64>,
    pub b: f64,
    pub a: f64,
}

impl ParameterPoint {
    pub fn new(w: Vec<f64>, b: f64, a: f64) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Empty("input weight w"));
        }
        if !(w.iter().all(|v| v.is_finite()) && b.is_finite() && a.is_finite()) {
            return Err(Error::invalid("theta", "all coordinates must be finite"));
        }
        Ok(Self { w, b, a })
    }

    /// The dead point `(0, 0, 0)` in dimension `d`.
    pub fn dead(d: usize) -> Self {
        Self {
            w: vec![0.0; d],
            b: 0.0,
            a: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// Flat layout `[w_1, …, w_d, b, a]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.w.clone();
        v.push(self.b);
        v.push(self.a);
        v
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        let d = flat.len() - 2;
        Self {
            w: flat[..d].to_vec(),
            b: flat[d],
            a: flat[d + 1],
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum::<f64>() + self.b * self.b + self.a * self.a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActivationKind {
    Relu,
    LeakyRelu { beta: f64 },
    Tanh,
    CenteredSigmoid,
    Monomial { k: u32 },
}

/// An activation together with its envelope constants and symmetry data.
///
/// `lipschitz` is the global Lipschitz constant where one exists; for
/// `monomial(k)` it is the constant on the unit ball, since `z^k` is only
/// locally Lipschitz. The envelope is `|σ(z)| ≤ envelope·(1 + |z|^q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ActivationConfig", into = "ActivationConfig")]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    pub lipschitz: f64,
    pub growth_exponent: u32,
    pub envelope: f64,
    pub mult_sigma: u32,
    pub d_orb: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationName {
    Relu,
    LeakyRelu,
    Tanh,
    CenteredSigmoid,
    Monomial,
}

/// Serialized form of [`ActivationSpec`]: the kind, its parameter, and an
/// optional ridge-multiplicity override.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationConfig {
    pub kind: ActivationName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mult_sigma: Option<u32>,
}

impl TryFrom<ActivationConfig> for ActivationSpec {
    type Error = Error;

    fn try_from(cfg: ActivationConfig) -> Result<Self> {
        let stray = |field: &str| {
            Error::invalid(format!("activation.{field}"), "not a parameter of this activation")
        };
        let kind = match cfg.kind {
            ActivationName::LeakyRelu => ActivationKind::LeakyRelu {
                beta: cfg.beta.ok_or_else(|| Error::invalid("activation.beta", "required for leaky_relu"))?,
            },
            ActivationName::Monomial => ActivationKind::Monomial {
                k: cfg.k.ok_or_else(|| Error::invalid("activation.k", "required for monomial"))?,
            },
            other => {
                if cfg.beta.is_some() {
                    return Err(stray("beta"));
                }
                if cfg.k.is_some() {
                    return Err(stray("k"));
                }
                match other {
                    ActivationName::Relu => ActivationKind::Relu,
                    ActivationName::Tanh => ActivationKind::Tanh,
                    _ => ActivationKind::CenteredSigmoid,
                }
            }
        };
        if cfg.kind == ActivationName::LeakyRelu && cfg.k.is_some() {
            return Err(stray("k"));
        }
        if cfg.kind == ActivationName::Monomial && cfg.beta.is_some() {
            return Err(stray("beta"));
        }
        let mut spec = ActivationSpec::new(kind)?;
        if let Some(m) = cfg.mult_sigma {
            if m == 0 {
                return Err(Error::invalid("activation.mult_sigma", "must be at least 1"));
            }
            spec.mult_sigma = m;
        }
        Ok(spec)
    }
}

impl From<ActivationSpec> for ActivationConfig {
    fn from(spec: ActivationSpec) -> Self {
        let default_mult = ActivationSpec::new(spec.kind).map(|s| s.mult_sigma).ok();
        let (kind, beta, k) = match spec.kind {
            ActivationKind::Relu => (ActivationName::Relu, None, None),
            ActivationKind::LeakyRelu { beta } => (ActivationName::LeakyRelu, Some(beta), None),
            ActivationKind::Tanh => (ActivationName::Tanh, None, None),
            ActivationKind::CenteredSigmoid => (ActivationName::CenteredSigmoid, None, None),
            ActivationKind::Monomial { k } => (ActivationName::Monomial, None, Some(k)),
        };
        ActivationConfig {
            kind,
            beta,
            k,
            mult_sigma: (default_mult != Some(spec.mult_sigma)).then_some(spec.mult_sigma),
        }
    }
}

impl ActivationSpec {
    pub fn new(kind: ActivationKind) -> Result<Self> {
        let spec = match kind {
            ActivationKind::Relu => Self::with(kind, 1.0, 1, 1.0, 2, 1),
            ActivationKind::LeakyRelu { beta } => {
                if !(beta > 0.0 && beta < 1.0) {
                    return Err(Error::invalid("activation.beta", "must lie in (0, 1)"));
                }
                Self::with(kind, 1.0, 1, 1.0, 2, 1)
            }
            ActivationKind::Tanh => Self::with(kind, 1.0, 1, 1.0, 1, 0),
            ActivationKind::CenteredSigmoid => Self::with(kind, 0.25, 1, 0.5, 1, 0),
            ActivationKind::Monomial { k } => {
                if k == 0 {
                    return Err(Error::invalid("activation.k", "must be at least 1"));
                }
                Self::with(kind, k as f64, k, 1.0, 1, 1)
            }
        };
        Ok(spec)
    }

    fn with(kind: ActivationKind, lip: f64, q: u32, env: f64, mult: u32, d_orb: u32) -> Self {
        Self {
            kind,
            lipschitz: lip,
            growth_exponent: q,
            envelope: env,
            mult_sigma: mult,
            d_orb,
        }
    }

    pub fn relu() -> Self {
        Self::new(ActivationKind::Relu).expect("relu is valid")
    }

    pub fn tanh() -> Self {
        Self::new(ActivationKind::Tanh).expect("tanh is valid")
    }

    pub fn centered_sigmoid() -> Self {
        Self::new(ActivationKind::CenteredSigmoid).expect("centered sigmoid is valid")
    }

    pub fn monomial(k: u32) -> Result<Self> {
        Self::new(ActivationKind::Monomial { k })
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match self.kind {
            ActivationKind::Relu => z.max(0.0),
            ActivationKind::LeakyRelu { beta } => {
                if z > 0.0 {
                    z
                } else {
                    beta * z
                }
            }
            ActivationKind::Tanh => z.tanh(),
            ActivationKind::CenteredSigmoid => logistic(z) - 0.5,
            ActivationKind::Monomial { k } => z.powi(k as i32),
        }
    }

    /// Derivative; the ReLU kink takes the value 0 (leaky: `β`).
    #[inline]
    pub fn deriv(&self, z: f64) -> f64 {
        match self.kind {
            ActivationKind::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::LeakyRelu { beta } => {
                if z > 0.0 {
                    1.0
                } else {
                    beta
                }
            }
            ActivationKind::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            ActivationKind::CenteredSigmoid => {
                let s = logistic(z);
                s * (1.0 - s)
            }
            ActivationKind::Monomial { k } => k as f64 * z.powi(k as i32 - 1),
        }
    }

    /// `σ(−z) = −σ(z)`.
    pub fn is_odd(&self) -> bool {
        match self.kind {
            ActivationKind::Tanh | ActivationKind::CenteredSigmoid => true,
            ActivationKind::Monomial { k } => k % 2 == 1,
            _ => false,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(
            self.kind,
            ActivationKind::Tanh | ActivationKind::CenteredSigmoid
        )
    }

    /// Positively homogeneous of the returned degree, if any.
    pub fn homogeneity_degree(&self) -> Option<u32> {
        match self.kind {
            ActivationKind::Relu | ActivationKind::LeakyRelu { .. } => Some(1),
            ActivationKind::Monomial { k } => Some(k),
            _ => None,
        }
    }

    /// The stored orbit depth is a choice rather than a derived fact.
    pub fn d_orb_ambiguous(&self) -> bool {
        matches!(self.kind, ActivationKind::Monomial { .. })
    }

    pub fn name(&self) -> String {
        match self.kind {
            ActivationKind::Relu => "relu".into(),
            ActivationKind::LeakyRelu { beta } => format!("leaky_relu({beta})"),
            ActivationKind::Tanh => "tanh".into(),
            ActivationKind::CenteredSigmoid => "centered_sigmoid".into(),
            ActivationKind::Monomial { k } => format!("monomial({k})"),
        }
    }
}

#[inline]
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hinge {
    pub at: f64,
    pub coef: f64,
}

/// One ridge unit `coef·relu(⟨direction, z⟩ + bias)` of a multi-index link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RidgeUnit {
    pub coef: f64,
    pub direction: Vec<f64>,
    #[serde(default)]
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetKind {
    /// `⟨v, x⟩`.
    Linear { v: Vec<f64> },
    /// `g(⟨v, x⟩)` with `g(z) = intercept + slope·z + Σ coef·relu(z − at)`.
    PiecewiseLinear {
        v: Vec<f64>,
        #[serde(default)]
        intercept: f64,
        #[serde(default)]
        slope: f64,
        hinges: Vec<Hinge>,
    },
    /// `Σ_m coefficients[m]·ĥ_m(⟨u, x⟩)`.
    SingleIndex { u: Vec<f64>, coefficients: Vec<f64> },
    /// `ĥ_m(⟨v, x⟩)`.
    HermiteSingle { m: u32, v: Vec<f64> },
    /// `g(Πx)` with `Π` given row-wise and `g` a sum of ReLU ridge units.
    MultiIndex {
        projection: Vec<Vec<f64>>,
        link: Vec<RidgeUnit>,
    },
}

/// A validated target. Direction vectors are unit-normalized at construction
/// and `d_eff` is the rank of the declared projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TargetKind", into = "TargetKind")]
pub struct TargetSpec {
    kind: TargetKind,
    d: usize,
    d_eff: usize,
}

impl From<TargetSpec> for TargetKind {
    fn from(t: TargetSpec) -> Self {
        t.kind
    }
}

impl TryFrom<TargetKind> for TargetSpec {
    type Error = Error;

    fn try_from(kind: TargetKind) -> Result<Self> {
        TargetSpec::new(kind)
    }
}

fn unit(v: &[f64], name: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::invalid(name, "direction must be nonempty"));
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::invalid(name, "direction must be finite and nonzero"));
    }
    // already unit up to rounding: keep as is so configs round-trip exactly
    if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
        return Ok(v.to_vec());
    }
    Ok(v.iter().map(|x| x / n).collect())
}

impl TargetSpec {
    pub fn new(kind: TargetKind) -> Result<Self> {
        let (kind, d, d_eff) = match kind {
            TargetKind::Linear { v } => {
                let v = unit(&v, "target.v")?;
                let d = v.len();
                (TargetKind::Linear { v }, d, 1)
            }
            TargetKind::PiecewiseLinear {
                v,
                intercept,
                slope,
                hinges,
            } => {
                let v = unit(&v, "target.v")?;
                let d = v.len();
                let mut hinges = hinges;
                hinges.sort_by(|a, b| a.at.total_cmp(&b.at));
                (
                    TargetKind::PiecewiseLinear {
                        v,
                        intercept,
                        slope,
                        hinges,
                    },
                    d,
                    1,
                )
            }
            TargetKind::SingleIndex { u, coefficients } => {
                let u = unit(&u, "target.u")?;
                if coefficients.is_empty() {
                    return Err(Error::invalid("target.coefficients", "must be nonempty"));
                }
                let d = u.len();
                (TargetKind::SingleIndex { u, coefficients }, d, 1)
            }
            TargetKind::HermiteSingle { m, v } => {
                let v = unit(&v, "target.v")?;
                let d = v.len();
                (TargetKind::HermiteSingle { m, v }, d, 1)
            }
            TargetKind::MultiIndex { projection, link } => {
                if projection.is_empty() {
                    return Err(Error::invalid("target.projection", "must have at least one row"));
                }
                let d = projection[0].len();
                if d == 0 || projection.iter().any(|r| r.len() != d) {
                    return Err(Error::invalid("target.projection", "rows must share a nonzero length"));
                }
                let r = projection.len();
                if link.iter().any(|u| u.direction.len() != r) {
                    return Err(Error::invalid("target.link", "ridge directions must have one entry per projection row"));
                }
                let rank = matrix_rank(&projection, 1e-10);
                if rank == 0 {
                    return Err(Error::invalid("target.projection", "projection has rank 0"));
                }
                (TargetKind::MultiIndex { projection, link }, d, rank)
            }
        };
        Ok(Self { kind, d, d_eff })
    }

    pub fn linear(v: Vec<f64>) -> Result<Self> {
        Self::new(TargetKind::Linear { v })
    }

    pub fn hermite_single(m: u32, v: Vec<f64>) -> Result<Self> {
        Self::new(TargetKind::HermiteSingle { m, v })
    }

    pub fn kind(&self) -> &TargetKind {
        &self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn d_eff(&self) -> usize {
        self.d_eff
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            TargetKind::Linear { .. } => "linear",
            TargetKind::PiecewiseLinear { .. } => "piecewise_linear",
            TargetKind::SingleIndex { .. } => "single_index",
            TargetKind::HermiteSingle { .. } => "hermite_single",
            TargetKind::MultiIndex { .. } => "multi_index",
        }
    }

    /// The one-dimensional link `g` of a single-index target, if any.
    pub fn link_1d(&self) -> Option<(Vec<f64>, Box<dyn Fn(f64) -> f64 + Send + Sync>)> {
        match &self.kind {
            TargetKind::Linear { v } => Some((v.clone(), Box::new(|z| z))),
            TargetKind::PiecewiseLinear {
                v,
                intercept,
                slope,
                hinges,
            } => {
                let (c, s, h) = (*intercept, *slope, hinges.clone());
                Some((v.clone(), Box::new(move |z| piecewise(c, s, &h, z))))
            }
            TargetKind::SingleIndex { u, coefficients } => {
                let c = coefficients.clone();
                Some((u.clone(), Box::new(move |z| hermite_series(&c, z))))
            }
            TargetKind::HermiteSingle { m, v } => {
                let m = *m as usize;
                Some((v.clone(), Box::new(move |z| hermite_value(m, z))))
            }
            TargetKind::MultiIndex { .. } => None,
        }
    }

    /// Unchecked evaluation; `x.len()` must equal the input dimension.
    #[inline]
    pub(crate) fn eval_raw(&self, x: &[f64]) -> f64 {
        match &self.kind {
            TargetKind::Linear { v } => dot(v, x),
            TargetKind::PiecewiseLinear {
                v,
                intercept,
                slope,
                hinges,
            } => piecewise(*intercept, *slope, hinges, dot(v, x)),
            TargetKind::SingleIndex { u, coefficients } => hermite_series(coefficients, dot(u, x)),
            TargetKind::HermiteSingle { m, v } => hermite_value(*m as usize, dot(v, x)),
            TargetKind::MultiIndex { projection, link } => {
                let z: Vec<f64> = projection.iter().map(|row| dot(row, x)).collect();
                link.iter()
                    .map(|u| u.coef * (dot(&u.direction, &z) + u.bias).max(0.0))
                    .sum()
            }
        }
    }
}

fn piecewise(intercept: f64, slope: f64, hinges: &[Hinge], z: f64) -> f64 {
    intercept + slope * z + hinges.iter().map(|h| h.coef * (z - h.at).max(0.0)).sum::<f64>()
}

fn hermite_series(coefficients: &[f64], z: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut acc = 0.0;
    for (m, c) in coefficients.iter().enumerate() {
        acc += c * cur;
        let next = (z * cur - (m as f64).sqrt() * prev) / ((m + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    acc
}

/// Row-echelon rank with partial pivoting.
pub fn matrix_rank(rows: &[Vec<f64>], tol: f64) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let ncols = m.first().map_or(0, |r| r.len());
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    let mut rank = 0;
    for col in 0..ncols {
        if rank == m.len() {
            break;
        }
        let pivot = (rank..m.len())
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col].abs() <= tol * scale {
            continue;
        }
        m.swap(rank, pivot);
        for i in rank + 1..m.len() {
            let f = m[i][col] / m[rank][col];
            for j in col..ncols {
                m[i][j] -= f * m[rank][j];
            }
        }
        rank += 1;
    }
    rank
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Standard Gaussian inputs with `y = f*(x) + noise·ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataLaw {
    pub target: TargetSpec,
    pub label_noise: f64,
}

impl DataLaw {
    pub fn new(target: TargetSpec, label_noise: f64) -> Result<Self> {
        if !(label_noise >= 0.0 && label_noise.is_finite()) {
            return Err(Error::invalid("label_noise", "must be finite and nonnegative"));
        }
        Ok(Self {
            target,
            label_noise,
        })
    }

    pub fn noiseless(target: TargetSpec) -> Self {
        Self {
            target,
            label_noise: 0.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.target.input_dim()
    }

    /// `n` draws from the keyed stream `(seed, tag, step)`.
    pub(crate) fn draw(&self, n: usize, seed: u64, tag: Tag, step: u64) -> Dataset {
        let d = self.input_dim();
        let mut rng = rng::stream(seed, tag, step, 0);
        let mut xs = Vec::with_capacity(n * d);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let start = xs.len();
            for _ in 0..d {
                xs.push(StandardNormal.sample(&mut rng));
            }
            let clean = self.target.eval_raw(&xs[start..]);
            let eps: f64 = StandardNormal.sample(&mut rng);
            ys.push(clean + self.label_noise * eps);
        }
        Dataset { d, xs, ys }
    }
}

/// Row-major inputs with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub d: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn x(&self, j: usize) -> &[f64] {
        &self.xs[j * self.d..(j + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.xs.chunks_exact(self.d).zip(self.ys.iter().copied())
    }

    /// The first `n` samples.
    pub fn prefix(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            d: self.d,
            xs: self.xs[..n * self.d].to_vec(),
            ys: self.ys[..n].to_vec(),
        }
    }
}

pub fn sample_dataset(law: &DataLaw, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Empty("dataset"));
    }
    Ok(law.draw(n, seed, Tag::Dataset, 0))
}

/// `N` particles in the flat layout `[w_1..w_d, b, a]` per particle.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    d: usize,
    params: Vec<f64>,
    pub time: f64,
    pub seed: u64,
}

impl Ensemble {
    pub fn from_points(points: &[ParameterPoint], seed: u64) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty("ensemble"))?;
        let d = first.dim();
        let mut params = Vec::with_capacity(points.len() * (d + 2));
        for p in points {
            if p.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.dim(),
                });
            }
            params.extend_from_slice(&p.w);
            params.push(p.b);
            params.push(p.a);
        }
        Self::from_flat(d, params, seed)
    }

    pub fn from_flat(d: usize, params: Vec<f64>, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "input dimension must be at least 1"));
        }
        if params.is_empty() {
            return Err(Error::Empty("ensemble"));
        }
        if params.len() % (d + 2) != 0 {
            return Err(Error::invalid("ensemble", "length is not a multiple of d + 2"));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("ensemble", "all coordinates must be finite"));
        }
        Ok(Self {
            d,
            params,
            time: 0.0,
            seed,
        })
    }

    /// μP initialization: `w ~ N(0, I_d/d)`, `b ~ N(0, 1)`, `a ~ N(0, 1)`.
    /// Particle `i` draws from its own keyed stream, so the first `N`
    /// particles of a wider initialization coincide with a narrower one.
    pub fn mup_init(d: usize, n: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "input dimension must be at least 1"));
        }
        if n == 0 {
            return Err(Error::Empty("ensemble"));
        }
        let p = d + 2;
        let scale = 1.0 / (d as f64).sqrt();
        let mut params = vec![0.0; n * p];
        for (i, chunk) in params.chunks_exact_mut(p).enumerate() {
            rng::fill_normals(seed, Tag::Init, 0, i as u64, chunk);
            for v in &mut chunk[..d] {
                *v *= scale;
            }
        }
        Ok(Self {
            d,
            params,
            time: 0.0,
            seed,
        })
    }

    pub fn width(&self) -> usize {
        self.params.len() / (self.d + 2)
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn param_dim(&self) -> usize {
        self.d + 2
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        let p = self.d + 2;
        &self.params[i * p..(i + 1) * p]
    }

    pub fn particles(&self) -> std::slice::ChunksExact<'_, f64> {
        self.params.chunks_exact(self.d + 2)
    }

    pub fn flat(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn point(&self, i: usize) -> ParameterPoint {
        ParameterPoint::from_flat(self.particle(i))
    }

    pub fn points(&self) -> Vec<ParameterPoint> {
        self.particles().map(ParameterPoint::from_flat).collect()
    }

    /// Network output at `x` without dimension checks.
    #[inline]
    pub(crate) fn eval_raw(&self, x: &[f64], spec: &ActivationSpec) -> f64 {
        let d = self.d;
        let sum: f64 = self
            .particles()
            .map(|p| p[d + 1] * spec.eval(dot(&p[..d], x) + p[d]))
            .sum();
        sum / self.width() as f64
    }
}

pub fn activation_eval(spec: &ActivationSpec, z: f64) -> f64 {
    spec.eval(z)
}

pub fn feature_eval(theta: &ParameterPoint, x: &[f64], spec: &ActivationSpec) -> Result<f64> {
    if x.len() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            got: x.len(),
        });
    }
    Ok(theta.a * spec.eval(dot(&theta.w, x) + theta.b))
}

pub fn network_eval(ens: &Ensemble, x: &[f64], spec: &ActivationSpec) -> Result<f64> {
    if x.len() != ens.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: ens.input_dim(),
            got: x.len(),
        });
    }
    Ok(ens.eval_raw(x, spec))
}

pub fn target_eval(t: &TargetSpec, x: &[f64]) -> Result<f64> {
    if x.len() != t.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: t.input_dim(),
            got: x.len(),
        });
    }
    Ok(t.eval_raw(x))
}
