//! The JSON experiment configuration: every section has defaults, unknown
//! keys are rejected, and [`ExperimentConfig::validate`] runs before any
//! computation.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dictionary::{RateParams, RateRegime};
use crate::dynamics::{DEFAULT_BATCH, DEFAULT_DT, DEFAULT_EVAL_SIZE};
use crate::error::{Error, Result};
use crate::model::{ActivationSpec, TargetSpec};
use crate::moments::InitSpec;
use crate::quotient::TableParams;
use crate::transport::DEFAULT_N_REF;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Couple,
    Moments,
    Dictionary,
    Invariants,
    Decompose,
    Rates,
    Floor,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Couple => "couple",
            ExperimentKind::Moments => "moments",
            ExperimentKind::Dictionary => "dictionary",
            ExperimentKind::Invariants => "invariants",
            ExperimentKind::Decompose => "decompose",
            ExperimentKind::Rates => "rates",
            ExperimentKind::Floor => "floor",
        }
    }
}

fn default_activation() -> ActivationSpec {
    ActivationSpec::relu()
}

fn default_target() -> TargetSpec {
    TargetSpec::linear(vec![1.0, 1.0]).expect("valid default target")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default = "default_activation")]
    pub activation: ActivationSpec,
    #[serde(default = "default_target")]
    pub target: TargetSpec,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    #[serde(default)]
    pub grids: GridsSection,
    #[serde(default)]
    pub decompose: DecomposeSection,
    #[serde(default)]
    pub moments: MomentsSection,
    #[serde(default)]
    pub dictionary: DictionarySection,
    #[serde(default)]
    pub invariants: TableParams,
    #[serde(default)]
    pub rates: RatesSection,
    #[serde(default)]
    pub floor: FloorSection,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsMode {
    Population,
    Empirical,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSection {
    pub lambda: f64,
    pub dt: f64,
    pub horizon: f64,
    pub width: usize,
    pub mode: DynamicsMode,
    pub batch_size: usize,
    /// Dataset size in empirical mode.
    pub samples: usize,
    pub label_noise: f64,
    pub snapshot_every: u64,
    pub risk_every: u64,
    pub eval_size: usize,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            dt: DEFAULT_DT,
            horizon: 0.5,
            width: 256,
            mode: DynamicsMode::Population,
            batch_size: DEFAULT_BATCH,
            samples: 1024,
            label_noise: 0.0,
            snapshot_every: 0,
            risk_every: 10,
            eval_size: DEFAULT_EVAL_SIZE,
        }
    }
}

impl DynamicsSection {
    pub fn steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridsSection {
    /// Widths of the coupling experiment.
    pub widths: Vec<usize>,
    pub reps: u32,
    pub n_ref: usize,
    pub record_every: u64,
    /// Times at which the optimization run records its risk.
    pub times: Vec<f64>,
    pub n_large: usize,
    /// Sample sizes of the statistical experiment.
    pub samples: Vec<usize>,
    pub stat_width: usize,
    pub stat_horizon: f64,
    pub stat_reps: u32,
    pub stat_label_noise: f64,
    pub twin_batch: usize,
    /// Regularization levels of the sparse experiment.
    pub lambdas: Vec<f64>,
}

impl Default for GridsSection {
    fn default() -> Self {
        Self {
            widths: vec![16, 32, 64, 128, 256],
            reps: 8,
            n_ref: DEFAULT_N_REF,
            record_every: 10,
            times: (1..=32).map(|k| 0.25 * k as f64).collect(),
            n_large: crate::harness::DEFAULT_N_LARGE,
            samples: vec![256, 512, 1024, 2048, 4096, 8192],
            stat_width: 128,
            stat_horizon: 5.0,
            stat_reps: 8,
            stat_label_noise: 2.0,
            twin_batch: 2048,
            lambdas: (0..8).map(|k| 0.2 * 0.5f64.powi(k)).collect(),
        }
    }
}

/// Which components the decomposition runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecomposeSection {
    pub poc: bool,
    pub opt: bool,
    pub stat: bool,
    pub sparse: bool,
}

impl Default for DecomposeSection {
    fn default() -> Self {
        Self {
            poc: true,
            opt: true,
            stat: true,
            sparse: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentsSection {
    /// Initial law; defaults to the μP law on the target's input dimension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSpec>,
    pub n_max: u32,
    /// Candidate weights `w̃(1..=n_max)` for the maximality check; `≡ 1`
    /// when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Orders whose empirical weighted moments are reported.
    pub empirical_orders: u32,
    /// Track the empirical moments along a run every this many steps
    /// (0: the initial sample only).
    pub track_every: u64,
}

impl Default for MomentsSection {
    fn default() -> Self {
        Self {
            init: None,
            n_max: 12,
            weights: None,
            empirical_orders: 4,
            track_every: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionSource {
    /// The one-dimensional link of the target.
    Target,
    Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleChoice {
    /// Piecewise rule for functions with kinks, Gauss–Hermite otherwise.
    Auto,
    Hermite,
    Piecewise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DictionarySection {
    pub source: ExpansionSource,
    /// Explicit coefficients; overrides `source` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    pub order: usize,
    pub rule: RuleChoice,
    pub nodes: usize,
    pub panel: f64,
    pub c_sigma: f64,
}

impl Default for DictionarySection {
    fn default() -> Self {
        Self {
            source: ExpansionSource::Target,
            coefficients: None,
            order: crate::dictionary::DEFAULT_ORDER,
            rule: RuleChoice::Auto,
            nodes: crate::dictionary::DEFAULT_NODES,
            panel: 0.25,
            c_sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulePoint {
    pub width: f64,
    pub samples: f64,
    pub horizon: f64,
    pub lambda: f64,
    pub alpha_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesSection {
    pub regime: RateRegime,
    pub params: RateParams,
    /// Points of a schedule to check against the compatibility clauses.
    pub schedule: Vec<SchedulePoint>,
}

impl Default for RatesSection {
    fn default() -> Self {
        Self {
            regime: RateRegime::Balanced,
            params: RateParams {
                width: 1024.0,
                samples: 8192.0,
                horizon: 20.0,
                lambda: 0.05,
                depth: 2.0,
                d_eff: 1.0,
                d_orb: 1.0,
                alpha_hat: 0.05,
                kappa: 0.0,
                c_sigma: 1.0,
                mult_sigma: 1,
            },
            schedule: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FloorSection {
    pub k: u32,
    pub m: u32,
    pub d: usize,
    pub width: usize,
    pub lambda: f64,
    pub steps: u64,
    pub batch_size: usize,
    pub eval_size: usize,
}

impl Default for FloorSection {
    fn default() -> Self {
        Self {
            k: 2,
            m: 4,
            d: 2,
            width: 256,
            lambda: 0.01,
            steps: 4000,
            batch_size: DEFAULT_BATCH,
            eval_size: DEFAULT_EVAL_SIZE,
        }
    }
}

/// Acceptance windows attached to the reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub poc_slope: (f64, f64),
    pub poc_r2: f64,
    pub stat_slope: (f64, f64),
    pub stat_r2: f64,
    pub opt_r2: f64,
    pub dominance_slack: f64,
    pub moment_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            poc_slope: (-1.35, -0.65),
            poc_r2: 0.9,
            stat_slope: (-1.4, -0.5),
            stat_r2: 0.85,
            opt_r2: 0.8,
            dominance_slack: 1e-12,
            moment_ratio: 3.0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, "must be positive"))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(Error::invalid(name, "must be at least 1"))
    }
}

impl ExperimentConfig {
    /// Parses a config value, applying `key=value` overrides first.
    pub fn from_value(mut value: Value, overrides: &[String]) -> Result<Self> {
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| Error::invalid("config", e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", cfg.schema_version),
            ));
        }
        Ok(cfg)
    }

    /// Range checks for the sections `kind` reads.
    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        if let Some(k) = self.experiment {
            if k != kind {
                return Err(Error::invalid(
                    "experiment",
                    format!("config is for `{}`, not `{}`", k.name(), kind.name()),
                ));
            }
        }
        let dy = &self.dynamics;
        let needs_dynamics = matches!(
            kind,
            ExperimentKind::Simulate | ExperimentKind::Couple | ExperimentKind::Decompose | ExperimentKind::Moments
        );
        if needs_dynamics {
            positive("dynamics.lambda", dy.lambda)?;
            positive("dynamics.dt", dy.dt)?;
            positive("dynamics.horizon", dy.horizon)?;
            if dy.lambda * dy.dt >= 0.5 {
                return Err(Error::invalid("dynamics.dt", "lambda * dt must be below 0.5"));
            }
            if dy.steps() == 0 {
                return Err(Error::invalid("dynamics.horizon", "shorter than one step"));
            }
            at_least_one("dynamics.width", dy.width)?;
            at_least_one("dynamics.batch_size", dy.batch_size)?;
            at_least_one("dynamics.samples", dy.samples)?;
            at_least_one("dynamics.eval_size", dy.eval_size)?;
            if !(dy.label_noise >= 0.0 && dy.label_noise.is_finite()) {
                return Err(Error::invalid("dynamics.label_noise", "must be nonnegative"));
            }
        }
        let g = &self.grids;
        if matches!(kind, ExperimentKind::Couple | ExperimentKind::Decompose) {
            at_least_one("grids.reps", g.reps as usize)?;
            if let Some(&n) = g.widths.last() {
                if g.n_ref < 8 * n {
                    return Err(Error::invalid("grids.n_ref", format!("must be at least 8 * {n}")));
                }
            }
        }
        if kind == ExperimentKind::Decompose {
            at_least_one("grids.n_large", g.n_large)?;
            at_least_one("grids.stat_width", g.stat_width)?;
            at_least_one("grids.stat_reps", g.stat_reps as usize)?;
            at_least_one("grids.twin_batch", g.twin_batch)?;
            positive("grids.stat_horizon", g.stat_horizon)?;
            if !(g.stat_label_noise >= 0.0) {
                return Err(Error::invalid("grids.stat_label_noise", "must be nonnegative"));
            }
            if g.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                return Err(Error::invalid("grids.lambdas", "must be positive"));
            }
        }
        if kind == ExperimentKind::Dictionary {
            let d = &self.dictionary;
            positive("dictionary.c_sigma", d.c_sigma)?;
            positive("dictionary.panel", d.panel)?;
            at_least_one("dictionary.nodes", d.nodes)?;
            if g.lambdas.is_empty() || g.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                return Err(Error::invalid("grids.lambdas", "must be nonempty and positive"));
            }
        }
        if kind == ExperimentKind::Moments {
            let m = &self.moments;
            if m.n_max < 4 || m.n_max > crate::moments::MAX_ORDER {
                return Err(Error::invalid("moments.n_max", "must lie in 4..=64"));
            }
            if m.empirical_orders == 0 || m.empirical_orders > m.n_max {
                return Err(Error::invalid("moments.empirical_orders", "must lie in 1..=n_max"));
            }
        }
        if kind == ExperimentKind::Floor {
            let f = &self.floor;
            at_least_one("floor.d", f.d)?;
            at_least_one("floor.width", f.width)?;
            positive("floor.lambda", f.lambda)?;
            at_least_one("floor.steps", f.steps as usize)?;
        }
        Ok(())
    }
}

/// `a.b.c=value`: `value` is parsed as JSON, falling back to a string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::invalid("--set", format!("expected key=value, got `{spec}`")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::invalid("--set", format!("malformed key `{path}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::invalid(path, "parent is not an object"))?;
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| Error::invalid(path, "parent is not an object"))?
        .insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(v: Value) -> Result<ExperimentConfig> {
        ExperimentConfig::from_value(v, &[])
    }

    #[test]
    fn defaults_and_round_trip() {
        let cfg = parse(json!({"schema_version": 1})).unwrap();
        assert_eq!(cfg.dynamics.lambda, 0.05);
        let back = serde_json::to_value(&cfg).unwrap();
        assert_eq!(parse(back).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = parse(json!({"schema_version": 1, "dynamics": {"lamda": 0.1}})).unwrap_err();
        assert!(e.to_string().contains("lamda"));
        assert!(parse(json!({"schema_version": 1, "bogus": 1})).is_err());
        assert!(parse(json!({"schema_version": 2})).is_err());
        assert!(parse(json!({})).is_err());
    }

    #[test]
    fn overrides() {
        let cfg = ExperimentConfig::from_value(
            json!({"schema_version": 1}),
            &[
                "dynamics.lambda=0.2".into(),
                "grids.widths=[8,16,32,64]".into(),
                "activation.kind=tanh".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.dynamics.lambda, 0.2);
        assert_eq!(cfg.grids.widths, vec![8, 16, 32, 64]);
        assert_eq!(cfg.activation, ActivationSpec::tanh());
        let mut v = json!({"schema_version": 1});
        assert!(apply_override(&mut v, "novalue").is_err());
        assert!(apply_override(&mut v, "schema_version.x=1").is_err());
    }

    #[test]
    fn validation_names_the_key() {
        let cfg = ExperimentConfig::from_value(json!({"schema_version": 1}), &["dynamics.lambda=-1".into()]).unwrap();
        let e = cfg.validate(ExperimentKind::Simulate).unwrap_err();
        assert!(e.to_string().contains("lambda"));
        assert!(cfg.validate(ExperimentKind::Invariants).is_ok());
        let cfg = parse(json!({"schema_version": 1, "experiment": "couple"})).unwrap();
        assert!(cfg.validate(ExperimentKind::Floor).is_err());
    }
}
