//! Command-line entry point: one subcommand per experiment, each driven by a
//! JSON config with dotted-path overrides.
//!
//! Exit status 0 on success, 2 on invalid input, 3 on a numerical failure,
//! 1 on I/O errors.

pub mod config;
mod describe;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::dictionary::{self, GaussianRule, HermiteExpansion, RateRegime};
use crate::dynamics::{simulate, DynamicsConfig, GradientMode, SimulateOptions};
use crate::error::Error;
use crate::harness::{self, DecompositionReport, OptOptions, PocOptions, StatOptions, TrainOptions};
use crate::model::{sample_dataset, ActivationKind, DataLaw, Ensemble, TargetKind};
use crate::moments::{self, InitSpec, WeightSequence};
use crate::output::{fmt_f64, risk_csv, trajectory_csv};
use crate::quotient;
use crate::rng::derive_seed;
use crate::transport::CouplingRecord;

pub use config::{ExperimentConfig, ExperimentKind};
pub use describe::describe;

#[derive(Debug, Parser)]
#[command(name = "mflab", version, about = "Mean-field Langevin laboratory for two-layer networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the particle system and record snapshots and risk.
    Simulate(RunArgs),
    /// Synchronous-coupling experiment over a width grid.
    Couple(RunArgs),
    /// Moment growth, reciprocal weights and maximality checks.
    Moments(RunArgs),
    /// Hermite expansion and thresholding of a link or activation.
    Dictionary(RunArgs),
    /// The architecture invariant table.
    Invariants(RunArgs),
    /// The four-component error decomposition.
    Decompose(RunArgs),
    /// Rate calculators and schedule checks.
    Rates(RunArgs),
    /// Non-realizability floor of monomial networks.
    Floor(RunArgs),
    /// Explain what an experiment exercises.
    Describe {
        #[arg(value_enum)]
        kind: ExperimentKind,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON config; defaults apply to everything it leaves out.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $MFLAB_OUT/<experiment>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; never changes the results.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Dotted-path override, e.g. `dynamics.lambda=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: 1,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_numerical() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

pub fn execute(command: &Command) -> CliResult<()> {
    let (kind, args) = match command {
        Command::Describe { kind } => {
            print!("{}", describe(*kind));
            return Ok(());
        }
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::Couple(a) => (ExperimentKind::Couple, a),
        Command::Moments(a) => (ExperimentKind::Moments, a),
        Command::Dictionary(a) => (ExperimentKind::Dictionary, a),
        Command::Invariants(a) => (ExperimentKind::Invariants, a),
        Command::Decompose(a) => (ExperimentKind::Decompose, a),
        Command::Rates(a) => (ExperimentKind::Rates, a),
        Command::Floor(a) => (ExperimentKind::Floor, a),
    };
    let dir = run(kind, args)?;
    println!("{}", dir.display());
    Ok(())
}

/// Loads and validates the config, runs the experiment and writes its
/// artifacts plus `manifest.json`; returns the output directory.
pub fn run(kind: ExperimentKind, args: &RunArgs) -> CliResult<PathBuf> {
    let started = Instant::now();
    let value = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::invalid("config", e.to_string()))?
        }
        None => json!({ "schema_version": config::SCHEMA_VERSION }),
    };
    let mut cfg = ExperimentConfig::from_value(value, &args.overrides)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate(kind)?;

    let dir = match (&args.out, &cfg.output_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => std::env::var_os("MFLAB_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("mflab-out"))
            .join(kind.name()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    let artifacts = pool.install(|| produce(kind, &cfg))?;

    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut files = Vec::new();
    for (name, body) in &artifacts {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        files.push(name.clone());
    }
    let canonical = serde_json::to_string(&cfg).map_err(|e| Error::invalid("config", e.to_string()))?;
    let hash: String = Sha256::digest(canonical.as_bytes())
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
    let manifest = json!({
        "experiment": kind.name(),
        "config_sha256": hash,
        "seed": cfg.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "files": files,
        "config": cfg,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
    });
    let path = dir.join("manifest.json");
    std::fs::write(&path, pretty(&manifest)?).map_err(|e| CliError::io(&path, e))?;
    Ok(dir)
}

type Artifacts = Vec<(String, String)>;

fn pretty(v: &impl Serialize) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::invalid("output", e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn produce(kind: ExperimentKind, cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    match kind {
        ExperimentKind::Simulate => run_simulate(cfg),
        ExperimentKind::Couple => run_couple(cfg),
        ExperimentKind::Moments => run_moments(cfg),
        ExperimentKind::Dictionary => run_dictionary(cfg),
        ExperimentKind::Invariants => run_invariants(cfg),
        ExperimentKind::Decompose => run_decompose(cfg),
        ExperimentKind::Rates => run_rates(cfg),
        ExperimentKind::Floor => run_floor(cfg),
    }
}

fn dynamics_config(cfg: &ExperimentConfig, law: &DataLaw) -> CliResult<DynamicsConfig> {
    let dy = &cfg.dynamics;
    let gradient = match dy.mode {
        config::DynamicsMode::Population => GradientMode::Population {
            batch_size: dy.batch_size,
        },
        config::DynamicsMode::Empirical => {
            let data = sample_dataset(law, dy.samples, derive_seed(cfg.seed, &[crate::rng::Tag::Dataset as u64]))?;
            GradientMode::Empirical {
                dataset: std::sync::Arc::new(data),
            }
        }
        config::DynamicsMode::Disabled => GradientMode::Disabled,
    };
    let c = DynamicsConfig {
        lambda: dy.lambda,
        dt: dy.dt,
        steps: dy.steps(),
        gradient,
        seed: cfg.seed,
    };
    c.validate()?;
    Ok(c)
}

fn run_simulate(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let dy = &cfg.dynamics;
    let law = DataLaw::new(cfg.target.clone(), dy.label_noise)?;
    let dc = dynamics_config(cfg, &law)?;
    let init = Ensemble::mup_init(cfg.target.input_dim(), dy.width, cfg.seed)?;
    let opts = SimulateOptions {
        snapshot_every: dy.snapshot_every,
        risk_every: dy.risk_every,
        eval_size: dy.eval_size,
    };
    let tr = simulate(&init, &dc, &cfg.activation, &law, &opts)?;
    let last = tr.final_risk().expect("risk is recorded at the end");
    let summary = json!({
        "width": dy.width,
        "steps": dc.steps,
        "horizon": dc.horizon(),
        "final_risk": last.risk,
        "final_risk_stderr": last.mc_stderr,
        "initial_risk": tr.risk[0].risk,
    });
    let plot = "set datafile separator ','\nset logscale y\nset xlabel 't'\nset ylabel 'L2 risk'\n\
                plot 'risk.csv' every ::1 using 1:2 with lines title 'risk'\n";
    Ok(vec![
        ("trajectory.csv".into(), trajectory_csv(&tr)),
        ("risk.csv".into(), risk_csv(&tr)),
        ("simulate.json".into(), pretty(&summary)?),
        ("risk.gp".into(), plot.into()),
    ])
}

fn coupling_csv(records: &[CouplingRecord]) -> String {
    let mut out = String::from(CouplingRecord::csv_header());
    for r in records {
        r.write_csv_rows(&mut out);
    }
    out
}

fn poc_report(cfg: &ExperimentConfig) -> CliResult<(harness::PocReport, Value)> {
    let g = &cfg.grids;
    let opts = PocOptions {
        dt: cfg.dynamics.dt,
        batch_size: cfg.dynamics.batch_size,
        n_ref: g.n_ref,
        record_every: g.record_every,
        seed: cfg.seed,
        moment_order: 4,
    };
    let r = harness::estimate_e_poc(
        &cfg.activation,
        &cfg.target,
        cfg.dynamics.lambda,
        cfg.dynamics.horizon,
        &g.widths,
        g.reps,
        &opts,
    )?;
    let t = &cfg.tolerances;
    let violations: usize = r
        .records
        .iter()
        .map(|rec| rec.dominance_violations(t.dominance_slack).len())
        .sum();
    let verdict = json!({
        "slope_in_window": r.fit.slope >= t.poc_slope.0 && r.fit.slope <= t.poc_slope.1,
        "r2_ok": r.fit.r2 >= t.poc_r2,
        "dominance_violations": violations,
        "moment_ratio_ok": r.max_moment_ratio <= t.moment_ratio,
    });
    Ok((r, verdict))
}

fn run_couple(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let (r, verdict) = poc_report(cfg)?;
    let summary = json!({ "report": r, "verdict": verdict });
    let plot = "set datafile separator ','\nset logscale xy\nset xlabel 'N'\nset ylabel 'mean synchronous bound'\n\
                plot \"< grep '^poc,' couple_grid.csv\" using 2:3:4 with yerrorbars title 'T'\n";
    let mut grid = String::from("component,x,value,stderr\n");
    for p in &r.grid {
        let _ = writeln!(grid, "poc,{},{},{}", fmt_f64(p.x), fmt_f64(p.value), fmt_f64(p.stderr));
    }
    Ok(vec![
        ("coupling.csv".into(), coupling_csv(&r.records)),
        ("couple_grid.csv".into(), grid),
        ("couple.json".into(), pretty(&summary)?),
        ("couple.gp".into(), plot.into()),
    ])
}

/// Per-order terms `w(n)·(mean|θ|^{2n})^{1/(2n)}`.
fn weighted_terms(ens: &Ensemble, w: &WeightSequence, orders: u32) -> Vec<f64> {
    let radii: Vec<f64> = ens.particles().map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    (1..=orders)
        .map(|n| {
            if r_max == 0.0 {
                return 0.0;
            }
            let mean = radii.iter().map(|r| (r / r_max).powi(2 * n as i32)).sum::<f64>() / radii.len() as f64;
            w.get(n).unwrap() * r_max * mean.powf(1.0 / (2.0 * n as f64))
        })
        .collect()
}

fn run_moments(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let m = &cfg.moments;
    let d = cfg.target.input_dim();
    let init = m.init.clone().unwrap_or(InitSpec::Mup { d: d as u32 });
    let n_max = m.n_max;
    let wstar = WeightSequence::reciprocal_of_init(&init, n_max)?;
    let mut rows = Vec::new();
    let g0: Vec<f64> = (1..=n_max).map(|n| init.g0(n)).collect::<crate::Result<_>>()?;

    // The empirical columns need samples of the initial law, available for μP.
    let mut snapshots = Vec::new();
    if init == (InitSpec::Mup { d: d as u32 }) {
        let start = Ensemble::mup_init(d, cfg.dynamics.width, cfg.seed)?;
        if m.track_every > 0 {
            let law = DataLaw::new(cfg.target.clone(), cfg.dynamics.label_noise)?;
            let dc = dynamics_config(cfg, &law)?;
            let opts = SimulateOptions {
                snapshot_every: m.track_every,
                risk_every: 0,
                eval_size: 1,
            };
            snapshots = simulate(&start, &dc, &cfg.activation, &law, &opts)?.snapshots;
        } else {
            snapshots.push(start);
        }
    }
    let first = snapshots.first().map(|e| weighted_terms(e, &wstar, m.empirical_orders));
    for n in 1..=n_max {
        rows.push(moments::MomentRow {
            n,
            g0: g0[n as usize - 1],
            wstar: wstar.get(n).unwrap(),
            empirical_norm: first.as_ref().and_then(|t| t.get(n as usize - 1).copied()),
            time: 0.0,
        });
    }
    let mut max_ratio: f64 = 1.0;
    for ens in snapshots.iter().skip(1) {
        let terms = weighted_terms(ens, &wstar, m.empirical_orders);
        for (k, v) in terms.iter().enumerate() {
            rows.push(moments::MomentRow {
                n: k as u32 + 1,
                g0: g0[k],
                wstar: wstar.get(k as u32 + 1).unwrap(),
                empirical_norm: Some(*v),
                time: ens.time,
            });
        }
        let now = terms.iter().copied().fold(0.0, f64::max);
        let then = first.as_ref().unwrap().iter().copied().fold(0.0, f64::max);
        max_ratio = max_ratio.max(now / then);
    }

    let candidate = match &m.weights {
        Some(v) => WeightSequence::user(v.clone())?,
        None => WeightSequence::from_fn(n_max, |_| 1.0)?,
    };
    let witness_candidate = moments::maximality_witness(&candidate, &init, n_max)?;
    let witness_wstar = moments::maximality_witness(&wstar, &init, n_max)?;
    let mut sub = WeightSequence::reciprocal_of_init(&init, n_max)?;
    let (finite, c_w) = moments::check_submultiplicative(&mut sub, n_max / 2)?;
    let summary = json!({
        "init": init,
        "maximality_candidate": witness_candidate,
        "maximality_wstar": witness_wstar,
        "submultiplicative": { "finite": finite, "c_w": c_w, "orders": n_max / 2 },
        "max_weighted_norm_ratio": max_ratio,
    });
    Ok(vec![
        ("moments.csv".into(), moments::moments_csv(&rows)),
        ("moments.json".into(), pretty(&summary)?),
    ])
}

/// The expansion the dictionary and sparse experiments threshold, with the
/// function itself when one is available.
fn expansion(
    cfg: &ExperimentConfig,
) -> CliResult<(HermiteExpansion, Option<(Box<dyn Fn(f64) -> f64 + Send + Sync>, GaussianRule)>)> {
    let d = &cfg.dictionary;
    if let Some(c) = &d.coefficients {
        if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dictionary.coefficients", "must be nonempty and finite").into());
        }
        return Ok((HermiteExpansion::from_coefficients(c.clone()), None));
    }
    let (g, breaks): (Box<dyn Fn(f64) -> f64 + Send + Sync>, Option<Vec<f64>>) = match d.source {
        config::ExpansionSource::Target => {
            let (_, g) = cfg
                .target
                .link_1d()
                .ok_or_else(|| Error::invalid("target", "no one-dimensional link to expand"))?;
            let breaks = match cfg.target.kind() {
                TargetKind::PiecewiseLinear { hinges, .. } => Some(hinges.iter().map(|h| h.at).collect()),
                _ => None,
            };
            (g, breaks)
        }
        config::ExpansionSource::Activation => {
            let spec = cfg.activation;
            let breaks = match spec.kind {
                ActivationKind::Relu | ActivationKind::LeakyRelu { .. } => Some(vec![0.0]),
                _ => None,
            };
            (Box::new(move |z| spec.eval(z)), breaks)
        }
    };
    let rule = match (d.rule, breaks) {
        (config::RuleChoice::Hermite, _) | (config::RuleChoice::Auto, None) => GaussianRule::hermite(d.nodes)?,
        (config::RuleChoice::Piecewise, b) | (config::RuleChoice::Auto, b) => {
            GaussianRule::piecewise(&b.unwrap_or_default(), d.panel)?
        }
    };
    let exp = dictionary::expand_with(&g, d.order, &rule)?;
    Ok((exp, Some((g, rule))))
}

fn run_dictionary(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let d = &cfg.dictionary;
    let (exp, func) = expansion(cfg)?;
    let mult = cfg.activation.mult_sigma;
    let mut coeffs = String::from("m,coefficient\n");
    for (m, c) in exp.coefficients.iter().enumerate() {
        let _ = writeln!(coeffs, "{m},{}", fmt_f64(*c));
    }
    let mut table = String::from("lambda,kappa,s_up,retained,tail_energy,parseval_residual\n");
    let mut reports = Vec::new();
    for &lambda in &cfg.grids.lambdas {
        let t = dictionary::threshold(&exp, lambda, d.c_sigma, mult)?;
        let residual = match &func {
            Some((g, rule)) => fmt_f64(dictionary::parseval_residual(&exp, &t.retained, g, rule)?),
            None => String::new(),
        };
        let _ = writeln!(
            table,
            "{},{},{},{},{},{}",
            fmt_f64(lambda),
            fmt_f64(t.kappa),
            t.s_up,
            t.retained.len(),
            fmt_f64(t.tail_energy()),
            residual
        );
        reports.push(t);
    }
    let summary = json!({ "expansion": exp, "thresholds": reports });
    Ok(vec![
        ("coefficients.csv".into(), coeffs),
        ("threshold.csv".into(), table),
        ("dictionary.json".into(), pretty(&summary)?),
    ])
}

fn run_invariants(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let rows = quotient::invariant_table(&cfg.invariants)?;
    let factors = quotient::stat_factors(&cfg.invariants)?;
    let summary = json!({
        "params": cfg.invariants,
        "rows": rows,
        "stat_factors": factors.iter().map(|(k, v)| json!({"case": k, "factor": v})).collect::<Vec<_>>(),
    });
    Ok(vec![
        ("invariants.csv".into(), quotient::invariant_csv(&rows)),
        ("invariants.json".into(), pretty(&summary)?),
    ])
}

fn run_decompose(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let g = &cfg.grids;
    let t = &cfg.tolerances;
    let sel = &cfg.decompose;
    let lambda = cfg.dynamics.lambda;
    let mut report = DecompositionReport::default();
    let mut verdicts = serde_json::Map::new();
    let mut out: Artifacts = Vec::new();

    if sel.poc {
        let (r, v) = poc_report(cfg)?;
        out.push(("coupling.csv".into(), coupling_csv(&r.records)));
        verdicts.insert("poc".into(), v);
        report.poc = Some(r);
    }
    if sel.opt {
        let opts = OptOptions {
            dt: cfg.dynamics.dt,
            batch_size: cfg.dynamics.batch_size,
            seed: cfg.seed,
            eval_size: cfg.dynamics.eval_size,
            ..Default::default()
        };
        let r = harness::estimate_e_opt(&cfg.activation, &cfg.target, lambda, &g.times, g.n_large, &opts)?;
        verdicts.insert(
            "opt".into(),
            json!({
                "decays": r.alpha_hat.is_some(),
                "r2_ok": r.fit.map_or(false, |f| f.r2 >= t.opt_r2),
            }),
        );
        report.opt = Some(r);
    }
    if sel.stat {
        let opts = StatOptions {
            dt: cfg.dynamics.dt,
            twin_batch: g.twin_batch,
            label_noise: g.stat_label_noise,
            seed: cfg.seed,
            eval_size: cfg.dynamics.eval_size,
            ..Default::default()
        };
        let r = harness::estimate_e_stat(
            &cfg.activation,
            &cfg.target,
            lambda,
            g.stat_horizon,
            g.stat_width,
            &g.samples,
            g.stat_reps,
            &opts,
        )?;
        verdicts.insert(
            "stat".into(),
            json!({
                "slope_in_window": r.fit.map_or(false, |f| f.slope >= t.stat_slope.0 && f.slope <= t.stat_slope.1),
                "r2_ok": r.fit.map_or(false, |f| f.r2 >= t.stat_r2),
            }),
        );
        report.stat = Some(r);
    }
    if sel.sparse {
        let (exp, _) = expansion(cfg)?;
        report.sparse = Some(harness::estimate_e_sparse(
            &exp,
            &g.lambdas,
            cfg.dictionary.c_sigma,
            cfg.activation.mult_sigma,
        )?);
        // depth at the dynamics λ feeds the schedule check
        let depth = dictionary::threshold(&exp, lambda, cfg.dictionary.c_sigma, cfg.activation.mult_sigma)?.s_up;
        if let (Some(opt), Some(stat)) = (&report.opt, &report.stat) {
            if let Some(alpha) = opt.alpha_hat {
                let samples = stat.grid.last().map_or(1.0, |p| p.n as f64);
                let horizon = opt.grid.last().map_or(1.0, |p| p.time);
                report.schedule = Some(dictionary::schedule_check(
                    opt.n_large as f64,
                    samples,
                    horizon,
                    lambda,
                    alpha,
                    |_| depth.max(1) as f64,
                )?);
            }
        }
    }
    report.validate()?;
    report.components = report.components();
    if let Some(c) = &report.components {
        report.cross_terms = Some(harness::cross_term_report(c)?);
    }
    let csv = report.to_csv();
    let mut json_out: Value = serde_json::to_value(&report).map_err(|e| Error::invalid("report", e.to_string()))?;
    json_out["verdicts"] = Value::Object(verdicts);
    out.push(("decomposition.json".into(), pretty(&json_out)?));
    out.push(("decomposition.csv".into(), csv));
    out.push(("decomposition.gp".into(), report.plot_script("decomposition.csv")));
    Ok(out)
}

fn run_rates(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let r = &cfg.rates;
    let p = &r.params;
    let report = dictionary::predicted_rates(r.regime, p)?;
    let depth_of = |lambda: f64| -> crate::Result<f64> {
        match r.regime {
            RateRegime::SigmoidExp { a, tau } => {
                dictionary::exp_tail_depth_bound(a, tau, p.c_sigma, lambda, p.mult_sigma)
            }
            _ => Ok(p.depth),
        }
    };
    let mut csv = String::from("width,samples,horizon,lambda,alpha_hat,entropy_horizon,statistical,contraction,all_pass\n");
    let mut verdicts = Vec::new();
    for s in &r.schedule {
        let depth = depth_of(s.lambda)?;
        let v = dictionary::schedule_check(s.width, s.samples, s.horizon, s.lambda, s.alpha_hat, |_| depth)?;
        let _ = write!(
            csv,
            "{},{},{},{},{}",
            fmt_f64(s.width),
            fmt_f64(s.samples),
            fmt_f64(s.horizon),
            fmt_f64(s.lambda),
            fmt_f64(s.alpha_hat)
        );
        for c in &v.clauses {
            let _ = write!(csv, ",{}", fmt_f64(c.ratio));
        }
        let _ = writeln!(csv, ",{}", v.all_pass);
        verdicts.push(v);
    }
    let summary = json!({ "rates": report, "schedule": verdicts });
    Ok(vec![
        ("rates.json".into(), pretty(&summary)?),
        ("schedule.csv".into(), csv),
    ])
}

fn run_floor(cfg: &ExperimentConfig) -> CliResult<Artifacts> {
    let f = &cfg.floor;
    let opts = TrainOptions {
        width: f.width,
        lambda: f.lambda,
        dt: cfg.dynamics.dt,
        steps: f.steps,
        batch_size: f.batch_size,
        seed: cfg.seed,
        eval_size: f.eval_size,
    };
    let r = harness::nonrealizability_floor(f.k, f.m, f.d, &opts)?;
    Ok(vec![("floor.json".into(), pretty(&r)?)])
}
