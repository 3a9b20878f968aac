//! Command-line front end: `validate`, `simulate`, `sweep`, `fixed-point`.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::analysis::{
    bias_fixed_point, bias_fixed_point_integral, check_zero_bias_condition, local_bounds, step_size_limit_contraction,
    step_size_limit_contraction_from_bounds, step_size_limit_mss_from_bounds, CurvatureSource, PerformanceReport, SteadyStateOptions,
};
use crate::config::{Experiment, ExperimentConfig, StrategyKind};
use crate::costs::network_noise_envelope;
use crate::error::{Error, Result};
use crate::operators::{aggregate_bounds, BlockVector};
use crate::strategies::{noise_free_limit, run_monte_carlo, solve_reference_optimum, to_db, LearningCurve};
use crate::topology::{is_regular, left_perron_vector, validate_combination_set, StepSizeProfile};

/// Newton tolerance for `w^o`.
const OPTIMUM_TOL: f64 = 1e-13;
/// Gauss–Legendre nodes for the integral-form bias.
const QUADRATURE_NODES: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "pareto-diffusion", version, about = "Diffusion strategies for multi-objective optimization over networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Monte Carlo seed; overrides `simulation.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo runs; overrides `simulation.runs`.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Only print errors.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check topology, combination matrices and step sizes.
    Validate,
    /// Monte Carlo learning curves for every configured strategy.
    Simulate,
    /// Simulated and predicted steady state over the step-size sweep.
    Sweep,
    /// Noise-free limits and their distance to the Pareto solution.
    FixedPoint,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_VALIDATION
    }
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.simulation.seed = s;
    }
    if let Some(r) = cli.runs {
        cfg.simulation.runs = r;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = resolve_config(&cli).and_then(|cfg| match cli.command {
        Command::Validate => {
            let report = cmd_validate(&cfg);
            if !cli.quiet || !report.passed() {
                print!("{report}");
            }
            Ok(if report.passed() { EXIT_OK } else { EXIT_VALIDATION })
        }
        Command::Simulate => cmd_simulate(&cfg).map(|s| finish(&s, cli.quiet)),
        Command::Sweep => cmd_sweep(&cfg).map(|s| finish(&s, cli.quiet)),
        Command::FixedPoint => cmd_fixed_point(&cfg).map(|s| finish(&s, cli.quiet)),
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn finish(summary: &RunSummary, quiet: bool) -> i32 {
    if !quiet {
        for line in &summary.lines {
            println!("{line}");
        }
        for f in &summary.files {
            println!("wrote {}", f.display());
        }
    }
    for e in &summary.errors {
        eprintln!("error: {e}");
    }
    summary.exit_code
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Warn => "WARN",
            CheckStatus::Fail => "FAIL",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, name: impl Into<String>, status: CheckStatus, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            status,
            detail: detail.into(),
        });
    }

    /// No hard failures.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", c.status, c.name, c.detail)?;
        }
        Ok(())
    }
}

fn pass_or(ok: bool, fail: CheckStatus) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        fail
    }
}

/// Every check the configuration can fail, without running simulations.
/// Step-size conditions are evaluated with the Hessian range at `w^o`; the
/// global envelopes of barrier-penalized costs are far too loose to admit
/// the usual step sizes and are reported as warnings only.
pub fn cmd_validate(cfg: &ExperimentConfig) -> ValidationReport {
    use CheckStatus::*;
    let mut rep = ValidationReport::default();
    let exp = match cfg.build::<f64>() {
        Ok(e) => {
            rep.push("connectivity", Pass, format!("{} nodes, {} edges", e.topology.n_nodes(), e.topology.edges().len()));
            e
        }
        Err(e @ Error::Disconnected(_)) => {
            rep.push("connectivity", Fail, e.to_string());
            return rep;
        }
        Err(e) => {
            rep.push("configuration", Fail, e.to_string());
            return rep;
        }
    };
    let diffusion: Vec<StrategyKind> = cfg.simulation.strategies.iter().copied().filter(|s| s.is_diffusion()).collect();
    for &kind in &diffusion {
        let set = exp.combination_set(kind).expect("diffusion strategy");
        let violations = validate_combination_set(&set, &exp.topology);
        let detail = if violations.is_empty() {
            "A1, A2 left-stochastic, C right-stochastic, all supported on the graph".to_string()
        } else {
            violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
        };
        rep.push(format!("combination matrices ({})", kind.name()), pass_or(violations.is_empty(), Fail), detail);
        let p = &set.a1 * &set.a2;
        rep.push(
            format!("primitivity ({})", kind.name()),
            pass_or(is_regular(&p), Fail),
            "A1 A2 must be primitive (some power entrywise positive)",
        );
    }
    if cfg.simulation.strategies.contains(&StrategyKind::Consensus) {
        let set = crate::topology::CombinationSet::cta(exp.a.clone());
        let violations = validate_combination_set(&set, &exp.topology);
        rep.push(
            "combination matrices (consensus)",
            pass_or(violations.is_empty(), Fail),
            if violations.is_empty() { "A left-stochastic on the graph".to_string() } else { violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ") },
        );
    }
    let declared: Vec<(f64, f64)> = exp.costs.iter().map(|c| c.hessian_bounds()).collect();
    let (lo, _) = aggregate_bounds(&exp.c, &declared);
    let bad: Vec<String> = lo.iter().enumerate().filter(|(_, s)| !(**s > 0.0)).map(|(k, s)| format!("node {k}: {s:e}")).collect();
    rep.push(
        "strong convexity",
        pass_or(bad.is_empty(), Fail),
        if bad.is_empty() { "σ_k,min = Σ_l c_lk λ_l,min > 0 at every node".to_string() } else { format!("σ_k,min = Σ_l c_lk λ_l,min must be positive; {}", bad.join(", ")) },
    );
    let w_o = match solve_reference_optimum(&exp.costs, OPTIMUM_TOL) {
        Ok(w) => {
            rep.push("reference optimum", Pass, format!("w^o = {}", fmt_vec(&w)));
            w
        }
        Err(e) => {
            rep.push("reference optimum", Fail, e.to_string());
            return rep;
        }
    };
    let local = local_bounds(&exp.costs, &w_o);
    let mut profiles: Vec<(String, StepSizeProfile<f64>)> = Vec::new();
    if let Ok(p) = cfg.step_profile::<f64>() {
        profiles.push(("μ".into(), p));
    }
    if let Some(&top) = cfg.step_sizes.sweep.last() {
        if let Ok(p) = StepSizeProfile::uniform(exp.costs.len(), top) {
            profiles.push((format!("sweep maximum μ = {top:e}"), p));
        }
    }
    let alpha = network_noise_envelope(&exp.costs).alpha;
    for (label, mu) in &profiles {
        let limit = step_size_limit_contraction_from_bounds(&local, &exp.c);
        let over = violations(mu, &limit);
        rep.push(
            format!("step sizes, contraction ({label})"),
            pass_or(over.is_empty(), Fail),
            if over.is_empty() { "0 < μ_k < 2/σ_{k,max} at every node (Hessian range at w^o)".to_string() } else { format!("0 < μ_k < 2/σ_{{k,max}} violated: {}", over.join(", ")) },
        );
        let declared_over = violations(mu, &step_size_limit_contraction(&exp.costs, &exp.c));
        rep.push(
            format!("step sizes, global envelope ({label})"),
            pass_or(declared_over.is_empty(), Warn),
            if declared_over.is_empty() { "0 < μ_k < 2/σ_{k,max} with the declared Hessian envelopes".to_string() } else { format!("0 < μ_k < 2/σ_{{k,max}} not guaranteed by the declared envelopes: {}", declared_over.join(", ")) },
        );
        let mss = step_size_limit_mss_from_bounds(&local, &exp.c, alpha);
        let mss_over = violations(mu, &mss);
        rep.push(
            format!("step sizes, mean-square ({label})"),
            pass_or(mss_over.is_empty(), Warn),
            if mss_over.is_empty() { "μ_k < min{σ_max/(σ_max²+D), σ_min/(σ_min²+D)}, D = 4αλ_max²‖C‖₁²".to_string() } else { format!("μ_k < min{{σ_max/(σ_max²+D), σ_min/(σ_min²+D)}} not met, the MSP bound does not apply: {}", mss_over.join(", ")) },
        );
    }
    if let Some((_, mu)) = profiles.first() {
        for &kind in &diffusion {
            let set = exp.combination_set(kind).expect("diffusion strategy");
            let p = &set.a1 * &set.a2;
            match left_perron_vector(&p.transpose()) {
                Ok(theta) => {
                    let z = check_zero_bias_condition(&theta, &set.a2, &mu.omega(), &set.c);
                    rep.push(
                        format!("zero-bias condition ({})", kind.name()),
                        pass_or(z.holds, Warn),
                        match z.c0 {
                            Some(c0) => format!("θᵀA2ᵀΩCᵀ = c0 𝟙ᵀ with c0 = {c0:e}; bias is O(μ_max²)"),
                            None => "θᵀA2ᵀΩCᵀ is not a multiple of 𝟙ᵀ; bias may be O(μ_max)".to_string(),
                        },
                    );
                }
                Err(e) => rep.push(format!("zero-bias condition ({})", kind.name()), Warn, e.to_string()),
            }
        }
    }
    rep
}

fn violations(mu: &StepSizeProfile<f64>, limit: &[f64]) -> Vec<String> {
    (0..mu.len())
        .filter(|&k| !(mu.get(k) < limit[k]))
        .map(|k| format!("node {k}: μ = {:e} ≥ {:e}", mu.get(k), limit[k]))
        .collect()
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Files written and lines to print.
#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
    /// Per-item failures that did not stop the command.
    pub errors: Vec<String>,
    pub exit_code: i32,
}

fn header(cfg: &ExperimentConfig, command: &str, extra: &[(&str, String)]) -> Result<String> {
    let mut h = format!("# pareto-diffusion {command}\n# config_sha256: {}\n", cfg.hash()?);
    for (k, v) in extra {
        h.push_str(&format!("# {k}: {v}\n"));
    }
    Ok(h)
}

fn write_file(path: &Path, header: &str, body: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(header.as_bytes())?;
    f.write_all(body)?;
    Ok(())
}

fn csv_bytes(rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn prepare(cfg: &ExperimentConfig) -> Result<(Experiment<f64>, DVector<f64>)> {
    let exp = cfg.build::<f64>()?;
    let w_o = solve_reference_optimum(&exp.costs, OPTIMUM_TOL)?;
    fs::create_dir_all(&cfg.output.dir)?;
    Ok((exp, w_o))
}

fn predict(exp: &Experiment<f64>, kind: StrategyKind, mu: &StepSizeProfile<f64>, w_o: &DVector<f64>, noise: bool) -> Result<PerformanceReport> {
    let set = exp.combination_set(kind).ok_or_else(|| Error::InvalidParameter(format!("no closed-form analysis for {}", kind.name())))?;
    let opts = SteadyStateOptions {
        with_noise: noise,
        ..SteadyStateOptions::default()
    };
    PerformanceReport::compute(kind.name(), &exp.costs, &set, mu, w_o, CurvatureSource::Local, opts)
}

fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// Learning curves per strategy, a merged comparison table, a steady-state
/// summary and, for diffusion strategies, the analytical report.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let (exp, w_o) = prepare(cfg)?;
    let mu = cfg.step_profile::<f64>()?;
    let reference = BlockVector::replicate(&w_o, exp.costs.len());
    let dir = &cfg.output.dir;
    let mut out = RunSummary::default();
    let mut curves: Vec<LearningCurve> = Vec::new();
    let mut summary = vec![vec![
        "strategy".to_string(),
        "steady_state_mse".into(),
        "steady_state_mse_db".into(),
        "steady_state_se".into(),
        "predicted_mse_db".into(),
        "error".into(),
    ]];
    for &kind in &cfg.simulation.strategies {
        let sc = exp.strategy_config(kind, mu.clone(), &cfg.simulation);
        let curve = run_monte_carlo(&sc, &exp.costs, &reference)?;
        let mut body = Vec::new();
        curve.write_csv(&mut body)?;
        let path = dir.join(format!("learning_{}.csv", kind.name()));
        let h = header(
            cfg,
            "simulate",
            &[("strategy", kind.name().into()), ("runs", curve.runs.to_string()), ("mu_max", fmt_num(mu.mu_max()))],
        )?;
        write_file(&path, &h, &body)?;
        out.files.push(path);
        let (predicted, error) = if kind.is_diffusion() {
            match predict(&exp, kind, &mu, &w_o, cfg.simulation.noise) {
                Ok(r) => {
                    let path = dir.join(format!("performance_{}.toml", kind.name()));
                    write_file(&path, &header(cfg, "simulate", &[])?, r.to_text()?.as_bytes())?;
                    out.files.push(path);
                    (Some(r.network_mse_db), String::new())
                }
                Err(e) => (None, e.to_string()),
            }
        } else {
            (None, String::new())
        };
        out.lines.push(format!(
            "{:<12} steady-state MSE {:>9.3} dB{}",
            kind.name(),
            curve.steady_state_db(),
            predicted.map(|p| format!(" (predicted {p:.3} dB)")).unwrap_or_default()
        ));
        summary.push(vec![
            kind.name().into(),
            fmt_num(curve.steady_state_mse),
            fmt_num(curve.steady_state_db()),
            fmt_num(curve.steady_state_se),
            opt_num(predicted),
            error,
        ]);
        curves.push(curve);
    }
    let mut rows = vec![std::iter::once("iteration".to_string())
        .chain(curves.iter().map(|c| format!("{}_mse_db", c.strategy)))
        .collect::<Vec<_>>()];
    for i in 0..cfg.simulation.horizon {
        rows.push(
            std::iter::once((i + 1).to_string())
                .chain(curves.iter().map(|c| fmt_num(to_db(c.network_mse[i]))))
                .collect(),
        );
    }
    let h = header(cfg, "simulate", &[("mu_max", fmt_num(mu.mu_max()))])?;
    let path = dir.join("comparison.csv");
    write_file(&path, &h, &csv_bytes(&rows)?)?;
    out.files.push(path);
    let path = dir.join("steady_state.csv");
    write_file(&path, &h, &csv_bytes(&summary)?)?;
    out.files.push(path);
    Ok(out)
}

/// One row of the sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub mu: f64,
    pub strategy: String,
    pub simulated_mse: Option<f64>,
    pub simulated_se: Option<f64>,
    pub predicted_mse: Option<f64>,
    /// `(1/N)‖w̃_∞‖²` from the closed form.
    pub bias_power: Option<f64>,
    /// `(1/N)‖𝟙⊗w^o − w_∞‖²` from noise-free iteration.
    pub fixed_point_power: Option<f64>,
    pub error: String,
}

pub const SWEEP_COLUMNS: [&str; 11] = [
    "mu",
    "strategy",
    "simulated_mse",
    "simulated_mse_db",
    "simulated_se",
    "predicted_mse",
    "predicted_mse_db",
    "bias_power",
    "bias_power_db",
    "fixed_point_power_db",
    "error",
];

impl SweepRow {
    fn record(&self) -> Vec<String> {
        vec![
            fmt_num(self.mu),
            self.strategy.clone(),
            opt_num(self.simulated_mse),
            opt_num(self.simulated_mse.map(to_db)),
            opt_num(self.simulated_se),
            opt_num(self.predicted_mse),
            opt_num(self.predicted_mse.map(to_db)),
            opt_num(self.bias_power),
            opt_num(self.bias_power.map(to_db)),
            opt_num(self.fixed_point_power.map(to_db)),
            self.error.clone(),
        ]
    }

    /// Parses the table written by `sweep`; `#` lines are skipped.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| Error::Config(format!("bad number `{s}`: {e}")))
            }
        };
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            rows.push(SweepRow {
                mu: num(&rec[0])?.unwrap_or(f64::NAN),
                strategy: rec[1].to_string(),
                simulated_mse: num(&rec[2])?,
                simulated_se: num(&rec[4])?,
                predicted_mse: num(&rec[5])?,
                bias_power: num(&rec[7])?,
                fixed_point_power: num(&rec[9])?.map(|db| 10f64.powf(db / 10.0)),
                error: rec[10].to_string(),
            });
        }
        Ok(rows)
    }
}

fn sweep_point(cfg: &ExperimentConfig, exp: &Experiment<f64>, w_o: &DVector<f64>, kind: StrategyKind, mu_value: f64) -> SweepRow {
    let n = exp.costs.len();
    let mut row = SweepRow {
        mu: mu_value,
        strategy: kind.name().into(),
        simulated_mse: None,
        simulated_se: None,
        predicted_mse: None,
        bias_power: None,
        fixed_point_power: None,
        error: String::new(),
    };
    let mut errors = Vec::new();
    let mu = match StepSizeProfile::uniform(n, mu_value) {
        Ok(m) => m,
        Err(e) => {
            row.error = e.to_string();
            return row;
        }
    };
    let sc = exp.strategy_config(kind, mu.clone(), &cfg.simulation);
    let reference = BlockVector::replicate(w_o, n);
    match run_monte_carlo(&sc, &exp.costs, &reference) {
        Ok(c) => {
            row.simulated_mse = Some(c.steady_state_mse);
            row.simulated_se = Some(c.steady_state_se);
        }
        Err(e) => errors.push(format!("simulation: {e}")),
    }
    let x0 = BlockVector::zeros(n, w_o.len());
    match noise_free_limit(&sc, &exp.costs, &x0, cfg.simulation.fixed_point_tol, cfg.simulation.fixed_point_max_iters) {
        Ok((w, _)) => row.fixed_point_power = Some(fixed_point_error(&w, &reference).norm_squared() / n as f64),
        Err(e) => errors.push(format!("fixed point: {e}")),
    }
    if kind.is_diffusion() {
        match predict(exp, kind, &mu, w_o, cfg.simulation.noise) {
            Ok(r) => row.predicted_mse = Some(r.network_mse),
            Err(e) => errors.push(format!("prediction: {e}")),
        }
        let set = exp.combination_set(kind).expect("diffusion strategy");
        match bias_fixed_point_integral(&exp.costs, &set, &mu, w_o, QUADRATURE_NODES) {
            Ok(b) => row.bias_power = Some(b.norm_squared() / n as f64),
            Err(e) => errors.push(format!("bias: {e}")),
        }
    }
    row.error = errors.join("; ");
    row
}

/// `𝟙 ⊗ w^o − w_∞`.
fn fixed_point_error(w: &BlockVector<f64>, reference: &BlockVector<f64>) -> DVector<f64> {
    reference.as_vector() - w.as_vector()
}

/// Every strategy at every swept step size. Failures at one point land in
/// the `error` column and the sweep carries on.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let (exp, w_o) = prepare(cfg)?;
    let jobs: Vec<(f64, StrategyKind)> = cfg
        .step_sizes
        .sweep
        .iter()
        .flat_map(|&m| cfg.simulation.strategies.iter().map(move |&k| (m, k)))
        .collect();
    let rows: Vec<SweepRow> = jobs.par_iter().map(|&(m, k)| sweep_point(cfg, &exp, &w_o, k, m)).collect();
    let mut out = RunSummary::default();
    let mut table = vec![SWEEP_COLUMNS.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for r in &rows {
        table.push(r.record());
        if !r.error.is_empty() {
            out.errors.push(format!("μ = {:e}, {}: {}", r.mu, r.strategy, r.error));
        }
        out.lines.push(format!(
            "μ = {:<10.3e} {:<12} simulated {:>9} dB  predicted {:>9} dB  bias {:>9} dB",
            r.mu,
            r.strategy,
            r.simulated_mse.map(|v| format!("{:.3}", to_db(v))).unwrap_or_else(|| "-".into()),
            r.predicted_mse.map(|v| format!("{:.3}", to_db(v))).unwrap_or_else(|| "-".into()),
            r.bias_power.or(r.fixed_point_power).map(|v| format!("{:.3}", to_db(v))).unwrap_or_else(|| "-".into()),
        ));
    }
    let path = cfg.output.dir.join("sweep.csv");
    write_file(&path, &header(cfg, "sweep", &[("runs", cfg.simulation.runs.to_string())])?, &csv_bytes(&table)?)?;
    out.files.push(path);
    if rows.iter().any(|r| !r.error.is_empty()) {
        out.exit_code = EXIT_NUMERICAL;
    }
    Ok(out)
}

/// Noise-free limit of one strategy and, for diffusion, the closed form.
#[derive(Clone, Debug)]
pub struct FixedPointResult {
    pub strategy: String,
    pub iterations: usize,
    pub limit: BlockVector<f64>,
    /// `𝟙 ⊗ w^o − w_∞` from iteration.
    pub error: DVector<f64>,
    /// `(1/N)‖𝟙 ⊗ w^o − w_∞‖²`.
    pub error_power: f64,
    /// Closed form with `R_∞` in integral form.
    pub formula: Option<DVector<f64>>,
    /// Closed form with Hessians at `w^o`.
    pub formula_small_bias: Option<DVector<f64>>,
}

impl FixedPointResult {
    fn relative(&self, f: &Option<DVector<f64>>) -> Option<f64> {
        f.as_ref().map(|f| (&self.error - f).norm() / f.norm().max(f64::MIN_POSITIVE))
    }

    /// `‖w̃_iter − w̃_formula‖ / ‖w̃_formula‖`.
    pub fn relative_agreement(&self) -> Option<f64> {
        self.relative(&self.formula)
    }

    pub fn relative_agreement_small_bias(&self) -> Option<f64> {
        self.relative(&self.formula_small_bias)
    }
}

pub fn fixed_point_for(
    cfg: &ExperimentConfig,
    exp: &Experiment<f64>,
    w_o: &DVector<f64>,
    kind: StrategyKind,
    mu: &StepSizeProfile<f64>,
) -> Result<FixedPointResult> {
    let n = exp.costs.len();
    let sc = exp.strategy_config(kind, mu.clone(), &cfg.simulation);
    let x0 = BlockVector::zeros(n, w_o.len());
    let (limit, iterations) = noise_free_limit(&sc, &exp.costs, &x0, cfg.simulation.fixed_point_tol, cfg.simulation.fixed_point_max_iters)?;
    let reference = BlockVector::replicate(w_o, n);
    let error = fixed_point_error(&limit, &reference);
    let (formula, formula_small_bias) = match exp.combination_set(kind) {
        Some(set) => (
            Some(bias_fixed_point_integral(&exp.costs, &set, mu, w_o, QUADRATURE_NODES)?),
            Some(bias_fixed_point(&exp.costs, &set.a1, &set.a2, &set.c, mu, w_o)?),
        ),
        None => (None, None),
    };
    Ok(FixedPointResult {
        strategy: kind.name().into(),
        iterations,
        error_power: error.norm_squared() / n as f64,
        limit,
        error,
        formula,
        formula_small_bias,
    })
}

/// Per-node limits and error powers for every strategy.
pub fn cmd_fixed_point(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let (exp, w_o) = prepare(cfg)?;
    let mu = cfg.step_profile::<f64>()?;
    let m = w_o.len();
    let results: Vec<(StrategyKind, Result<FixedPointResult>)> = cfg
        .simulation
        .strategies
        .par_iter()
        .map(|&k| (k, fixed_point_for(cfg, &exp, &w_o, k, &mu)))
        .collect();
    let mut out = RunSummary::default();
    let mut nodes = vec![["strategy", "node", "error_power"]
        .iter()
        .map(|s| s.to_string())
        .chain((0..m).map(|i| format!("w_{i}")))
        .collect::<Vec<_>>()];
    let mut summary = vec![[
        "strategy",
        "iterations",
        "error_power",
        "error_power_db",
        "formula_error_power",
        "relative_agreement",
        "relative_agreement_small_bias",
        "error",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect::<Vec<_>>()];
    for (kind, res) in &results {
        match res {
            Ok(r) => {
                for k in 0..exp.costs.len() {
                    let e = r.error.rows(k * m, m).norm_squared();
                    nodes.push(
                        [kind.name().to_string(), k.to_string(), fmt_num(e)]
                            .into_iter()
                            .chain(r.limit.block(k).iter().map(|&v| fmt_num(v)))
                            .collect(),
                    );
                }
                summary.push(vec![
                    kind.name().into(),
                    r.iterations.to_string(),
                    fmt_num(r.error_power),
                    fmt_num(to_db(r.error_power)),
                    opt_num(r.formula.as_ref().map(|f| f.norm_squared() / exp.costs.len() as f64)),
                    opt_num(r.relative_agreement()),
                    opt_num(r.relative_agreement_small_bias()),
                    String::new(),
                ]);
                out.lines.push(format!(
                    "{:<12} fixed-point error power {:>9.3} dB after {} iterations{}",
                    kind.name(),
                    to_db(r.error_power),
                    r.iterations,
                    r.relative_agreement().map(|a| format!(", formula agreement {a:.2e}")).unwrap_or_default()
                ));
            }
            Err(e) => {
                summary.push(vec![kind.name().into(), String::new(), String::new(), String::new(), String::new(), String::new(), String::new(), e.to_string()]);
                out.errors.push(format!("{}: {e}", kind.name()));
                out.exit_code = EXIT_NUMERICAL;
            }
        }
    }
    let h = header(cfg, "fixed-point", &[("mu_max", fmt_num(mu.mu_max())), ("w_o", fmt_vec(&w_o))])?;
    let path = cfg.output.dir.join("fixed_point.csv");
    write_file(&path, &h, &csv_bytes(&nodes)?)?;
    out.files.push(path);
    let path = cfg.output.dir.join("fixed_point_summary.csv");
    write_file(&path, &h, &csv_bytes(&summary)?)?;
    out.files.push(path);
    Ok(out)
}
