//! Command-line front end.
//!
//! Each subcommand's arguments double as its serialized configuration: the
//! resolved [`RunConfig`] is echoed into every artifact and `replay` runs
//! it again.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::correlations::{lg_from_trials, lg_scan_pooled};
use crate::dirac::{continuation_check, envelope_correlation, evolve_dirac_with, DiracParams, SpinorField};
use crate::error::{invalid_param, Error, Result};
use crate::io::{self, fmt_real, CsvSink, SCAN_HEADER};
use crate::lattice::{step_count, SpaceGrid, MAX_ORACLE_CELLS};
use crate::observables::{binarize_spikes, binarize_threshold, kac_internal_state, BinarySeries, SpikeBinSpec, ThresholdSpec};
use crate::plot::{emit_svg_plot, Curve, PlotLabels};
use crate::stochastic::{kac_position_variance, simulate_kac_ensemble, simulate_ou_ensemble, KacInitialState, KacParams, OUParams, TimeGrid};
use crate::telegraph::{evolve_telegraph_with, telegraph_moments, Field1D, TelegraphParams};
use crate::theory::{k_damped_oscillatory, k_exponential, violation_region, OscillatoryModel};
use crate::validate::run_validation;

#[derive(Debug, Parser)]
#[command(name = "lgkac", version, about = "Leggett-Garg statistics for OU and Kac dynamics, telegraph PDE and Dirac continuation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Simulate OU or Kac trajectories to CSV
    #[command(subcommand)]
    Simulate(Simulate),
    /// Turn trajectories or spike lists into +1/-1 series
    Binarize(BinarizeArgs),
    /// Ensemble LG statistic at three times
    Lg(LgArgs),
    /// Stationary K(tau) scan
    Scan(ScanArgs),
    /// Closed-form K(tau) curves
    Theory(TheoryArgs),
    /// Telegraph PDE snapshots and moments
    Pde(PdeArgs),
    /// Dirac split-step snapshots and continuation check
    Dirac(DiracArgs),
    /// Run the Monte Carlo and solver oracle suite
    Validate(ValidateArgs),
    /// Re-run the configuration echoed in an earlier output
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Simulate {
    Ou(OuArgs),
    Kac(KacArgs),
}

/// The resolved configuration echoed into outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(deny_unknown_fields)]
pub struct OuArgs {
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub v_rest: f64,
    #[arg(long, default_value_t = 0.0)]
    pub v_init: f64,
    #[arg(long)]
    pub dt: f64,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(deny_unknown_fields)]
pub struct KacArgs {
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    #[arg(long)]
    pub v: f64,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub x_init: f64,
    /// Initial state +1 or -1; omitted means +1 or -1 with equal probability per trial
    #[arg(long)]
    pub s_init: Option<i8>,
    #[arg(long)]
    pub dt: f64,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinarizeMode {
    Threshold,
    Spikes,
    State,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(deny_unknown_fields)]
pub struct BinarizeArgs {
    #[arg(long, value_enum)]
    pub mode: BinarizeMode,
    #[arg(long)]
    pub v_th: Option<f64>,
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Spike mode: grid start
    #[arg(long)]
    pub t0: Option<f64>,
    /// Spike mode: grid spacing
    #[arg(long)]
    pub dt: Option<f64>,
    /// Spike mode: number of grid steps
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(deny_unknown_fields)]
pub struct LgArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub t1: f64,
    #[arg(long)]
    pub t2: f64,
    #[arg(long)]
    pub t3: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub tau_min: f64,
    #[arg(long)]
    pub tau_max: f64,
    /// Number of tau values; each is rounded to the nearest whole lag
    #[arg(long)]
    pub tau_steps: usize,
    #[arg(long, default_value_t = 0.0)]
    pub burn_in: f64,
    /// Decorrelation rate for the effective sample size (e.g. 2 lambda); omitted means raw pair counts
    #[arg(long)]
    pub decorrelation_rate: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoryModel {
    Exponential,
    Oscillatory,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryArgs {
    #[arg(long, value_enum)]
    pub model: TheoryModel,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long)]
    pub tau_min: f64,
    #[arg(long)]
    pub tau_max: f64,
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(deny_unknown_fields)]
pub struct PdeArgs {
    #[arg(long)]
    pub v: f64,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    #[arg(long)]
    pub dx: f64,
    #[arg(long)]
    pub dt: f64,
    #[arg(long)]
    pub x_min: f64,
    #[arg(long)]
    pub x_max: f64,
    #[arg(long)]
    pub t_final: f64,
    /// Position of the initial delta
    #[arg(long, default_value_t = 0.0)]
    pub x_init: f64,
    /// Snapshot count after t = 0, evenly spaced in steps
    #[arg(long, default_value_t = 1)]
    pub snapshots: usize,
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(deny_unknown_fields)]
pub struct DiracArgs {
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub m_tilde: f64,
    #[arg(long)]
    pub dx: f64,
    #[arg(long)]
    pub dt: f64,
    #[arg(long)]
    pub x_min: f64,
    #[arg(long)]
    pub x_max: f64,
    #[arg(long)]
    pub t_final: f64,
    /// Centre of the initial Gaussian packet in u_plus (default: middle of the range)
    #[arg(long)]
    pub x_init: Option<f64>,
    /// Packet width (default: a tenth of the range)
    #[arg(long)]
    pub width: Option<f64>,
    /// Carrier wavenumber of the packet
    #[arg(long, default_value_t = 0.0)]
    pub k0: f64,
    #[arg(long, default_value_t = 1)]
    pub snapshots: usize,
    #[arg(long, default_value_t = false)]
    pub continuation_check: bool,
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = false)]
    pub quick: bool,
    #[arg(long, default_value_t = 20_251_017)]
    pub seed: u64,
    /// Also write the report JSON here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayArgs {
    /// A CSV with a `# config:` line, a result JSON with a `config` field, or a bare config JSON
    #[arg(long)]
    pub config: PathBuf,
}

fn finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid_param(format!("{name} must be finite, got {x}")))
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid_param(format!("{name} must be positive, got {x}")))
    }
}

impl OuArgs {
    fn params(&self) -> OUParams<f64> {
        OUParams { gamma: self.gamma, sigma: self.sigma, v_rest: self.v_rest, v_init: self.v_init }
    }
}

impl KacArgs {
    fn params(&self) -> KacParams<f64> {
        KacParams { mu: self.mu, v: self.v, lambda: self.lambda, x_init: self.x_init, s_init: self.s_init.unwrap_or(1) }
    }
}

impl PdeArgs {
    fn setup(&self) -> Result<(SpaceGrid<f64>, TelegraphParams<f64>, usize)> {
        let grid = SpaceGrid::from_range(self.x_min, self.x_max, self.dx)?;
        let params = TelegraphParams { mu: self.mu, v: self.v, lambda: self.lambda, dt: self.dt };
        params.validate(&grid)?;
        Ok((grid, params, step_count(self.t_final, self.dt)?))
    }
}

impl DiracArgs {
    fn setup(&self) -> Result<(SpaceGrid<f64>, DiracParams<f64>, usize)> {
        let grid = SpaceGrid::from_range(self.x_min, self.x_max, self.dx)?;
        let params = DiracParams { c_speed: self.c, m_tilde: self.m_tilde, dt: self.dt };
        params.validate(&grid)?;
        if self.continuation_check && grid.n_cells() > MAX_ORACLE_CELLS {
            return Err(Error::Configuration(format!(
                "continuation check is limited to {MAX_ORACLE_CELLS} cells, this grid has {}",
                grid.n_cells()
            )));
        }
        Ok((grid, params, step_count(self.t_final, self.dt)?))
    }
}

impl Command {
    /// Re-checks every parameter invariant before anything runs.
    pub fn validate(&self) -> Result<()> {
        match self {
            Command::Simulate(Simulate::Ou(a)) => {
                a.params().validate()?;
                TimeGrid::new(0.0, a.dt, a.steps)?;
                positive("trials", a.trials as f64)
            }
            Command::Simulate(Simulate::Kac(a)) => {
                if let Some(s) = a.s_init {
                    if s != 1 && s != -1 {
                        return Err(invalid_param(format!("s-init must be +1 or -1, got {s}")));
                    }
                }
                a.params().validate()?;
                TimeGrid::new(0.0, a.dt, a.steps)?;
                positive("trials", a.trials as f64)
            }
            Command::Binarize(a) => match a.mode {
                BinarizeMode::Threshold => finite("v-th", a.v_th.ok_or_else(|| invalid_param("threshold mode needs --v-th"))?),
                BinarizeMode::Spikes => {
                    positive("bin-width", a.bin_width.ok_or_else(|| invalid_param("spike mode needs --bin-width"))?)?;
                    let (Some(t0), Some(dt), Some(steps)) = (a.t0, a.dt, a.steps) else {
                        return Err(invalid_param("spike mode needs --t0, --dt and --steps for the output grid"));
                    };
                    TimeGrid::new(t0, dt, steps).map(|_| ())
                }
                BinarizeMode::State => Ok(()),
            },
            Command::Lg(a) => {
                for (n, t) in [("t1", a.t1), ("t2", a.t2), ("t3", a.t3)] {
                    finite(n, t)?;
                }
                if a.t1 < a.t2 && a.t2 < a.t3 {
                    Ok(())
                } else {
                    Err(invalid_param("times must satisfy t1 < t2 < t3"))
                }
            }
            Command::Scan(a) => {
                positive("tau-min", a.tau_min)?;
                if !(a.tau_max >= a.tau_min) || !a.tau_max.is_finite() {
                    return Err(invalid_param("tau-max must be finite and at least tau-min"));
                }
                positive("tau-steps", a.tau_steps as f64)?;
                if !(a.burn_in >= 0.0) || !a.burn_in.is_finite() {
                    return Err(invalid_param("burn-in must be nonnegative"));
                }
                a.decorrelation_rate.map_or(Ok(()), |r| positive("decorrelation-rate", r))
            }
            Command::Theory(a) => {
                positive("tau-min", a.tau_min)?;
                if !(a.tau_max > a.tau_min) || !a.tau_max.is_finite() {
                    return Err(invalid_param("tau-max must be finite and above tau-min"));
                }
                if a.points < 100 {
                    return Err(invalid_param("need at least 100 points"));
                }
                match a.model {
                    TheoryModel::Oscillatory => OscillatoryModel::new(a.omega, a.gamma).map(|_| ()),
                    TheoryModel::Exponential if a.gamma >= 0.0 && a.gamma.is_finite() => Ok(()),
                    TheoryModel::Exponential => Err(invalid_param("gamma must be nonnegative")),
                }
            }
            Command::Pde(a) => {
                finite("x-init", a.x_init)?;
                a.setup().map(|_| ())
            }
            Command::Dirac(a) => {
                finite("k0", a.k0)?;
                if let Some(w) = a.width {
                    positive("width", w)?;
                }
                a.setup().map(|_| ())
            }
            Command::Validate(_) | Command::Replay(_) => Ok(()),
        }
    }

    fn echo(&self) -> RunConfig {
        RunConfig { command: self.clone() }
    }
}

/// Loads the configuration echoed in an output file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let first = text.lines().next().unwrap_or("");
    let value: Value = match first.strip_prefix("# config: ") {
        Some(json) => serde_json::from_str(json)?,
        None => serde_json::from_str(&text)?,
    };
    let value = match value {
        Value::Object(mut map) if map.contains_key("config") => map.remove("config").unwrap(),
        v => v,
    };
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Configuration(format!("{}: {e}", path.display())))?;
    if matches!(cfg.command, Command::Replay(_)) {
        return Err(Error::Configuration("a replay configuration cannot itself be a replay".into()));
    }
    Ok(cfg)
}

/// Runs one command; the returned JSON is the run summary printed on stdout.
pub fn run_command(command: &Command) -> Result<Value> {
    command.validate()?;
    let cfg = command.echo();
    match command {
        Command::Simulate(Simulate::Ou(a)) => {
            let grid = TimeGrid::new(0.0, a.dt, a.steps)?;
            let trajs = simulate_ou_ensemble(&a.params(), &grid, a.seed, a.trials)?;
            let tagged: Vec<_> = trajs.iter().enumerate().map(|(i, t)| (i as i64, t)).collect();
            io::write_trajectories(&a.out, &tagged, Some(&cfg))?;
            Ok(json!({ "command": "simulate ou", "seed": a.seed, "trials": a.trials, "out": a.out }))
        }
        Command::Simulate(Simulate::Kac(a)) => {
            let grid = TimeGrid::new(0.0, a.dt, a.steps)?;
            let initial = if a.s_init.is_some() { KacInitialState::Fixed } else { KacInitialState::Symmetric };
            let trajs = simulate_kac_ensemble(&a.params(), &grid, a.seed, a.trials, initial)?;
            let tagged: Vec<_> = trajs.iter().enumerate().map(|(i, t)| (i as i64, t)).collect();
            io::write_kac_trajectories(&a.out, &tagged, Some(&cfg))?;
            Ok(json!({ "command": "simulate kac", "seed": a.seed, "trials": a.trials, "out": a.out }))
        }
        Command::Binarize(a) => {
            let series = binarize(a)?;
            io::write_binary_series(&a.out, &series, Some(&cfg))?;
            Ok(json!({ "command": "binarize", "trials": series.len(), "out": a.out }))
        }
        Command::Lg(a) => {
            let series = io::read_binary_series(&a.input)?;
            let result = lg_from_trials(&series, a.t1, a.t2, a.t3)?;
            let doc = json!({ "config": cfg, "result": result });
            write_json(&a.out, &doc)?;
            Ok(json!({ "command": "lg", "k": result.k, "k_std_error": result.k_std_error, "verdict": result.verdict, "out": a.out }))
        }
        Command::Scan(a) => run_scan(a, &cfg),
        Command::Theory(a) => run_theory(a, &cfg),
        Command::Pde(a) => run_pde(a, &cfg),
        Command::Dirac(a) => run_dirac(a, &cfg),
        Command::Validate(a) => {
            let report = run_validation(a.seed, a.quick);
            let doc = json!({ "config": cfg, "report": report });
            if let Some(out) = &a.out {
                write_json(out, &doc)?;
            }
            if !report.all_passed {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                println!("{}", serde_json::to_string_pretty(&doc)?);
                return Err(Error::ValidationFailed(failed.join(", ")));
            }
            Ok(doc)
        }
        Command::Replay(a) => {
            let cfg = load_config(&a.config)?;
            run_command(&cfg.command)
        }
    }
}

fn write_json(path: &Path, doc: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn binarize(a: &BinarizeArgs) -> Result<Vec<BinarySeries<f64>>> {
    match a.mode {
        BinarizeMode::Threshold => {
            let spec = ThresholdSpec { v_th: a.v_th.unwrap() };
            io::read_recording(&a.input)?
                .into_trajectories()?
                .iter()
                .map(|(trial, tr)| binarize_threshold(tr, &spec, *trial))
                .collect()
        }
        BinarizeMode::State => Ok(io::read_recording(&a.input)?
            .into_kac_trajectories()?
            .iter()
            .map(|(trial, tr)| kac_internal_state(tr, *trial))
            .collect()),
        BinarizeMode::Spikes => {
            let grid = TimeGrid::new(a.t0.unwrap(), a.dt.unwrap(), a.steps.unwrap())?;
            let spec = SpikeBinSpec { bin_width: a.bin_width.unwrap() };
            io::read_spikes(&a.input)?
                .iter()
                .map(|(trial, spikes)| binarize_spikes(spikes, &grid, &spec, *trial))
                .collect()
        }
    }
}

/// Lags for `n` tau values spread over `[lo, hi]`, rounded to whole steps and deduplicated.
fn scan_lags(lo: f64, hi: f64, n: usize, dt: f64) -> Vec<usize> {
    let mut lags: Vec<usize> = (0..n)
        .map(|i| {
            let tau = if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
            ((tau / dt).round() as usize).max(1)
        })
        .collect();
    lags.dedup();
    lags
}

fn run_scan(a: &ScanArgs, cfg: &RunConfig) -> Result<Value> {
    let series = io::read_binary_series(&a.input)?;
    let grid = series[0].grid;
    let lags = scan_lags(a.tau_min, a.tau_max, a.tau_steps, grid.dt());
    let burn = (a.burn_in / grid.dt()).round() as usize;
    let points = lg_scan_pooled(&series, &lags, burn, a.decorrelation_rate)?;
    let mut out = CsvSink::create(&a.out, &SCAN_HEADER, Some(cfg))?;
    for p in &points {
        out.row([fmt_real(p.tau), fmt_real(p.k), fmt_real(p.std_error)])?;
    }
    out.finish()?;
    if let Some(svg) = &a.svg {
        let labels = PlotLabels {
            title: "Stationary K(tau)".into(),
            x: "tau".into(),
            y: "K".into(),
            description: Some(serde_json::to_string(cfg)?),
        };
        let curve = Curve::new("K estimate", points.iter().map(|p| (p.tau, p.k)).collect());
        emit_svg_plot(&[curve], Some(1.0), &labels, svg)?;
    }
    let max = points.iter().map(|p| p.k).fold(f64::NEG_INFINITY, f64::max);
    let violating = points.iter().filter(|p| p.verdict == crate::correlations::Verdict::Violating).count();
    Ok(json!({ "command": "scan", "points": points.len(), "k_max": max, "violating_points": violating, "out": a.out }))
}

fn run_theory(a: &TheoryArgs, cfg: &RunConfig) -> Result<Value> {
    let n = a.points;
    let mut rows: Vec<(f64, f64)> = (0..n)
        .map(|i| a.tau_min + (a.tau_max - a.tau_min) * i as f64 / (n - 1) as f64)
        .map(|tau| (tau, 0.0))
        .collect();
    let mut summary = json!({ "command": "theory", "out": a.out });
    let label;
    match a.model {
        TheoryModel::Exponential => {
            for r in &mut rows {
                r.1 = k_exponential(a.gamma, r.0);
            }
            label = "exponential";
        }
        TheoryModel::Oscillatory => {
            let model = OscillatoryModel::new(a.omega, a.gamma)?;
            for r in &mut rows {
                r.1 = k_damped_oscillatory(&model, r.0);
            }
            let report = violation_region(&model, (a.tau_min, a.tau_max), n)?;
            let pos = rows.partition_point(|r| r.0 < report.tau_star);
            if rows.get(pos).is_none_or(|r| r.0 != report.tau_star) {
                rows.insert(pos, (report.tau_star, report.k_max));
            }
            summary["tau_star"] = json!(report.tau_star);
            summary["k_max"] = json!(report.k_max);
            summary["violating_intervals"] = json!(report.violating_intervals);
            label = "damped oscillatory";
        }
    }
    let mut out = CsvSink::create(&a.out, &["tau", "k"], Some(cfg))?;
    for (tau, k) in &rows {
        out.row([fmt_real(*tau), fmt_real(*k)])?;
    }
    out.finish()?;
    if let Some(svg) = &a.svg {
        let labels = PlotLabels { title: format!("K(tau), {label}"), x: "tau".into(), y: "K".into(), description: Some(serde_json::to_string(cfg)?) };
        emit_svg_plot(&[Curve::new(label, rows)], Some(1.0), &labels, svg)?;
    }
    Ok(summary)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Step indices `round(j n / count)` for `j = 0..=count`.
fn snapshot_steps(n: usize, count: usize) -> Vec<usize> {
    let count = count.max(1);
    let mut v: Vec<usize> = (0..=count).map(|j| ((j * n) as f64 / count as f64).round() as usize).collect();
    v.dedup();
    v
}

fn run_pde(a: &PdeArgs, cfg: &RunConfig) -> Result<Value> {
    let (grid, params, n) = a.setup()?;
    let field = Field1D::delta(grid, a.x_init)?;
    let snaps = snapshot_steps(n, a.snapshots);
    let mut moments = CsvSink::create(&with_suffix(&a.out_prefix, "_moments.csv"), &["t", "mass", "mean", "variance", "min_density"], Some(cfg))?;
    let mut files = Vec::new();
    let mut failure = None;
    let final_field = evolve_telegraph_with(&field, &params, a.t_final, |k, f| {
        if failure.is_some() {
            return;
        }
        let t = k as f64 * a.dt;
        let res = telegraph_moments(f).and_then(|m| {
            moments.row([fmt_real(t), fmt_real(m.mass), fmt_real(m.mean), fmt_real(m.variance), fmt_real(f.min_entry())])?;
            if snaps.contains(&k) {
                let path = with_suffix(&a.out_prefix, &format!("_{k:06}.csv"));
                io::write_field(&path, f, Some(cfg))?;
                files.push(path);
            }
            Ok(())
        });
        if let Err(e) = res {
            failure = Some(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    moments.finish()?;
    let m = telegraph_moments(&final_field)?;
    let variance_theory = kac_position_variance(a.v, a.lambda, a.t_final);
    let summary = json!({
        "config": cfg,
        "t_final": a.t_final,
        "steps": n,
        "mass": m.mass,
        "mean": m.mean,
        "variance": m.variance,
        "variance_closed_form": variance_theory,
        "min_density": final_field.min_entry(),
        "snapshots": files,
    });
    write_json(&with_suffix(&a.out_prefix, "_summary.json"), &summary)?;
    Ok(json!({ "command": "pde", "mass": m.mass, "variance": m.variance, "variance_closed_form": variance_theory, "snapshots": files.len() }))
}

fn run_dirac(a: &DiracArgs, cfg: &RunConfig) -> Result<Value> {
    let (grid, params, n) = a.setup()?;
    let centre = a.x_init.unwrap_or(grid.x0() + grid.length() / 2.0);
    let width = a.width.unwrap_or(grid.length() / 10.0);
    let u_plus: Vec<Complex64> = grid
        .xs()
        .map(|x| Complex64::from_polar((-((x - centre) / width).powi(2) / 2.0).exp(), a.k0 * x))
        .collect();
    let field = SpinorField::new(grid, u_plus, vec![Complex64::new(0.0, 0.0); grid.n_cells()])?;
    let n0 = field.norm_sq();
    let snaps = snapshot_steps(n, a.snapshots);
    let mut norms = CsvSink::create(
        &with_suffix(&a.out_prefix, "_norm.csv"),
        &["t", "norm_sq", "overlap_re", "overlap_im", "uniform_envelope_re", "uniform_envelope_im"],
        Some(cfg),
    )?;
    let mut files = Vec::new();
    let mut drift = 0.0f64;
    let mut failure = None;
    evolve_dirac_with(&field, &params, a.t_final, |k, u| {
        if failure.is_some() {
            return;
        }
        let t = k as f64 * a.dt;
        let ov = field.inner(u) / n0;
        let env = envelope_correlation(&params, t);
        drift = drift.max((u.norm_sq() - n0).abs() / n0);
        let res = norms.row([fmt_real(t), fmt_real(u.norm_sq()), fmt_real(ov.re), fmt_real(ov.im), fmt_real(env.re), fmt_real(env.im)]).and_then(|_| {
            if snaps.contains(&k) {
                let path = with_suffix(&a.out_prefix, &format!("_{k:06}.csv"));
                io::write_spinor(&path, u, Some(cfg))?;
                files.push(path);
            }
            Ok(())
        });
        if let Err(e) = res {
            failure = Some(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    norms.finish()?;
    let mut summary = json!({
        "config": cfg,
        "t_final": a.t_final,
        "steps": n,
        "courant": a.c * a.dt / a.dx,
        "max_relative_norm_drift": drift,
        "snapshots": files,
    });
    if a.continuation_check {
        summary["continuation"] = json!(continuation_check(a.c, a.m_tilde, &grid, a.dt, a.t_final)?);
    }
    write_json(&with_suffix(&a.out_prefix, "_summary.json"), &summary)?;
    let mut brief = json!({ "command": "dirac", "max_relative_norm_drift": drift, "snapshots": files.len() });
    if let Some(c) = summary.get("continuation") {
        brief["continuation"] = c.clone();
    }
    Ok(brief)
}

/// Entry point shared by the binary: parses `args`, runs, and reports errors
/// as JSON on stderr. Returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return 0;
            }
            let message = e.render().to_string();
            eprintln!("{}", json!({ "error": "usage", "message": message.trim() }));
            return 2;
        }
    };
    match run_command(&cli.command) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            0
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            1
        }
    }
}
