//! Config-driven command layer behind the `paramp-entangle` binary.
//!
//! A run is described by a JSON [`RunConfig`]; `--set a.b=value` patches
//! individual fields before parsing. Rates are given in any consistent unit
//! and normalized to the mean damping rate before solving, so emitted times
//! are in units of `1/γ̄`.
//!
//! Sweep CSV layout (fixed):
//!
//! ```text
//! # paramp-entangle <version>
//! # config: <compact JSON of the resolved config>
//! <parameter>,S,E_N,alpha,V_alpha_plus,V_alpha_minus,converged[,S_riccati]
//! ```
//!
//! `S_riccati` appears only with `solver = "both"`. Empty cells mark values
//! that are undefined at that point (`E_N` when `S ≥ 1`, everything when
//! `converged = false`).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::Vector4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::closedform::{log_grid, separability, snr, EntanglementResult};
use crate::error::{Error, Result};
use crate::model::{
    drift_matrix, reduce_to_pairs, threshold, threshold_detuning, DriveModel, OscillatorPairParams, PairSubsystem,
};
use crate::riccati::{
    integrate_pair_to_steady, lyapunov_unconditional, steady_algebraic, CovarianceMatrix4, PairCovariance,
    SteadyOptions,
};
use crate::trajectories::{
    default_dt, labframe_rwa_check, simulate_conditional_means, GainSchedule, LabFrameConfig, Scheme,
    TrajectoryConfig,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Relative tolerance reported by `rwa-check`.
pub const RWA_TOLERANCE: f64 = 0.01;

/// Drive scheme with an optional detuning; a missing detuning places the
/// (stronger) pair exactly at threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriveConfig {
    ModelOne {
        chi: f64,
        #[serde(default)]
        detuning: Option<f64>,
    },
    ModelTwo {
        chi: f64,
        #[serde(default)]
        coupling: Option<f64>,
    },
}

impl DriveConfig {
    pub fn resolve(&self, params: &OscillatorPairParams) -> DriveModel {
        let g = params.gamma_mean();
        match *self {
            DriveConfig::ModelOne { chi, detuning } => DriveModel::ModelOne {
                chi,
                detuning: detuning.unwrap_or_else(|| threshold_detuning(chi.abs(), g).unwrap_or(0.0)),
            },
            DriveConfig::ModelTwo { chi, coupling } => {
                let strongest = chi.abs() + params.damping_half_difference().abs();
                DriveModel::ModelTwo {
                    chi,
                    coupling: coupling.unwrap_or_else(|| threshold_detuning(strongest, g).unwrap_or(0.0)),
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    #[default]
    #[value(name = "closedform")]
    Closedform,
    Riccati,
    Both,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    #[default]
    Log,
}

/// Sweepable fields.
pub const SWEEP_PARAMETERS: [&str; 6] = [
    "measurement_rate",
    "chi",
    "detuning",
    "coupling",
    "bath_occupation",
    "efficiency",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            parameter: "measurement_rate".into(),
            start: 1e-2,
            stop: 1e3,
            count: 200,
            spacing: Spacing::Log,
        }
    }
}

impl SweepConfig {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !SWEEP_PARAMETERS.contains(&self.parameter.as_str()) {
            return Err(Error::Config(format!(
                "unknown sweep parameter {:?}; expected one of {}",
                self.parameter,
                SWEEP_PARAMETERS.join(", ")
            )));
        }
        if self.count == 0 {
            return Err(Error::Config("sweep count must be at least 1".into()));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::Config("sweep bounds must be finite".into()));
        }
        Ok(match self.spacing {
            Spacing::Log => {
                if self.start <= 0.0 || self.stop <= 0.0 {
                    return Err(Error::Config("log sweep bounds must be positive".into()));
                }
                log_grid(self.start, self.stop, self.count)
            }
            Spacing::Linear => match self.count {
                1 => vec![self.start],
                n => (0..n)
                    .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    /// Step in units of `1/γ̄`; `None` picks `1e-3 / max(1, ρ(A))`.
    #[serde(default)]
    pub dt: Option<f64>,
    pub duration: f64,
    pub n_traj: usize,
    #[serde(default)]
    pub record_stride: usize,
    /// Starting conditional mean in the drive's collective basis.
    #[serde(default)]
    pub initial_mean: [f64; 4],
    /// Evolve the gain from `V₀·I` instead of using the steady covariance.
    #[serde(default)]
    pub transient_gain: bool,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self {
            dt: None,
            duration: 10.0,
            n_traj: 100,
            record_stride: 100,
            initial_mean: [0.0; 4],
            transient_gain: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub drive: DriveConfig,
    pub oscillators: OscillatorPairParams,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub trajectory: Option<TrajectorySection>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            drive: DriveConfig::ModelOne {
                chi: 25.0,
                detuning: None,
            },
            oscillators: OscillatorPairParams::symmetric(1.0, 5.0, 1.0, 5.5),
            solver: Solver::Closedform,
            sweep: None,
            trajectory: None,
            output: OutputConfig::default(),
            seed: 0,
            jobs: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Compact echo of everything that affects results; output location and
    /// thread count are left out so emitted files do not depend on them.
    pub fn echo_json(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        c.jobs = 0;
        c.to_json()
    }

    /// Normalized parameters and the resolved drive.
    pub fn resolved(&self) -> Result<(DriveModel, OscillatorPairParams)> {
        self.oscillators.validate()?;
        let (params, g) = self.oscillators.normalized();
        let drive = self.drive.resolve(&self.oscillators).scaled(1.0 / g);
        drive.validate()?;
        Ok((drive, params))
    }

    /// Copy with one sweepable field replaced.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match (name, &mut c.drive) {
            ("measurement_rate", _) => c.oscillators.measurement_rate = value,
            ("bath_occupation", _) => c.oscillators.bath_occupation = value,
            ("efficiency", _) => c.oscillators.efficiency = value,
            ("chi", DriveConfig::ModelOne { chi, .. } | DriveConfig::ModelTwo { chi, .. }) => *chi = value,
            ("detuning", DriveConfig::ModelOne { detuning, .. }) => *detuning = Some(value),
            ("coupling", DriveConfig::ModelTwo { coupling, .. }) => *coupling = Some(value),
            _ => {
                return Err(Error::Config(format!(
                    "parameter {name:?} does not apply to this drive model"
                )))
            }
        }
        Ok(c)
    }
}

/// Applies `a.b.c=value` to a JSON tree. The value is parsed as JSON when
/// possible and taken as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad override key {path:?}")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("cannot descend into {key:?} in {path:?}")))?;
        node = obj.entry(key.to_string()).or_insert_with(|| json!({}));
        if node.is_null() {
            *node = json!({});
        }
    }
    node.as_object_mut()
        .ok_or_else(|| Error::Config(format!("cannot set {path:?}")))?
        .insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[derive(Debug, Parser)]
#[command(name = "paramp-entangle", version, about = "Steady-state entanglement under parametric drive and continuous measurement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config field, e.g. `--set oscillators.measurement_rate=6`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, value_enum, global = true)]
    pub solver: Option<Solver>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Single-point steady state.
    Steady,
    /// Separability along one parameter axis.
    Sweep,
    /// Monte Carlo conditional means.
    Trajectory,
    /// Lab-frame check of the rotating-wave approximation.
    RwaCheck,
    /// Threshold and stability of both pairs.
    Threshold,
}

/// Loads the config file (or defaults) and applies overrides and flags.
pub fn load_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut tree = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => serde_json::to_value(RunConfig::default())?,
    };
    for o in &args.overrides {
        apply_override(&mut tree, o)?;
    }
    let mut cfg: RunConfig = serde_json::from_value(tree).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(p) = &args.output {
        cfg.output.path = Some(p.clone());
    }
    if let Some(f) = args.format {
        cfg.output.format = f;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(j) = args.jobs {
        cfg.jobs = j;
    }
    if let Some(s) = args.solver {
        cfg.solver = s;
    }
    Ok(cfg)
}

/// Parses `args` and runs the command, writing to `out` unless the config
/// names an output file, and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let cfg = load_config(&cli.common)?;
    let emitted = match cli.command {
        Command::Steady => cmd_steady(&cfg)?,
        Command::Sweep => {
            let (text, ok) = cmd_sweep(&cfg)?;
            if !ok {
                emit(&cfg, out, &text)?;
                return Err(Error::NonFinite("no sweep point succeeded".into()));
            }
            text
        }
        Command::Trajectory => {
            let t = cmd_trajectory(&cfg)?;
            if let (Some(path), Some(summary)) = (&cfg.output.path, &t.summary_sidecar) {
                std::fs::write(summary_path(path), summary)?;
            }
            t.main
        }
        Command::RwaCheck => cmd_rwa_check(&cfg)?,
        Command::Threshold => cmd_threshold(&cfg)?,
    };
    emit(&cfg, out, &emitted)?;
    Ok(0)
}

fn emit(cfg: &RunConfig, out: &mut dyn Write, text: &str) -> Result<()> {
    match &cfg.output.path {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// `<output>.summary.json`, next to a trajectory CSV dump.
pub fn summary_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".summary.json");
    PathBuf::from(s)
}

/// Shortest round-trip decimal, with an exponent for very large or small
/// magnitudes.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn result_json(r: &EntanglementResult) -> Value {
    json!({
        "S": r.s,
        "E_N": r.log_negativity,
        "alpha": r.alpha,
        "alpha_minus": r.alpha_minus,
        "V_alpha_plus": r.v_alpha_plus,
        "V_alpha_minus": r.v_alpha_minus,
        "entangled": r.entangled,
        "angle_degenerate": r.angle_degenerate,
    })
}

fn pair_json(p: &PairSubsystem) -> Value {
    let th = threshold(p);
    json!({
        "label": p.label.name(),
        "chi_eff": p.chi_eff,
        "delta_eff": p.delta_eff,
        "chi_th": th.chi_th,
        "stable": th.stable,
        "max_real_eigenvalue": p.max_real_eigenvalue(),
    })
}

/// Separability from the integrated pair flows, started at `V₀·I`.
pub fn riccati_separability(
    pair_a: &PairSubsystem,
    pair_b: &PairSubsystem,
    params: &OscillatorPairParams,
) -> Result<(EntanglementResult, [PairCovariance; 2])> {
    let start = PairCovariance::isotropic(crate::model::v0(params));
    let opts = SteadyOptions::default();
    let a = integrate_pair_to_steady(pair_a, params, &start, &opts)?.state;
    let b = integrate_pair_to_steady(pair_b, params, &start, &opts)?.state;
    let ra = crate::closedform::separability_riccati(pair_a, pair_b, params);
    // same angles as the Newton root; variances from the integrated flow
    let angles = ra.map(|r| (r.alpha, r.alpha_minus)).unwrap_or((0.0, 0.0));
    let (va, vb) = (a.min_variance(), b.min_variance());
    let s = 2.0 * (va * vb).sqrt();
    if !s.is_finite() {
        return Err(Error::NonFinite(format!("separability evaluated to {s}")));
    }
    let degenerate = pair_a.chi_eff == 0.0 || pair_b.chi_eff == 0.0;
    Ok((
        EntanglementResult {
            s,
            log_negativity: (s < 1.0).then(|| -s.ln()),
            alpha: angles.0,
            alpha_minus: angles.1,
            v_alpha_plus: va,
            v_alpha_minus: vb,
            entangled: s < 1.0,
            angle_degenerate: degenerate,
        },
        [a, b],
    ))
}

/// Single steady-state evaluation.
pub fn cmd_steady(cfg: &RunConfig) -> Result<String> {
    let (drive, params) = cfg.resolved()?;
    let (a, b) = reduce_to_pairs(&drive, &params)?;
    let closed = match cfg.solver {
        Solver::Closedform | Solver::Both => Some(separability(&a, &b, &params)?),
        Solver::Riccati => None,
    };
    let ric = match cfg.solver {
        Solver::Riccati | Solver::Both => Some(riccati_separability(&a, &b, &params)?),
        Solver::Closedform => None,
    };
    match cfg.output.format {
        Format::Json => {
            let mut v = json!({
                "version": VERSION,
                "drive": drive,
                "snr": snr(&params),
                "pairs": [pair_json(&a), pair_json(&b)],
            });
            if let Some(r) = &closed {
                v["closedform"] = result_json(r);
            }
            if let Some((r, covs)) = &ric {
                let mut j = result_json(r);
                j["covariances"] = serde_json::to_value(covs)?;
                v["riccati"] = j;
            }
            Ok(serde_json::to_string_pretty(&v)? + "\n")
        }
        Format::Csv => {
            let mut s = String::new();
            let _ = writeln!(s, "# paramp-entangle {VERSION}");
            let _ = writeln!(s, "# config: {}", cfg.echo_json());
            let _ = writeln!(
                s,
                "solver,S,E_N,alpha,alpha_minus,V_alpha_plus,V_alpha_minus,entangled,snr,chi_th_a,stable_a,chi_th_b,stable_b"
            );
            let (ta, tb) = (threshold(&a), threshold(&b));
            let rows = closed
                .iter()
                .map(|r| ("closedform", r))
                .chain(ric.iter().map(|(r, _)| ("riccati", r)));
            for (name, r) in rows {
                let _ = writeln!(
                    s,
                    "{name},{},{},{},{},{},{},{},{},{},{},{},{}",
                    num(r.s),
                    opt(r.log_negativity),
                    num(r.alpha),
                    num(r.alpha_minus),
                    num(r.v_alpha_plus),
                    num(r.v_alpha_minus),
                    r.entangled,
                    num(snr(&params)),
                    num(ta.chi_th),
                    ta.stable,
                    num(tb.chi_th),
                    tb.stable
                );
            }
            Ok(s)
        }
    }
}

/// One evaluated sweep point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub result: Option<EntanglementResult>,
    pub s_riccati: Option<f64>,
}

/// Evaluates the sweep rows in grid order.
pub fn sweep_rows(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let sweep = cfg.sweep.clone().unwrap_or_default();
    let grid = sweep.grid()?;
    // reject inapplicable parameters before evaluating anything
    cfg.with_parameter(&sweep.parameter, grid[0])?;
    cfg.oscillators.validate()?;
    let eval = |value: f64| -> SweepRow {
        let point = || -> Result<(EntanglementResult, Option<f64>)> {
            let c = cfg.with_parameter(&sweep.parameter, value)?;
            let (drive, params) = c.resolved()?;
            let (a, b) = reduce_to_pairs(&drive, &params)?;
            match cfg.solver {
                Solver::Closedform => Ok((separability(&a, &b, &params)?, None)),
                Solver::Riccati => Ok((riccati_separability(&a, &b, &params)?.0, None)),
                Solver::Both => {
                    let r = separability(&a, &b, &params)?;
                    let s = riccati_separability(&a, &b, &params).ok().map(|x| x.0.s);
                    Ok((r, s))
                }
            }
        };
        match point() {
            Ok((r, s)) => SweepRow {
                value,
                result: Some(r),
                s_riccati: s,
            },
            Err(_) => SweepRow {
                value,
                result: None,
                s_riccati: None,
            },
        }
    };
    let rows = if cfg.jobs == 0 {
        grid.par_iter().map(|&v| eval(v)).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| grid.par_iter().map(|&v| eval(v)).collect())
    };
    Ok(rows)
}

/// Sweep output text and whether any point succeeded.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<(String, bool)> {
    let sweep = cfg.sweep.clone().unwrap_or_default();
    let rows = sweep_rows(cfg)?;
    let ok = rows.iter().any(|r| r.result.is_some());
    let text = match cfg.output.format {
        Format::Json => {
            let v = json!({
                "version": VERSION,
                "config": serde_json::from_str::<Value>(&cfg.echo_json())?,
                "parameter": sweep.parameter,
                "rows": rows.iter().map(|r| {
                    let mut j = json!({ "value": r.value, "converged": r.result.is_some() });
                    if let Some(res) = &r.result {
                        j["result"] = result_json(res);
                    }
                    if cfg.solver == Solver::Both {
                        j["S_riccati"] = json!(r.s_riccati);
                    }
                    j
                }).collect::<Vec<_>>(),
            });
            serde_json::to_string_pretty(&v)? + "\n"
        }
        Format::Csv => {
            let both = cfg.solver == Solver::Both;
            let mut s = String::new();
            let _ = writeln!(s, "# paramp-entangle {VERSION}");
            let _ = writeln!(s, "# config: {}", cfg.echo_json());
            let _ = write!(s, "{},S,E_N,alpha,V_alpha_plus,V_alpha_minus,converged", sweep.parameter);
            s.push_str(if both { ",S_riccati\n" } else { "\n" });
            for r in &rows {
                match &r.result {
                    Some(res) => {
                        let _ = write!(
                            s,
                            "{},{},{},{},{},{},true",
                            num(r.value),
                            num(res.s),
                            opt(res.log_negativity),
                            num(res.alpha),
                            num(res.v_alpha_plus),
                            num(res.v_alpha_minus)
                        );
                    }
                    None => {
                        let _ = write!(s, "{},,,,,,false", num(r.value));
                    }
                }
                if both {
                    let _ = write!(s, ",{}", opt(r.s_riccati));
                }
                s.push('\n');
            }
            s
        }
    };
    Ok((text, ok))
}

/// Trajectory command output: the main emission and, for CSV dumps to a
/// file, a JSON summary written alongside.
pub struct TrajectoryOutput {
    pub main: String,
    pub summary_sidecar: Option<String>,
}

pub fn cmd_trajectory(cfg: &RunConfig) -> Result<TrajectoryOutput> {
    let section = cfg
        .trajectory
        .clone()
        .ok_or_else(|| Error::Config("trajectory section is required".into()))?;
    let (drive, params) = cfg.resolved()?;
    let drift = drift_matrix(&drive, &params)?;
    let (a, b) = reduce_to_pairs(&drive, &params)?;
    let va = steady_algebraic(&a, &params, None)?;
    let vb = steady_algebraic(&b, &params, None)?;
    let v_cond = CovarianceMatrix4::from_pairs(drift.basis, &va, &vb);
    let gain = if section.transient_gain {
        GainSchedule::FromInitial(CovarianceMatrix4::isotropic(crate::model::v0(&params), drift.basis))
    } else {
        GainSchedule::Steady(v_cond)
    };
    let tcfg = TrajectoryConfig {
        dt: section.dt.unwrap_or_else(|| default_dt(&drift, &params)),
        duration: section.duration,
        n_traj: section.n_traj,
        seed: cfg.seed,
        scheme: Scheme::EulerMaruyama,
        record_stride: section.record_stride,
        jobs: cfg.jobs,
    };
    let m0 = Vector4::from_row_slice(&section.initial_mean);
    let set = simulate_conditional_means(&drift, &gain, &params, &m0, &tcfg)?;
    let st = &set.final_stats;
    let mat = |m: &nalgebra::Matrix4<f64>| -> Vec<Vec<f64>> { (0..4).map(|i| (0..4).map(|j| m[(i, j)]).collect()).collect() };
    let mut summary = json!({
        "version": VERSION,
        "basis": set.basis,
        "labels": set.basis.labels(),
        "n_traj": st.n,
        "dt": tcfg.effective_dt(),
        "duration": tcfg.duration,
        "seed": cfg.seed,
        "final_mean": st.mean.as_slice(),
        "final_mean_se": st.mean_se.as_slice(),
        "final_covariance": mat(&st.covariance),
        "final_covariance_se": mat(&st.covariance_se),
        "conditional_covariance": mat(&v_cond.matrix),
    });
    if let Ok(u) = lyapunov_unconditional(&drift, &params) {
        let resid = st.covariance + v_cond.matrix - u.matrix;
        let z = resid.component_div(&st.covariance_se.map(|x| x.max(f64::MIN_POSITIVE)));
        summary["unconditional_covariance"] = json!(mat(&u.matrix));
        summary["total_variance_residual"] = json!(mat(&resid));
        summary["total_variance_residual_in_se"] = json!(mat(&z));
        summary["total_variance_max_abs_se"] = json!(z.amax());
    }
    match cfg.output.format {
        Format::Json => {
            summary["times"] = json!(set.times);
            summary["paths"] = json!(set
                .paths
                .iter()
                .map(|p| p.iter().map(|x| x.as_slice().to_vec()).collect::<Vec<_>>())
                .collect::<Vec<_>>());
            Ok(TrajectoryOutput {
                main: serde_json::to_string_pretty(&summary)? + "\n",
                summary_sidecar: None,
            })
        }
        Format::Csv => {
            let mut buf = Vec::new();
            set.write_csv(&mut buf)?;
            Ok(TrajectoryOutput {
                main: String::from_utf8(buf).expect("ascii csv"),
                summary_sidecar: Some(serde_json::to_string_pretty(&summary)? + "\n"),
            })
        }
    }
}

pub fn cmd_rwa_check(cfg: &RunConfig) -> Result<String> {
    if cfg.oscillators.measurement_rate != 0.0 {
        return Err(Error::Config("rwa-check is unconditional; set oscillators.measurement_rate=0".into()));
    }
    if cfg.oscillators.mech_frequency.is_none() {
        return Err(Error::Config("rwa-check needs oscillators.mech_frequency".into()));
    }
    let (drive, params) = cfg.resolved()?;
    let r = labframe_rwa_check(&drive, &params, &LabFrameConfig::default())?;
    let v = json!({
        "deviation": r.deviation,
        "tolerance": RWA_TOLERANCE,
        "pass": r.deviation <= RWA_TOLERANCE,
        "omega_m": r.omega_m,
        "basis": r.labframe.basis,
    });
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

pub fn cmd_threshold(cfg: &RunConfig) -> Result<String> {
    let (drive, params) = cfg.resolved()?;
    let (a, b) = reduce_to_pairs(&drive, &params)?;
    Ok(match cfg.output.format {
        Format::Json => serde_json::to_string_pretty(&json!({
            "drive": drive,
            "pairs": [pair_json(&a), pair_json(&b)],
        }))? + "\n",
        Format::Csv => {
            let mut s = String::from("pair,chi_eff,delta_eff,chi_th,stable,max_real_eigenvalue\n");
            for p in [a, b] {
                let th = threshold(&p);
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    p.label.name(),
                    num(p.chi_eff),
                    num(p.delta_eff),
                    num(th.chi_th),
                    th.stable,
                    num(p.max_real_eigenvalue())
                );
            }
            s
        }
    })
}
