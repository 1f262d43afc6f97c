//! Command-line front end: scenario loading, overrides, log serialization
//! and run reports.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use rcbf_swarm::{validate_scenario, ScenarioConfig, TrajectoryLog};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const CONFIG_FILE: &str = "config.toml";

pub const TRAJECTORY_HEADER: [&str; 18] = [
    "t",
    "agent_id",
    "role",
    "px",
    "py",
    "pz",
    "vx",
    "vy",
    "vz",
    "anom_x",
    "anom_y",
    "anom_z",
    "a_x",
    "a_y",
    "a_z",
    "n_active_constraints",
    "slack_total",
    "saturated",
];
pub const EVENTS_HEADER: [&str; 5] = ["t", "kind", "agent_a", "agent_b", "detail"];

#[derive(Debug, Parser)]
#[command(
    name = "rcbf-swarm",
    version,
    about = "Run multi-effector engagement scenarios with and without the safety filter"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write its logs.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        scenario: String,
        #[arg(long, value_enum, default_value_t = Switch::On)]
        filter: Switch,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Check a scenario and print every violated invariant.
    Validate { scenario: String },
    /// Run the baseline and the filtered case and print both reports.
    Compare {
        scenario: String,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, clap::Args)]
pub struct OutputArgs {
    /// Directory that receives one sub-directory per run.
    #[arg(long, env = "RCBF_SWARM_OUT", default_value = "runs")]
    pub out: PathBuf,
    /// Replace a config value, e.g. `safety.r_s=350` or `agents.0.bounds.u_max=400`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("scenario is invalid:\n  {}", .0.join("\n  "))]
    InvalidScenario(Vec<String>),
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("bad override `{0}`: {1}")]
    Override(String, String),
    #[error("simulation failed: {0}")]
    Solver(rcbf_swarm::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::InvalidScenario(_) | CliError::Parse(_) | CliError::Override(..) => 2,
            CliError::Solver(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

impl From<rcbf_swarm::Error> for CliError {
    fn from(e: rcbf_swarm::Error) -> Self {
        match e {
            rcbf_swarm::Error::InvalidScenario(v) => CliError::InvalidScenario(v),
            rcbf_swarm::Error::Parse(e) => CliError::Parse(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads a scenario from a file, falling back to the bundled scenarios when
/// no such file exists.
pub fn load_scenario(arg: &str) -> Result<ScenarioConfig, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        return Ok(ScenarioConfig::from_toml_str(&text)?);
    }
    ScenarioConfig::bundled(arg).ok_or_else(|| CliError::Io {
        path: path.to_path_buf(),
        source: io::Error::new(io::ErrorKind::NotFound, "no such file or bundled scenario"),
    })
}

/// Applies `key=value` overrides. Keys are dotted paths into the scenario
/// tree; numeric segments index arrays. Every key must already exist.
pub fn apply_overrides(
    cfg: &ScenarioConfig,
    overrides: &[String],
) -> Result<ScenarioConfig, CliError> {
    if overrides.is_empty() {
        return Ok(cfg.clone());
    }
    let mut tree = toml::Value::try_from(cfg).map_err(|e| CliError::Parse(e.to_string()))?;
    for item in overrides {
        let bad = |msg: &str| CliError::Override(item.clone(), msg.to_string());
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| bad("expected KEY=VALUE"))?;
        let mut slot = &mut tree;
        for seg in key.trim().split('.') {
            slot = match slot {
                toml::Value::Table(t) => t.get_mut(seg),
                toml::Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
                _ => None,
            }
            .ok_or_else(|| bad("no such key"))?;
        }
        *slot = parse_like(slot, raw.trim()).ok_or_else(|| bad("value has the wrong type"))?;
    }
    let out: ScenarioConfig = tree
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
    Ok(out)
}

fn parse_like(current: &toml::Value, raw: &str) -> Option<toml::Value> {
    let parsed = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    match (current, parsed) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => Some(toml::Value::Float(i as f64)),
        (c, p) if c.same_type(&p) => Some(p),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Baseline,
    Filtered,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Filtered => "filtered",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

/// Summary of one run, copied from the log's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub mode: Mode,
    pub interceptions: usize,
    pub collisions: usize,
    pub min_effector_separation: f64,
    pub first_collision_time: Option<f64>,
    pub filter_activations: usize,
    pub total_slack: f64,
    pub wall_clock: Duration,
}

impl RunReport {
    pub fn new(scenario: &str, mode: Mode, log: &TrajectoryLog, wall_clock: Duration) -> Self {
        let o = &log.outcome;
        Self {
            scenario: scenario.to_string(),
            mode,
            interceptions: o.interceptions,
            collisions: o.collisions,
            min_effector_separation: o.min_effector_separation,
            first_collision_time: o.first_collision_time,
            filter_activations: o.filter_activations,
            total_slack: o.total_slack,
            wall_clock,
        }
    }

    fn rows(&self) -> [(&'static str, String); 7] {
        [
            ("interceptions", self.interceptions.to_string()),
            ("collisions", self.collisions.to_string()),
            (
                "min effector separation (m)",
                format!("{:.3}", self.min_effector_separation),
            ),
            (
                "first collision (s)",
                self.first_collision_time
                    .map_or_else(|| "-".into(), |t| format!("{t:.3}")),
            ),
            ("filter activations", self.filter_activations.to_string()),
            ("total slack", format!("{:.6e}", self.total_slack)),
            (
                "wall clock (ms)",
                format!("{:.1}", self.wall_clock.as_secs_f64() * 1e3),
            ),
        ]
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {} ({})", self.scenario, self.mode)?;
        for (label, value) in self.rows() {
            writeln!(f, "  {label:<30}{value}")?;
        }
        Ok(())
    }
}

/// Renders two reports as one side-by-side table.
pub fn side_by_side(left: &RunReport, right: &RunReport) -> String {
    let mut s = format!(
        "scenario {}\n  {:<30}{:>16}{:>16}\n",
        left.scenario, "", left.mode, right.mode
    );
    for ((label, a), (_, b)) in left.rows().into_iter().zip(right.rows()) {
        s += &format!("  {label:<30}{a:>16}{b:>16}\n");
    }
    s
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the trajectory CSV, the events CSV and the effective config into
/// `dir`, creating it if needed.
pub fn write_run(dir: &Path, cfg: &ScenarioConfig, log: &TrajectoryLog) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let path = dir.join(TRAJECTORY_FILE);
    let csv_err = |p: &Path, e: csv::Error| CliError::Io {
        path: p.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(TRAJECTORY_HEADER)
        .map_err(|e| csv_err(&path, e))?;
    for rec in &log.records {
        for a in &rec.agents {
            let mut row = vec![num(rec.time), a.id.to_string(), a.role.as_str().to_string()];
            for v in [a.position, a.velocity, a.nominal, a.applied] {
                row.extend(v.to_array().map(num));
            }
            row.push(a.n_active_constraints.to_string());
            row.push(num(a.slack_total));
            row.push(u8::from(a.saturated).to_string());
            w.write_record(&row).map_err(|e| csv_err(&path, e))?;
        }
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join(EVENTS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(EVENTS_HEADER)
        .map_err(|e| csv_err(&path, e))?;
    for e in &log.events {
        let agent = |k: usize| e.agents.get(k).map_or_else(String::new, u32::to_string);
        w.write_record([
            num(e.time),
            e.kind.to_string(),
            agent(0),
            agent(1),
            e.detail.clone(),
        ])
        .map_err(|err| csv_err(&path, err))?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join(CONFIG_FILE);
    let text = cfg
        .to_toml_string()
        .map_err(|e| CliError::Parse(e.to_string()))?;
    fs::write(&path, text).map_err(io_err(&path))
}

/// Runs one mode, writes its logs under `out/<scenario>-<mode>` and returns
/// the report.
pub fn simulate(cfg: &ScenarioConfig, mode: Mode, out: &Path) -> Result<RunReport, CliError> {
    let mut cfg = cfg.clone();
    cfg.sim.filter_enabled = mode == Mode::Filtered;
    let start = Instant::now();
    let log = rcbf_swarm::run(&cfg)?;
    let elapsed = start.elapsed();
    write_run(&run_dir(out, &cfg.name, mode), &cfg, &log)?;
    Ok(RunReport::new(&cfg.name, mode, &log, elapsed))
}

pub fn run_dir(out: &Path, scenario: &str, mode: Mode) -> PathBuf {
    let name = if scenario.is_empty() {
        "scenario"
    } else {
        scenario
    };
    out.join(format!("{name}-{mode}"))
}

fn load(scenario: &str, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    let cfg = apply_overrides(&load_scenario(scenario)?, overrides)?;
    let violations = validate_scenario(&cfg);
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::InvalidScenario(violations))
    }
}

/// Executes a parsed command line, printing human-readable output to `out`.
pub fn execute(cli: &Cli, out: &mut impl Write) -> Result<(), CliError> {
    let stdout = |e| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    match &cli.command {
        Command::Validate { scenario } => {
            load(scenario, &[])?;
            writeln!(out, "{scenario}: ok").map_err(stdout)
        }
        Command::Run {
            scenario,
            filter,
            output,
        } => {
            let cfg = load(scenario, &output.overrides)?;
            let mode = if *filter == Switch::On {
                Mode::Filtered
            } else {
                Mode::Baseline
            };
            let report = simulate(&cfg, mode, &output.out)?;
            write!(out, "{report}").map_err(stdout)?;
            writeln!(
                out,
                "  logs in {}",
                run_dir(&output.out, &cfg.name, mode).display()
            )
            .map_err(stdout)
        }
        Command::Compare { scenario, output } => {
            let cfg = load(scenario, &output.overrides)?;
            let base = simulate(&cfg, Mode::Baseline, &output.out)?;
            let filt = simulate(&cfg, Mode::Filtered, &output.out)?;
            write!(out, "{}", side_by_side(&base, &filt)).map_err(stdout)?;
            writeln!(out, "  logs in {}", output.out.display()).map_err(stdout)
        }
    }
}
