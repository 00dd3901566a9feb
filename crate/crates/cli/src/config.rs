//! Run configuration: built-in defaults, overlaid by a flat JSON file,
//! overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use circadian_core::integrate::{DEFAULT_DDE_STEP, DEFAULT_ODE_STEP};
use circadian_core::smallgain::{DEFAULT_MAX_ITER, DEFAULT_SEEDS, DEFAULT_TOL};
use circadian_core::{ModelParams, DEFAULT_MBAR};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ode,
    Dde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CharSystem {
    Mrna,
    Per,
}

/// Every resolved setting of a run. Serializes to the same flat JSON object
/// accepted by `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub params: ModelParams,
    pub mbar: f64,
    pub mode: Mode,
    pub system: CharSystem,
    /// Integration step; `None` picks the mode default.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub delay: f64,
    pub transient_cut: f64,
    pub init: Vec<f64>,
    pub stride: usize,
    pub u0: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seeds: Vec<f64>,
    pub grid_points: usize,
    /// Upper end of the characteristic grid; `None` picks a per-system default.
    pub grid_max: Option<f64>,
    pub sweep_vs: Vec<f64>,
    pub sweep_delay: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::default(),
            mbar: DEFAULT_MBAR,
            mode: Mode::Ode,
            system: CharSystem::Mrna,
            dt: None,
            t_end: 1000.0,
            delay: 0.0,
            transient_cut: 500.0,
            init: vec![0.2; 5],
            stride: 1,
            u0: 0.0,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            seeds: DEFAULT_SEEDS.to_vec(),
            grid_points: 101,
            grid_max: None,
            sweep_vs: vec![0.3, 0.4, 0.5, 0.54],
            sweep_delay: vec![0.0, 10.0, 100.0],
        }
    }
}

impl RunConfig {
    /// Integration step for `mode`.
    pub fn step(&self, mode: Mode) -> f64 {
        self.dt.unwrap_or(match mode {
            Mode::Ode => DEFAULT_ODE_STEP,
            Mode::Dde => DEFAULT_DDE_STEP,
        })
    }

    pub fn char_grid_max(&self) -> f64 {
        self.grid_max.unwrap_or(match self.system {
            CharSystem::Mrna => 3.0,
            CharSystem::Per => self.params.ks * self.mbar,
        })
    }

    /// Copy with every defaulted knob made explicit, for the echo.
    pub fn resolved(&self, mode: Mode) -> Self {
        Self {
            dt: Some(self.step(mode)),
            grid_max: Some(self.char_grid_max()),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), CliError> {
        self.params
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let positive = [
            ("mbar", self.mbar),
            ("t_end", self.t_end),
            ("tol", self.tol),
        ];
        for (key, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(CliError::Usage(format!("`{key}` must be positive, got {value}")));
            }
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(CliError::Usage(format!("`dt` must be positive, got {dt}")));
            }
        }
        if self.init.len() != 5 || self.init.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(CliError::Usage(format!(
                "`init` needs five nonnegative values, got {:?}",
                self.init
            )));
        }
        let nonnegative = [
            ("delay", self.delay),
            ("transient_cut", self.transient_cut),
            ("u0", self.u0),
        ];
        for (key, value) in nonnegative {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(CliError::Usage(format!("`{key}` must be nonnegative, got {value}")));
            }
        }
        if self.grid_points < 2 {
            return Err(CliError::Usage("`grid_points` must be at least 2".into()));
        }
        Ok(())
    }
}

/// Command-line flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Flat JSON config file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Maximal transcription rate.
    #[arg(long, global = true)]
    pub vs: Option<f64>,
    /// Upper edge of the mRNA state space.
    #[arg(long, global = true)]
    pub mbar: Option<f64>,
    /// Override any model parameter, e.g. `--param V1=3.0`.
    #[arg(long = "param", global = true, value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Feedback delay in hours (simulate, sweep).
    #[arg(long, global = true)]
    pub delay: Option<f64>,
    #[arg(long = "t-end", global = true)]
    pub t_end: Option<f64>,
    /// Integration step in hours.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Initial state: one value for all five species or five comma-separated values.
    #[arg(long, global = true, value_name = "V[,V,V,V,V]")]
    pub init: Option<String>,
    /// Spiderweb seed.
    #[arg(long, global = true)]
    pub u0: Option<f64>,
    /// Comma-separated seeds for the small-gain verdict (sweep).
    #[arg(long, global = true)]
    pub seeds: Option<String>,
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long = "transient-cut", global = true)]
    pub transient_cut: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, global = true, value_enum)]
    pub system: Option<CharSystem>,
    #[arg(long = "grid-points", global = true)]
    pub grid_points: Option<usize>,
    #[arg(long = "grid-max", global = true)]
    pub grid_max: Option<f64>,
    /// Comma-separated vs values (sweep).
    #[arg(long = "sweep-vs", global = true)]
    pub sweep_vs: Option<String>,
    /// Comma-separated delays (sweep).
    #[arg(long = "sweep-delay", global = true)]
    pub sweep_delay: Option<String>,
    /// Keep every N-th trajectory row.
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    /// Primary output file (stdout when absent).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// SVG plot (spiderweb, simulate).
    #[arg(long, global = true, value_name = "PATH")]
    pub svg: Option<PathBuf>,
    /// Sweep worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--{flag}: cannot parse `{v}` as a number")))
        })
        .collect()
}

fn number(value: f64) -> Value {
    serde_json::Number::from_f64(value)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn numbers(values: &[f64]) -> Value {
    Value::Array(values.iter().copied().map(number).collect())
}

impl Flags {
    /// Flag values as config-file keys.
    fn overrides(&self, known: &Map<String, Value>) -> Result<Map<String, Value>, CliError> {
        let mut map = Map::new();
        for assignment in &self.params {
            let (key, value) = assignment.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("--param expects KEY=VALUE, got `{assignment}`"))
            })?;
            if !known.contains_key(key) {
                return Err(CliError::Usage(format!("--param: unknown key `{key}`")));
            }
            let value: Value = serde_json::from_str(value.trim()).map_err(|_| {
                CliError::Usage(format!("--param {key}: cannot parse `{value}`"))
            })?;
            map.insert(key.to_string(), value);
        }

        let scalars = [
            ("vs", self.vs),
            ("mbar", self.mbar),
            ("delay", self.delay),
            ("t_end", self.t_end),
            ("dt", self.dt),
            ("u0", self.u0),
            ("tol", self.tol),
            ("transient_cut", self.transient_cut),
            ("grid_max", self.grid_max),
        ];
        for (key, value) in scalars {
            if let Some(v) = value {
                map.insert(key.into(), number(v));
            }
        }
        let counts = [
            ("max_iter", self.max_iter),
            ("grid_points", self.grid_points),
            ("stride", self.stride),
        ];
        for (key, value) in counts {
            if let Some(v) = value {
                map.insert(key.into(), Value::from(v));
            }
        }
        if let Some(text) = &self.init {
            let values = parse_list("init", text)?;
            let values = match values.len() {
                1 => vec![values[0]; 5],
                5 => values,
                n => {
                    return Err(CliError::Usage(format!(
                        "--init takes one or five values, got {n}"
                    )))
                }
            };
            map.insert("init".into(), numbers(&values));
        }
        let lists = [
            ("seeds", &self.seeds),
            ("sweep_vs", &self.sweep_vs),
            ("sweep_delay", &self.sweep_delay),
        ];
        for (key, text) in lists {
            if let Some(text) = text {
                map.insert(key.into(), numbers(&parse_list(key, text)?));
            }
        }
        if let Some(mode) = self.mode {
            map.insert("mode".into(), serde_json::to_value(mode).unwrap());
        }
        if let Some(system) = self.system {
            map.insert("system".into(), serde_json::to_value(system).unwrap());
        }
        Ok(map)
    }
}

fn read_config_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Usage(format!(
            "config {} must be a flat JSON object",
            path.display()
        ))),
        Err(e) => Err(CliError::Usage(format!("config {}: {e}", path.display()))),
    }
}

/// Merges defaults, the optional config file and flags (later wins).
pub fn parse_config(file: Option<&Path>, flags: &Flags) -> Result<RunConfig, CliError> {
    let mut merged = match serde_json::to_value(RunConfig::default()) {
        Ok(Value::Object(map)) => map,
        _ => unreachable!("RunConfig serializes to an object"),
    };
    let known = merged.clone();

    if let Some(path) = file {
        for (key, value) in read_config_file(path)? {
            if !known.contains_key(&key) {
                return Err(CliError::Usage(format!(
                    "config {}: unknown key `{key}`",
                    path.display()
                )));
            }
            merged.insert(key, value);
        }
    }
    merged.extend(flags.overrides(&known)?);

    let cfg: RunConfig = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
