use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::InputError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Cartan split of a matrix into skew and symmetric parts
    Split,
    /// Polar decomposition and exp(k) exp(p) factorization of a matrix
    Polar,
    /// Check exp(k - p) = exp(k') exp(-p') and the group involution
    DualCheck,
    /// Parallel transport along a curve
    Transport,
    /// Sample rectangle holonomies and estimate the holonomy algebra
    Holonomy,
    /// Loop pairing defect of a connection and its dual
    Duality,
    /// Fisher metric, Amari tensor and Christoffel symbols at a point
    StatReport,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Split => "split",
            Command::Polar => "polar",
            Command::DualCheck => "dual-check",
            Command::Transport => "transport",
            Command::Holonomy => "holonomy",
            Command::Duality => "duality",
            Command::StatReport => "stat-report",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FrameArg {
    Coordinate,
    Orthonormal,
}

/// Config file schema. Every field is optional; flags win over the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub matrix: Option<PathBuf>,
    pub k: Option<PathBuf>,
    pub p: Option<PathBuf>,
    #[serde(rename = "loop")]
    pub loop_path: Option<PathBuf>,
    pub form: Option<PathBuf>,
    pub family: Option<String>,
    pub alpha: Option<f64>,
    pub frame: Option<FrameArg>,
    pub base: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub w: Option<Vec<f64>>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub max_side: Option<f64>,
    pub closure: Option<bool>,
    pub tol: Option<f64>,
    pub fd_step: Option<f64>,
    pub samples_out: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Flag overrides; the same fields as [`RunConfig`].
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON config file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Matrix file (JSON array of rows)
    #[arg(long, global = true, value_name = "PATH")]
    pub matrix: Option<PathBuf>,
    /// Skew matrix file for dual-check
    #[arg(long, global = true, value_name = "PATH")]
    pub k: Option<PathBuf>,
    /// Symmetric matrix file for dual-check
    #[arg(long, global = true, value_name = "PATH")]
    pub p: Option<PathBuf>,
    /// Curve or loop file (JSON rows [t, x1, ..., xd])
    #[arg(long = "loop", global = true, value_name = "PATH")]
    pub loop_path: Option<PathBuf>,
    /// Grid-sampled connection form file
    #[arg(long, global = true, value_name = "PATH")]
    pub form: Option<PathBuf>,
    /// Statistical family key (gaussian1d | bernoulli)
    #[arg(long, global = true, value_name = "KEY")]
    pub family: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Frame for family connection forms
    #[arg(long, global = true, value_enum)]
    pub frame: Option<FrameArg>,
    /// Base point, comma separated
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub base: Option<Vec<f64>>,
    /// First vector, comma separated
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub v: Option<Vec<f64>>,
    /// Second vector, comma separated
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub w: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub count: Option<usize>,
    /// Largest rectangle side for holonomy sampling
    #[arg(long, global = true)]
    pub max_side: Option<f64>,
    /// Close the estimated holonomy algebra under brackets
    #[arg(long, global = true)]
    pub closure: Option<bool>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Finite-difference step for Christoffel symbols and gauges
    #[arg(long, global = true)]
    pub fd_step: Option<f64>,
    /// Also write holonomy samples as JSON lines to this path
    #[arg(long, global = true, value_name = "PATH")]
    pub samples_out: Option<PathBuf>,
    /// Report path (stdout when absent)
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

pub const DEFAULT_STEPS: usize = 1024;
pub const DEFAULT_COUNT: usize = 100;
pub const DEFAULT_MAX_SIDE: f64 = 0.2;
pub const DEFAULT_TOL: f64 = 1e-8;

/// Fully resolved parameters, embedded in every report. `out` is left out
/// so that a report reproduces itself regardless of where it was written.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Resolved {
    pub command: Command,
    pub matrix: Option<PathBuf>,
    pub k: Option<PathBuf>,
    pub p: Option<PathBuf>,
    #[serde(rename = "loop")]
    pub loop_path: Option<PathBuf>,
    pub form: Option<PathBuf>,
    pub family: Option<String>,
    pub alpha: f64,
    pub frame: FrameArg,
    pub base: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub w: Option<Vec<f64>>,
    pub steps: usize,
    pub seed: u64,
    pub count: usize,
    pub max_side: f64,
    pub closure: bool,
    pub tol: f64,
    pub fd_step: f64,
    pub samples_out: Option<PathBuf>,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

pub fn load_config(path: &Path) -> Result<RunConfig, InputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        InputError(format!("malformed config {} at line {}, column {}: {e}", path.display(), e.line(), e.column()))
    })
}

pub fn resolve(cmd: Option<Command>, flags: Overrides) -> Result<Resolved, InputError> {
    let file = match &flags.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let command = match (cmd, file.command) {
        (Some(c), _) => c,
        (None, Some(c)) => c,
        (None, None) => return Err(InputError("no command given on the command line or in the config".into())),
    };
    let r = Resolved {
        command,
        matrix: flags.matrix.or(file.matrix),
        k: flags.k.or(file.k),
        p: flags.p.or(file.p),
        loop_path: flags.loop_path.or(file.loop_path),
        form: flags.form.or(file.form),
        family: flags.family.or(file.family),
        alpha: flags.alpha.or(file.alpha).unwrap_or(0.0),
        frame: flags.frame.or(file.frame).unwrap_or(FrameArg::Orthonormal),
        base: flags.base.or(file.base),
        v: flags.v.or(file.v),
        w: flags.w.or(file.w),
        steps: flags.steps.or(file.steps).unwrap_or(DEFAULT_STEPS),
        seed: flags.seed.or(file.seed).unwrap_or(0),
        count: flags.count.or(file.count).unwrap_or(DEFAULT_COUNT),
        max_side: flags.max_side.or(file.max_side).unwrap_or(DEFAULT_MAX_SIDE),
        closure: flags.closure.or(file.closure).unwrap_or(true),
        tol: flags.tol.or(file.tol).unwrap_or(DEFAULT_TOL),
        fd_step: flags.fd_step.or(file.fd_step).unwrap_or(cartan_dual::statmanifold::DEFAULT_FD_STEP),
        samples_out: flags.samples_out.or(file.samples_out),
        format: flags.format.or(file.format).unwrap_or(Format::Json),
        out: flags.out.or(file.out),
    };
    r.validate()?;
    Ok(r)
}

impl Resolved {
    fn validate(&self) -> Result<(), InputError> {
        if self.steps == 0 {
            return Err(InputError("steps must be at least 1".into()));
        }
        if self.count == 0 {
            return Err(InputError("count must be at least 1".into()));
        }
        if !self.alpha.is_finite() {
            return Err(InputError("alpha must be finite".into()));
        }
        for (name, v) in [("tol", self.tol), ("maxSide", self.max_side), ("fdStep", self.fd_step)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(InputError(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for list in [&self.base, &self.v, &self.w].into_iter().flatten() {
            if list.iter().any(|x| !x.is_finite()) {
                return Err(InputError("vector entries must be finite".into()));
            }
        }
        for path in [&self.matrix, &self.k, &self.p, &self.loop_path, &self.form].into_iter().flatten() {
            if !path.is_file() {
                return Err(InputError(format!("input file {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    /// The config document as embedded in reports.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
