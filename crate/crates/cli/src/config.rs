//! Command-line arguments and their validated form, [`RunConfig`].

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use qgrem::model::FieldSpec;
use serde::Serialize;

use crate::input::{parse_field, read_text, ModelInput};
use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "qgrem", version, about = "Quantum GREM/CREM pressures, phase diagrams and finite-N checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Classical and quantum pressure on a β × field grid.
    Pressure(GridArgs),
    /// Pressure and magnetization on a β × Γ grid plus transition lines.
    PhaseDiagram(PhaseArgs),
    /// Exhaustive non-hierarchical formulas next to the greedy chain.
    Nonhier(GridArgs),
    /// Finite-N convergence, concentration and sign-invariance checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Model JSON file.
    #[arg(long)]
    pub model: PathBuf,
    /// Field law: constant:G | discrete:FILE | gaussian:M,S | empirical:FILE.
    #[arg(long)]
    pub field: Option<String>,
    /// β grid `start:stop:count` or a single value.
    #[arg(long)]
    pub beta: String,
    /// Constant-field grid `start:stop:count` or a single value.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub beta: String,
    #[arg(long)]
    pub gamma: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Transition-line CSV.
    #[arg(long)]
    pub transitions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long)]
    pub beta: String,
    #[arg(long)]
    pub gamma: Option<String>,
    /// Comma-separated spin counts.
    #[arg(long = "N", value_name = "N,..")]
    pub sizes: String,
    #[arg(long, default_value_t = 400)]
    pub replicas: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Budget for |mean Φ_N - limit| at the largest N.
    #[arg(long, default_value_t = 0.15)]
    pub tolerance: f64,
    /// Relative tolerance of the sign-invariance check.
    #[arg(long, default_value_t = 1e-8)]
    pub sign_tolerance: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    /// Largest N evaluated exactly under `--method auto`.
    #[arg(long, default_value_t = 10)]
    pub exact_max: usize,
    /// Probe vectors of the stochastic estimator.
    #[arg(long, default_value_t = 48)]
    pub probes: usize,
    /// Comma-separated subset of convergence,concentration,sign.
    #[arg(long, default_value = "convergence,concentration,sign")]
    pub checks: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Auto,
    Exact,
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Convergence,
    Concentration,
    Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Pressure,
    PhaseDiagram,
    Nonhier,
    Verify,
}

/// Evenly spaced grid; `count = 1` is the single point `start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    /// Parses `start:stop:count` or a single number.
    pub fn parse(text: &str, name: &str) -> CliResult<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let number = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::usage(format!("--{name}: {s:?} is not a finite number")))
        };
        let grid = match parts.as_slice() {
            [v] => {
                let v = number(v)?;
                Grid {
                    start: v,
                    stop: v,
                    count: 1,
                }
            }
            [a, b, n] => Grid {
                start: number(a)?,
                stop: number(b)?,
                count: n
                    .trim()
                    .parse()
                    .map_err(|_| CliError::usage(format!("--{name}: count {n:?} is not an integer")))?,
            },
            _ => return Err(CliError::usage(format!("--{name}: expected start:stop:count, got {text:?}"))),
        };
        if grid.count == 0 {
            return Err(CliError::usage(format!("--{name}: empty grid")));
        }
        if grid.start > grid.stop {
            return Err(CliError::usage(format!("--{name}: start {} exceeds stop {}", grid.start, grid.stop)));
        }
        Ok(grid)
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.stop } else { self.start + step * i as f64 })
            .collect()
    }
}

/// A field law with the label used in the `gamma_or_law` column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldPoint {
    pub label: String,
    pub field: FieldSpec,
    /// `Some(Γ)` for a constant field.
    pub gamma: Option<f64>,
}

impl FieldPoint {
    pub fn from_spec(field: FieldSpec) -> Self {
        let gamma = field.constant_strength();
        let label = match gamma {
            Some(g) => crate::output::fmt_f64(g),
            None => field.label(),
        };
        Self { label, field, gamma }
    }
}

/// Validated run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(skip)]
    pub model_path: PathBuf,
    /// Raw model text; hashed into the manifest.
    pub model_source: String,
    #[serde(skip)]
    pub model: ModelInput,
    pub field_law: Option<String>,
    pub fields: Vec<FieldPoint>,
    pub beta: Grid,
    pub gamma: Option<Grid>,
    pub sizes: Vec<usize>,
    pub replicas: usize,
    pub seed: Option<u64>,
    pub tolerance: f64,
    pub sign_tolerance: f64,
    pub method: MethodArg,
    pub exact_max: usize,
    pub probes: usize,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub transitions: Option<PathBuf>,
}

impl RunConfig {
    fn base(command: Command, model_path: &Path, beta: &str) -> CliResult<Self> {
        let model_source = read_text(model_path)?;
        let model = ModelInput::parse(&model_source)?;
        Ok(Self {
            command,
            model_path: model_path.to_path_buf(),
            model_source,
            model,
            field_law: None,
            fields: Vec::new(),
            beta: Grid::parse(beta, "beta")?,
            gamma: None,
            sizes: Vec::new(),
            replicas: 0,
            seed: None,
            tolerance: 0.0,
            sign_tolerance: 0.0,
            method: MethodArg::Auto,
            exact_max: 0,
            probes: 0,
            checks: Vec::new(),
            out: None,
            transitions: None,
        })
    }

    fn set_fields(&mut self, field: Option<&str>, gamma: Option<&str>) -> CliResult<()> {
        match (field, gamma) {
            (Some(_), Some(_)) => {
                return Err(CliError::usage("give either --field or a --gamma grid, not both"));
            }
            (None, None) => return Err(CliError::usage("a field is required: --field LAW or --gamma GRID")),
            (Some(law), None) => {
                self.field_law = Some(law.to_string());
                self.fields = vec![FieldPoint::from_spec(parse_field(law)?)];
            }
            (None, Some(g)) => {
                let grid = Grid::parse(g, "gamma")?;
                self.gamma = Some(grid);
                self.fields = grid
                    .points()
                    .into_iter()
                    .map(|g| FieldSpec::constant(g).map(FieldPoint::from_spec))
                    .collect::<qgrem::Result<_>>()?;
            }
        }
        Ok(())
    }

    /// Validates parsed arguments into a run configuration.
    pub fn from_cli(cli: Cli) -> CliResult<Self> {
        match cli.command {
            CommandArgs::Pressure(a) => Self::from_grid_args(Command::Pressure, a),
            CommandArgs::Nonhier(a) => Self::from_grid_args(Command::Nonhier, a),
            CommandArgs::PhaseDiagram(a) => {
                let mut cfg = Self::base(Command::PhaseDiagram, &a.model, &a.beta)?;
                cfg.set_fields(None, Some(&a.gamma))?;
                cfg.out = a.out;
                cfg.transitions = a.transitions;
                Ok(cfg)
            }
            CommandArgs::Verify(a) => {
                let seed = a.seed.ok_or_else(|| CliError::usage("verify runs need --seed"))?;
                let mut cfg = Self::base(Command::Verify, &a.model, &a.beta)?;
                cfg.set_fields(a.field.as_deref(), a.gamma.as_deref())?;
                cfg.sizes = parse_sizes(&a.sizes)?;
                if a.replicas == 0 {
                    return Err(CliError::usage("--replicas must be at least 1"));
                }
                if a.probes == 0 {
                    return Err(CliError::usage("--probes must be at least 1"));
                }
                if !(a.tolerance > 0.0) || !(a.sign_tolerance > 0.0) {
                    return Err(CliError::usage("tolerances must be positive"));
                }
                cfg.replicas = a.replicas;
                cfg.seed = Some(seed);
                cfg.tolerance = a.tolerance;
                cfg.sign_tolerance = a.sign_tolerance;
                cfg.method = a.method;
                cfg.exact_max = a.exact_max;
                cfg.probes = a.probes;
                cfg.checks = parse_checks(&a.checks)?;
                cfg.out = a.out;
                Ok(cfg)
            }
        }
    }

    fn from_grid_args(command: Command, a: GridArgs) -> CliResult<Self> {
        let mut cfg = Self::base(command, &a.model, &a.beta)?;
        cfg.set_fields(a.field.as_deref(), a.gamma.as_deref())?;
        cfg.out = a.out;
        Ok(cfg)
    }

    /// Hex SHA-256 of the canonical JSON form (output paths excluded).
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }
}

fn parse_sizes(text: &str) -> CliResult<Vec<usize>> {
    let sizes = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| CliError::usage(format!("--N: {s:?} is not a positive integer")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::usage("--N: sizes must be strictly increasing"));
    }
    Ok(sizes)
}

fn parse_checks(text: &str) -> CliResult<Vec<Check>> {
    text.split(',')
        .map(|s| match s.trim() {
            "convergence" => Ok(Check::Convergence),
            "concentration" => Ok(Check::Concentration),
            "sign" => Ok(Check::Sign),
            other => Err(CliError::usage(format!("--checks: unknown check {other:?}"))),
        })
        .collect()
}
