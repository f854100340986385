//! Model and field-law ingestion.
//!
//! Hierarchical models carry a `kind` tag:
//!
//! ```json
//! {"kind": "step", "x": [0.5, 1.0], "a": [0.7, 0.3]}
//! {"kind": "piecewise_linear", "x": [0.5, 1.0], "A": [0.75, 1.0]}
//! {"kind": "smooth", "x": [0.0, 0.5, 1.0], "slope": [2.0, 1.0, 0.0]}
//! {"kind": "rem"}
//! ```
//!
//! `smooth` lists knots from `0` to `1` and samples of `ā` there; `ā` is
//! linear in between and must integrate to one. Non-hierarchical models
//! have no tag: `{"n": 2, "L": [0.5, 0.5], "weights": {"1": 0.2, "1,2": 0.8}}`.

use std::path::Path;

use qgrem::model::{ConcaveHull, DistributionSpec, Envelope, FieldSpec, SmoothEnvelope};
use qgrem::nonhier::{chain_hull, greedy_chain, NonHierModel, NonHierModelFile};
use serde::Deserialize;

use crate::{CliError, CliResult};

const SMOOTH_NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum HierarchicalFile {
    Rem,
    Step {
        x: Vec<f64>,
        a: Vec<f64>,
    },
    PiecewiseLinear {
        x: Vec<f64>,
        #[serde(rename = "A")]
        values: Vec<f64>,
    },
    Smooth {
        x: Vec<f64>,
        slope: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelInput {
    /// Step or piecewise-linear distribution function.
    Hierarchical(DistributionSpec),
    /// Smooth profile with its piecewise-linear interpolation at the knots
    /// (used for finite-N sampling).
    Smooth {
        envelope: SmoothEnvelope,
        interpolation: DistributionSpec,
    },
    NonHierarchical(NonHierModel),
}

impl ModelInput {
    pub fn parse(text: &str) -> CliResult<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::validation(format!("model file is not JSON: {e}")))?;
        let tagged = value.get("kind").and_then(|k| k.as_str()).map(str::to_owned);
        match tagged.as_deref() {
            None | Some("nonhier") => {
                let mut value = value;
                if let Some(obj) = value.as_object_mut() {
                    obj.remove("kind");
                }
                let file: NonHierModelFile = serde_json::from_value(value)
                    .map_err(|e| CliError::validation(format!("malformed non-hierarchical model: {e}")))?;
                Ok(ModelInput::NonHierarchical(NonHierModel::try_from(file)?))
            }
            Some(_) => {
                let file: HierarchicalFile = serde_json::from_value(value)
                    .map_err(|e| CliError::validation(format!("malformed model: {e}")))?;
                Self::from_hierarchical(file)
            }
        }
    }

    fn from_hierarchical(file: HierarchicalFile) -> CliResult<Self> {
        Ok(match file {
            HierarchicalFile::Rem => ModelInput::Hierarchical(DistributionSpec::rem()),
            HierarchicalFile::Step { x, a } => ModelInput::Hierarchical(DistributionSpec::step(&x, &a)?),
            HierarchicalFile::PiecewiseLinear { x, values } => {
                ModelInput::Hierarchical(DistributionSpec::piecewise_linear(&x, &values)?)
            }
            HierarchicalFile::Smooth { x, slope } => {
                let envelope = SmoothEnvelope::from_derivative(&x, &slope)?;
                if (envelope.end() - 1.0).abs() > SMOOTH_NORMALIZATION_TOL
                    || (envelope.total() - 1.0).abs() > SMOOTH_NORMALIZATION_TOL
                {
                    return Err(CliError::validation(format!(
                        "smooth profile must span [0, 1] with total weight 1, got end {} and weight {}",
                        envelope.end(),
                        envelope.total()
                    )));
                }
                let knots: Vec<f64> = envelope.knots()[1..].to_vec();
                let mut values: Vec<f64> = knots.iter().map(|&k| envelope.envelope_at(k)).collect();
                *values.last_mut().expect("at least one knot") = 1.0;
                let interpolation = DistributionSpec::piecewise_linear(&knots, &values)?;
                ModelInput::Smooth {
                    envelope,
                    interpolation,
                }
            }
        })
    }

    /// Concave hull driving the GREM formulas; non-hierarchical models use
    /// the greedy chain.
    pub fn hull(&self) -> CliResult<Option<ConcaveHull>> {
        Ok(match self {
            ModelInput::Hierarchical(spec) => Some(qgrem::model::concave_hull(spec)?),
            ModelInput::NonHierarchical(model) => Some(chain_hull(model, &greedy_chain(model))?),
            ModelInput::Smooth { .. } => None,
        })
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))
}

/// Parses `constant:G`, `gaussian:M,S`, `discrete:FILE` (JSON list of
/// `[value, probability]`) or `empirical:FILE` (JSON list or whitespace
/// separated numbers).
pub fn parse_field(text: &str) -> CliResult<FieldSpec> {
    let (kind, arg) = text
        .split_once(':')
        .ok_or_else(|| CliError::usage(format!("--field: expected KIND:ARG, got {text:?}")))?;
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::usage(format!("--field: {s:?} is not a number")))
    };
    let spec = match kind {
        "constant" => FieldSpec::constant(number(arg)?)?,
        "gaussian" => {
            let (m, s) = arg
                .split_once(',')
                .ok_or_else(|| CliError::usage("--field gaussian:MEAN,STD"))?;
            FieldSpec::gaussian(number(m)?, number(s)?)?
        }
        "discrete" => {
            let atoms: Vec<(f64, f64)> = serde_json::from_str(&read_text(Path::new(arg))?)
                .map_err(|e| CliError::validation(format!("discrete law file: {e}")))?;
            FieldSpec::discrete(atoms)?
        }
        "empirical" => {
            let text = read_text(Path::new(arg))?;
            let sample: Vec<f64> = match serde_json::from_str(&text) {
                Ok(v) => v,
                Err(_) => text
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| CliError::validation(format!("empirical sample: {t:?} is not a number")))
                    })
                    .collect::<CliResult<_>>()?,
            };
            FieldSpec::empirical(sample)?
        }
        other => return Err(CliError::usage(format!("--field: unknown law {other:?}"))),
    };
    Ok(spec)
}
