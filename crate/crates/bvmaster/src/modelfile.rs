//! Declarative model files.
//!
//! A model file is TOML: a flat set of keys describing the class, the
//! monomial order, the action (as polynomial text, see [`crate::poly`]),
//! and a `[[variables]]` array declaring the graded variables with their
//! BV pairing. Parity is not declared — in both model classes a variable
//! anticommutes exactly when its ghost number is odd, so it is derived.
//!
//! ```toml
//! class = "isolated"
//! action = "1/3 * x^3"
//! truncation = 6
//!
//! [[variables]]
//! name = "x"
//! ghost = 0
//! partner = "eta"
//!
//! [[variables]]
//! name = "eta"
//! ghost = -1
//! partner = "x"
//! ```
//!
//! Gauged models additionally name the special variables:
//!
//! ```toml
//! class = "gauged"
//! scaling = "p"
//! coordinates = ["x1", "x2", "x3"]
//! ghost_field = "c"
//! ghost_antifield = "cs"
//! ```

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use bvqft::algebra::{Parity, Variable, VariableTable};
use bvqft::groebner::MonomialOrder;
use bvqft::model::{GaugedSpec, IsolatedSpec, ModelSpec};
use bvqft::scalar::Rat;
use serde::Deserialize;

use crate::poly::{parse_polynomial, PolyError};

/// Errors turning file text into a [`ModelFile`].
#[derive(Debug)]
pub enum ModelFileError {
    /// TOML-level syntax or type error (message carries line/column).
    Toml(toml::de::Error),
    /// A polynomial field failed to parse; the position is relative to the
    /// start of that field's string.
    Polynomial {
        /// Which key held the polynomial.
        field: &'static str,
        /// The positioned parse failure.
        error: PolyError,
    },
    /// The declarations are well-formed but inconsistent.
    Structure(String),
}

impl fmt::Display for ModelFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelFileError::Toml(e) => write!(f, "{e}"),
            ModelFileError::Polynomial { field, error } => {
                write!(f, "in `{field}` at {error}")
            }
            ModelFileError::Structure(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for ModelFileError {}

fn default_order() -> String {
    "grevlex".into()
}

fn default_degree_cap() -> u32 {
    40
}

fn default_weight() -> i64 {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariable {
    name: String,
    ghost: i32,
    #[serde(default = "default_weight")]
    weight: i64,
    #[serde(default)]
    partner: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelFile {
    class: String,
    #[serde(default = "default_order")]
    order: String,
    #[serde(default = "default_degree_cap")]
    degree_cap: u32,
    #[serde(default)]
    truncation: Option<usize>,
    action: String,
    variables: Vec<RawVariable>,
    #[serde(default)]
    expectation: Option<Vec<String>>,
    #[serde(default)]
    output: Option<String>,
    #[serde(default)]
    scaling: Option<String>,
    #[serde(default)]
    coordinates: Option<Vec<String>>,
    #[serde(default)]
    ghost_field: Option<String>,
    #[serde(default)]
    ghost_antifield: Option<String>,
}

/// A fully parsed model file: the spec to build, plus the run options the
/// file carries alongside it.
#[derive(Clone, Debug)]
pub struct ModelFile {
    /// Construction data for [`bvqft::model::build_model`].
    pub spec: ModelSpec,
    /// Default solve order when the command line gives none.
    pub truncation: Option<usize>,
    /// Expectation vector over the cohomology basis; `None` selects the
    /// residue-style default (the socle class).
    pub expectation: Option<Vec<Rat>>,
    /// Default output path when the command line gives none.
    pub output: Option<String>,
}

fn structure(msg: impl Into<String>) -> ModelFileError {
    ModelFileError::Structure(msg.into())
}

fn resolve(table: &Arc<VariableTable>, name: &str, what: &str) -> Result<usize, ModelFileError> {
    table
        .index_of(name)
        .ok_or_else(|| structure(format!("{what} `{name}` is not a declared variable")))
}

/// Parses model-file text.
pub fn parse_model_file(src: &str) -> Result<ModelFile, ModelFileError> {
    let raw: RawModelFile = toml::from_str(src).map_err(ModelFileError::Toml)?;

    let order = match raw.order.as_str() {
        "grevlex" => MonomialOrder::GrevLex,
        "grlex" => MonomialOrder::GrLex,
        "weighted-grevlex" => MonomialOrder::WeightedGrevLex,
        other => {
            return Err(structure(format!(
                "unknown monomial order `{other}` (expected grevlex, grlex, or weighted-grevlex)"
            )))
        }
    };

    if raw.variables.is_empty() {
        return Err(structure("a model needs at least one variable"));
    }
    let mut vars = Vec::with_capacity(raw.variables.len());
    for v in &raw.variables {
        let partner = match &v.partner {
            Some(p) => Some(
                raw.variables
                    .iter()
                    .position(|w| &w.name == p)
                    .ok_or_else(|| {
                        structure(format!(
                            "variable `{}` names partner `{p}`, which is not declared",
                            v.name
                        ))
                    })?,
            ),
            None => None,
        };
        let parity = if v.ghost.rem_euclid(2) == 0 { Parity::Even } else { Parity::Odd };
        vars.push(Variable {
            name: v.name.clone(),
            ghost: v.ghost,
            parity,
            weight: v.weight,
            partner,
        });
    }
    let table = VariableTable::new(vars).map_err(|e| structure(e.to_string()))?;

    let action = parse_polynomial(&table, &raw.action)
        .map_err(|error| ModelFileError::Polynomial { field: "action", error })?;

    let gauged_only = |opt: &Option<String>, key: &str| -> Result<(), ModelFileError> {
        if opt.is_some() {
            Err(structure(format!("`{key}` only applies to class = \"gauged\"")))
        } else {
            Ok(())
        }
    };

    let spec = match raw.class.as_str() {
        "isolated" => {
            gauged_only(&raw.scaling, "scaling")?;
            gauged_only(&raw.ghost_field, "ghost_field")?;
            gauged_only(&raw.ghost_antifield, "ghost_antifield")?;
            if raw.coordinates.is_some() {
                return Err(structure("`coordinates` only applies to class = \"gauged\""));
            }
            ModelSpec::Isolated(IsolatedSpec {
                table,
                action,
                order,
                degree_cap: raw.degree_cap,
            })
        }
        "gauged" => {
            let need = |opt: &Option<String>, key: &str| -> Result<String, ModelFileError> {
                opt.clone().ok_or_else(|| structure(format!("class = \"gauged\" requires `{key}`")))
            };
            let p = resolve(&table, &need(&raw.scaling, "scaling")?, "scaling coordinate")?;
            let names = raw
                .coordinates
                .clone()
                .ok_or_else(|| structure("class = \"gauged\" requires `coordinates`"))?;
            let coords = names
                .iter()
                .map(|n| resolve(&table, n, "coordinate"))
                .collect::<Result<Vec<_>, _>>()?;
            let ghost = resolve(&table, &need(&raw.ghost_field, "ghost_field")?, "ghost field")?;
            let ghost_antifield = resolve(
                &table,
                &need(&raw.ghost_antifield, "ghost_antifield")?,
                "ghost antifield",
            )?;
            ModelSpec::Gauged(GaugedSpec {
                table,
                action,
                p,
                coords,
                ghost,
                ghost_antifield,
                order,
                degree_cap: raw.degree_cap,
            })
        }
        other => {
            return Err(structure(format!(
                "unknown class `{other}` (expected \"isolated\" or \"gauged\")"
            )))
        }
    };

    let expectation = match raw.expectation {
        None => None,
        Some(strings) => {
            let mut v = Vec::with_capacity(strings.len());
            for (i, s) in strings.iter().enumerate() {
                let r = Rat::from_str(s).map_err(|_| {
                    structure(format!("expectation entry {i} (`{s}`) is not a rational `p/q`"))
                })?;
                v.push(r);
            }
            Some(v)
        }
    };

    Ok(ModelFile {
        spec,
        truncation: raw.truncation,
        expectation,
        output: raw.output,
    })
}
