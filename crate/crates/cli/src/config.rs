//! Experiment configuration files (TOML) and `--override key=value` handling.
//!
//! Precedence, lowest first: built-in defaults, the config file, then each
//! override in command-line order.

use std::path::Path;

use nlsobolev::{BoxRegion, Domain, MollifierSpec, QuadratureConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recipes::Recipe;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("override `{0}` is not of the form key=value")]
    Override(String),
    #[error("unknown recipe `{0}` (see `list-recipes`)")]
    UnknownRecipe(String),
    #[error("recipe {recipe} requires field `{field}`")]
    Missing { recipe: &'static str, field: &'static str },
    #[error("field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, reason: reason.into() }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub recipe: String,
    pub function: Option<String>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub p: Option<f64>,
    /// Grid spacing.
    pub h: Option<f64>,
    /// Use grid samples of the jet instead of the analytic components.
    #[serde(default)]
    pub sampled: bool,
    pub domain: Option<DomainSpec>,
    pub mollifier: Option<MollifierSpec>,
    pub schedule: Option<ScheduleSpec>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    pub whitney: Option<WhitneySpec>,
    pub calderon: Option<CalderonSpec>,
    pub detector: Option<DetectorSpec>,
    pub jet_condition: Option<JetConditionSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainKind {
    UnitCube,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    LShape,
    SquareWithHole,
}

// flatten rules out deny_unknown_fields here
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub kind: DomainKind,
    /// Extra boxes removed from the domain, each `[lo, hi]`.
    #[serde(default)]
    pub holes: Vec<[Vec<f64>; 2]>,
}

impl DomainSpec {
    pub fn build(&self, n: usize) -> Result<Domain, ConfigError> {
        let err = |e: nlsobolev::Error| invalid("domain", e.to_string());
        let mut d = match &self.kind {
            DomainKind::UnitCube => Domain::unit_cube(n).map_err(err)?,
            DomainKind::Box { lo, hi } => Domain::open_box(lo, hi).map_err(err)?,
            DomainKind::LShape => Domain::l_shape(),
            DomainKind::SquareWithHole => Domain::square_with_hole(),
        };
        if d.dim() != n {
            return Err(invalid("domain", format!("domain has dimension {}, but n = {n}", d.dim())));
        }
        for [lo, hi] in &self.holes {
            d = d.without(BoxRegion::new(lo, hi).map_err(err)?).map_err(err)?;
        }
        Ok(d)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub eps0: Option<f64>,
    pub count: Option<usize>,
    /// Explicit strictly decreasing scales; overrides `eps0`/`count`.
    pub epsilons: Option<Vec<f64>>,
}

impl ScheduleSpec {
    pub fn epsilons(&self) -> Result<Vec<f64>, ConfigError> {
        if let Some(e) = &self.epsilons {
            return Ok(e.clone());
        }
        match (self.eps0, self.count) {
            (Some(e0), Some(c)) => Ok(nlsobolev::geometric_schedule(e0, c)),
            _ => Err(invalid("schedule", "give either `epsilons` or both `eps0` and `count`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhitneySpec {
    pub levels: Vec<u32>,
    pub max_level: u32,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalderonSpec {
    /// Strictly decreasing radii for the sup.
    pub radii: Vec<f64>,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_stride() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    #[serde(default = "default_levels")]
    pub singular_levels: usize,
    pub singular_h: Option<f64>,
}

fn default_levels() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetConditionSpec {
    /// Restrict the outer variable to `{dist(x, ∂Ω) > margin}`.
    pub margin: Option<f64>,
    /// Also evaluate the shifted condition for this multi-index.
    pub shift: Option<Vec<u32>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Table file name; `<recipe>.csv` by default.
    pub csv: Option<String>,
    /// Summary file name; `summary.json` by default.
    pub summary: Option<String>,
}

impl OutputSpec {
    pub fn csv_name(&self, recipe: &str) -> String {
        self.csv.clone().unwrap_or_else(|| format!("{recipe}.csv"))
    }
    pub fn summary_name(&self) -> String {
        self.summary.clone().unwrap_or_else(|| "summary.json".to_string())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Set a dotted `key` in `table`, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(assignment.to_string()));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn recipe(&self) -> Result<Recipe, ConfigError> {
        Recipe::from_name(&self.recipe).ok_or_else(|| ConfigError::UnknownRecipe(self.recipe.clone()))
    }

    /// Check recipe-required fields and scale consistency.
    pub fn validate(&self) -> Result<Recipe, ConfigError> {
        let recipe = self.recipe()?;
        let name = recipe.name();
        for field in recipe.required_fields() {
            let present = match *field {
                "function" => self.function.is_some(),
                "n" => self.n.is_some(),
                "m" => self.m.is_some(),
                "p" => self.p.is_some(),
                "h" => self.h.is_some(),
                "domain" => self.domain.is_some(),
                "mollifier" => self.mollifier.is_some(),
                "schedule" => self.schedule.is_some(),
                "whitney" => self.whitney.is_some(),
                "calderon" => self.calderon.is_some(),
                _ => true,
            };
            if !present {
                return Err(ConfigError::Missing { recipe: name, field });
            }
        }
        if let Some(n) = self.n {
            if !(1..=3).contains(&n) {
                return Err(invalid("n", format!("{n} is not in 1..=3")));
            }
        }
        if let Some(m) = self.m {
            if m == 0 {
                return Err(invalid("m", "must be at least 1"));
            }
        }
        if let Some(p) = self.p {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(invalid("p", format!("{p} must be a finite value ≥ 1")));
            }
        }
        let h = match self.h {
            Some(h) if !(h > 0.0 && h.is_finite()) => return Err(invalid("h", format!("{h} must be positive"))),
            Some(h) => h,
            None => f64::NAN,
        };
        if let Some(s) = &self.schedule {
            let e = s.epsilons()?;
            if e.is_empty() {
                return Err(invalid("schedule", "no scales"));
            }
            if e.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(invalid("schedule", "scales must be strictly decreasing"));
            }
            let last = *e.last().expect("non-empty");
            if last < 2.0 * h {
                return Err(invalid("schedule", format!("smallest scale {last} is below 2h = {}", 2.0 * h)));
            }
        }
        if let Some(c) = &self.calderon {
            if c.radii.windows(2).any(|w| !(w[1] < w[0])) || c.radii.is_empty() {
                return Err(invalid("calderon.radii", "radii must be non-empty and strictly decreasing"));
            }
            if let Some(r) = c.radii.last() {
                if *r < 2.0 * h {
                    return Err(invalid("calderon.radii", format!("smallest radius {r} is below 2h = {}", 2.0 * h)));
                }
            }
        }
        if let Some(w) = &self.whitney {
            if w.levels.len() < 3 {
                return Err(invalid("whitney.levels", "need at least 3 levels"));
            }
            if w.levels.iter().any(|l| *l > w.max_level) {
                return Err(invalid("whitney.levels", "levels must not exceed max_level"));
            }
            let finest = 0.5f64.powi(w.max_level as i32);
            if finest < 4.0 * h * (1.0 - 1e-12) {
                return Err(invalid("whitney.max_level", format!("finest cube side {finest} is below 4h = {}", 4.0 * h)));
            }
        }
        if let (Some(f), Some(n)) = (&self.function, self.n) {
            nlsobolev::CatalogFunction::parse(f, n).map_err(|e| invalid("function", e.to_string()))?;
        }
        if let (Some(d), Some(n)) = (&self.domain, self.n) {
            d.build(n)?;
        }
        Ok(recipe)
    }
}
