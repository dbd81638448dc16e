//! The named experiments and their result records.

use std::collections::BTreeMap;
use std::time::Instant;

use nlsobolev::{
    detect_polynomial, jet_condition_value, jet_condition_value_inner, maximal_profile, reconstruction_diagnostics, run_sweep,
    shifted_jet_condition, sphere_limit_target, whitney_sweep, CatalogFunction, DetectorConfig, Domain, FunctionalKind, FunctionalSpec, Grid, Jet,
    Mollifier, MultiIndex, SphereRule,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};

/// Version of the CSV and JSON layouts; bumped on breaking changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recipe {
    BbmSweep,
    DifferenceSweep,
    LemmaIdentity,
    PolynomialDetect,
    WhitneyReconstruct,
    CalderonProfile,
    JetCondition,
}

/// Static description of a recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipeInfo {
    pub name: String,
    pub anchor: String,
    pub description: String,
    pub required_fields: Vec<String>,
}

const COMMON: &[&str] = &["function", "n", "m", "p", "h", "domain"];

impl Recipe {
    pub const ALL: [Recipe; 7] = [
        Recipe::BbmSweep,
        Recipe::DifferenceSweep,
        Recipe::LemmaIdentity,
        Recipe::PolynomialDetect,
        Recipe::WhitneyReconstruct,
        Recipe::CalderonProfile,
        Recipe::JetCondition,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Recipe::BbmSweep => "bbm-sweep",
            Recipe::DifferenceSweep => "difference-sweep",
            Recipe::LemmaIdentity => "lemma-identity",
            Recipe::PolynomialDetect => "polynomial-detect",
            Recipe::WhitneyReconstruct => "whitney-reconstruct",
            Recipe::CalderonProfile => "calderon-profile",
            Recipe::JetCondition => "jet-condition",
        }
    }

    pub fn from_name(name: &str) -> Option<Recipe> {
        Recipe::ALL.into_iter().find(|r| r.name() == name)
    }

    /// The identity or estimate the recipe exercises.
    pub fn anchor(&self) -> &'static str {
        match self {
            Recipe::BbmSweep => "lim_{ε→0} ∬ |R^{m−1}f(x,y)|^p |x−y|^{−mp} ρ_ε(|x−y|) dx dy = ∫_Ω ∫_{S^{n−1}} |Σ_{|α|=m} f_α(x) e^α/α!|^p dσ(e) dx",
            Recipe::DifferenceSweep => "lim_{ε→0} ∬ |Δ^m f(x,y)|^p |x−y|^{−mp} ρ_ε(|x−y|) dx dy = (m!/m^m)^p ∫_Ω ∫_{S^{n−1}} |Σ_{|α|=m} f_α(x) e^α/α!|^p dσ(e) dx",
            Recipe::LemmaIdentity => "power kernel ρ_ε = (n+mp) r^{mp} ε^{−n−mp} χ_{r<ε}: BBM functional = (n+mp) · ε^{−n−mp} ∬_{|x−y|<ε} |R^{m−1}F(x,y)|^p",
            Recipe::PolynomialDetect => "liminf_{ε→0} ∬ |R^{m−1}f|^p |x−y|^{−mp} ρ_ε = 0  ⇔  ∬ |R^{m−1}f|^p |x−y|^{−n−mp} < ∞  ⇔  f is a polynomial of degree ≤ m−1",
            Recipe::WhitneyReconstruct => "w^k = Σ_i φ_i^k T_{Q_i^k}^{m−1}F,  ‖f_α − D^α w^k‖_{L^p(Ω')} ≤ c 2^{(|α|−m)k}",
            Recipe::CalderonProfile => "N(f,y) = sup_ε ε^{−m} (⨍_{B(y,ε)} |f − P_{y,ε}|^p)^{1/p}",
            Recipe::JetCondition => "sup_ε ε^{−n−mp} ∬_{|x−y|<ε} |R^{m−1}F(x,y)|^p dx dy < ∞",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            Recipe::BbmSweep => "Taylor-remainder functional with a chosen mollifier along an ε-schedule, extrapolated and compared with the sphere target",
            Recipe::DifferenceSweep => "m-th difference functional on the function values along an ε-schedule",
            Recipe::LemmaIdentity => "power-mollifier sweep against the sphere target, with the jet-condition constant check",
            Recipe::PolynomialDetect => "polynomial verdict from the sweep limit and the singular integral",
            Recipe::WhitneyReconstruct => "Whitney reconstruction errors and rates over dyadic levels",
            Recipe::CalderonProfile => "maximal function of best local polynomial approximation at interior centers",
            Recipe::JetCondition => "averaged jet condition, optionally on an inner set and with a shifted remainder",
        }
    }

    pub fn required_fields(&self) -> &'static [&'static str] {
        match self {
            Recipe::BbmSweep | Recipe::DifferenceSweep => &["function", "n", "m", "p", "h", "domain", "mollifier", "schedule"],
            Recipe::LemmaIdentity | Recipe::PolynomialDetect | Recipe::JetCondition => &["function", "n", "m", "p", "h", "domain", "schedule"],
            Recipe::WhitneyReconstruct => &["function", "n", "m", "p", "h", "domain", "whitney"],
            Recipe::CalderonProfile => &["function", "n", "m", "p", "h", "domain", "calderon"],
        }
    }

    pub fn info(&self) -> RecipeInfo {
        RecipeInfo {
            name: self.name().to_string(),
            anchor: self.anchor().to_string(),
            description: self.description().to_string(),
            required_fields: self.required_fields().iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// All recipes with their metadata.
pub fn list_recipes() -> Vec<RecipeInfo> {
    debug_assert!(Recipe::ALL.iter().all(|r| COMMON.iter().all(|c| r.required_fields().contains(c))));
    Recipe::ALL.iter().map(Recipe::info).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rates: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scalars: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub series: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub checks: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl Summary {
    fn scalar(&mut self, key: &str, v: f64) {
        if v.is_finite() {
            self.scalars.insert(key.to_string(), v);
        } else {
            self.flags.push(format!("{key} is not finite"));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    pub recipe: String,
    pub config: ExperimentConfig,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summary: Summary,
    /// Kept out of `summary.json` so that file is reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{recipe}: {source}")]
    Numerical {
        recipe: &'static str,
        #[source]
        source: nlsobolev::Error,
    },
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// 2 for validation errors, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical { .. } => 3,
            RunError::Io(_) => 1,
        }
    }
}

struct Setup {
    recipe: Recipe,
    f: CatalogFunction,
    n: usize,
    m: usize,
    p: f64,
    domain: Domain,
    grid: Grid,
}

impl Setup {
    fn jet(&self, order: usize) -> Result<Jet, nlsobolev::Error> {
        let jet = Jet::analytic(self.f.clone(), order).on_domain(&self.domain)?;
        Ok(jet)
    }

    fn jet_for(&self, cfg: &ExperimentConfig, order: usize) -> Result<Jet, nlsobolev::Error> {
        let jet = self.jet(order)?;
        if cfg.sampled {
            Jet::sampled_from(&jet, &self.grid)
        } else {
            Ok(jet)
        }
    }
}

/// Validate `cfg` and run its recipe.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentResult, RunError> {
    let start = Instant::now();
    let recipe = cfg.validate()?;
    let n = cfg.n.expect("validated");
    let domain = cfg.domain.as_ref().expect("validated").build(n)?;
    let numerical = |source: nlsobolev::Error| RunError::Numerical { recipe: recipe.name(), source };
    let setup = Setup {
        recipe,
        f: CatalogFunction::parse(cfg.function.as_deref().expect("validated"), n).map_err(numerical)?,
        n,
        m: cfg.m.expect("validated"),
        p: cfg.p.expect("validated"),
        grid: Grid::new(&domain, cfg.h.expect("validated")).map_err(numerical)?,
        domain,
    };
    let (columns, rows, summary) = match recipe {
        Recipe::BbmSweep | Recipe::DifferenceSweep | Recipe::LemmaIdentity => sweep_recipe(&setup, cfg),
        Recipe::PolynomialDetect => detect_recipe(&setup, cfg),
        Recipe::WhitneyReconstruct => whitney_recipe(&setup, cfg),
        Recipe::CalderonProfile => calderon_recipe(&setup, cfg),
        Recipe::JetCondition => jet_condition_recipe(&setup, cfg),
    }
    .map_err(numerical)?;
    Ok(ExperimentResult {
        schema_version: SCHEMA_VERSION,
        recipe: recipe.name().to_string(),
        config: cfg.clone(),
        columns: columns.into_iter().map(String::from).collect(),
        rows,
        summary,
        timing: Some(Timing {
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        }),
    })
}

type Table = (Vec<String>, Vec<Vec<f64>>, Summary);

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn sphere_target(s: &Setup) -> Result<f64, nlsobolev::Error> {
    sphere_limit_target(&s.jet(s.m)?, &s.grid, s.m, s.p, &SphereRule::new(s.n)?)
}

fn sweep_recipe(s: &Setup, cfg: &ExperimentConfig) -> Result<Table, nlsobolev::Error> {
    let schedule = cfg.schedule.as_ref().expect("validated").epsilons().map_err(|e| nlsobolev::Error::InvalidArgument(e.to_string()))?;
    let rho = match (s.recipe, &cfg.mollifier) {
        (Recipe::LemmaIdentity, _) | (_, None) => Mollifier::power(s.n, s.m, s.p)?,
        (_, Some(spec)) => Mollifier::from_spec(spec, s.n, s.m, s.p)?,
    };
    let kind = if s.recipe == Recipe::DifferenceSweep {
        FunctionalKind::Difference(rho.clone())
    } else {
        FunctionalKind::Bbm(rho.clone())
    };
    let spec = FunctionalSpec { kind, m: s.m, p: s.p };
    let jet = s.jet_for(cfg, s.m - 1)?;
    let sweep = run_sweep(&spec, &jet, &s.grid, &schedule, &cfg.quadrature)?;
    let mut target = sphere_target(s)?;
    if s.recipe == Recipe::DifferenceSweep {
        let m = s.m as f64;
        target *= (nlsobolev::multiindex::factorial(s.m) / m.powf(m)).powf(s.p);
    }
    let sweep = sweep.with_target(target);
    let mut summary = Summary {
        limit: Some(sweep.limit),
        target: Some(target),
        relative_error: sweep.relative_error(),
        flags: sweep.flags.clone(),
        ..Default::default()
    };
    summary.scalars.insert("mollifier_is_power".into(), if rho.power_exponent().is_some() { 1.0 } else { 0.0 });
    if s.recipe == Recipe::LemmaIdentity {
        let c = s.n as f64 + s.m as f64 * s.p;
        let mut rows = Vec::new();
        let mut worst = 0.0f64;
        for (e, v) in sweep.epsilons.iter().zip(&sweep.values) {
            let jc = jet_condition_value(&jet, &s.grid, s.m, s.p, *e, &cfg.quadrature)?;
            let err = if *v == 0.0 { (c * jc).abs() } else { (v - c * jc).abs() / v.abs() };
            worst = worst.max(err);
            rows.push(vec![*e, *v, jc, if jc == 0.0 { 0.0 } else { v / jc }]);
        }
        summary.scalar("identity_constant", c);
        summary.scalar("identity_max_relative_error", worst);
        summary.checks.insert("identity_holds".into(), worst <= 1e-12);
        return Ok((strings(&["epsilon", "bbm", "jet_condition", "ratio"]), rows, summary));
    }
    let rows = sweep.epsilons.iter().zip(&sweep.values).map(|(e, v)| vec![*e, *v]).collect();
    Ok((strings(&["epsilon", "value"]), rows, summary))
}

fn detect_recipe(s: &Setup, cfg: &ExperimentConfig) -> Result<Table, nlsobolev::Error> {
    let schedule = cfg.schedule.as_ref().expect("validated").epsilons().map_err(|e| nlsobolev::Error::InvalidArgument(e.to_string()))?;
    let mut dc = DetectorConfig::new(schedule);
    dc.quadrature = cfg.quadrature.clone();
    if let Some(d) = &cfg.detector {
        dc.singular_levels = d.singular_levels;
        dc.singular_h = d.singular_h;
    }
    let jet = s.jet_for(cfg, s.m - 1)?;
    let r = detect_polynomial(&jet, &s.grid, s.m, s.p, &dc)?;
    let rows = r.sweep.epsilons.iter().zip(&r.sweep.values).map(|(e, v)| vec![*e, *v]).collect();
    let verdict = serde_json::to_value(r.verdict).ok().and_then(|v| v.as_str().map(String::from));
    let mut summary = Summary {
        limit: Some(r.sweep.limit),
        verdict,
        flags: r.notes.clone(),
        ..Default::default()
    };
    summary.scalar("theta_zero", r.theta_zero);
    summary.scalar("calibration_limit", r.calibration_limit);
    summary.series.insert("singular_spacings".into(), r.singular.spacings.clone());
    summary.series.insert("singular_values".into(), r.singular.values.clone());
    summary.series.insert(
        "singular_growth_ratios".into(),
        r.singular.growth_ratios.iter().map(|g| if g.is_finite() { *g } else { f64::MAX }).collect(),
    );
    summary.checks.insert("singular_divergent".into(), r.singular.divergent);
    summary.checks.insert("sweep_says_polynomial".into(), r.sweep_says_polynomial);
    if let Some(fit) = &r.fit {
        summary.scalar("fit_residual", fit.residual_norm);
        summary.scalar("fit_tolerance", fit.tolerance);
    }
    for c in &r.component_fits {
        summary.scalar(&format!("component_{}_residual", c.component), c.residual_norm);
    }
    Ok((strings(&["epsilon", "value"]), rows, summary))
}

fn whitney_recipe(s: &Setup, cfg: &ExperimentConfig) -> Result<Table, nlsobolev::Error> {
    let w = cfg.whitney.as_ref().expect("validated");
    let inner = s.domain.clone().with_margin(w.margin)?;
    let jet = s.jet_for(cfg, s.m)?;
    let recs = whitney_sweep(&jet, &s.grid, &inner, &w.levels, w.max_level, s.m - 1)?;
    let d = reconstruction_diagnostics(&jet, &recs, s.m, s.p)?;
    let mut columns = vec!["level".to_string()];
    columns.extend(d.rates.iter().map(|r| format!("error{}", r.alpha)));
    columns.extend(d.top_norms.iter().map(|(a, _)| format!("norm{a}")));
    let rows = (0..d.levels.len())
        .map(|i| {
            let mut row = vec![d.levels[i] as f64];
            row.extend(d.rates.iter().map(|r| r.errors[i]));
            row.extend(d.top_norms.iter().map(|(_, v)| v[i]));
            row
        })
        .collect();
    let mut summary = Summary::default();
    for r in &d.rates {
        match r.slope {
            Some(v) => {
                summary.rates.insert(format!("slope{}", r.alpha), v);
                summary.rates.insert(format!("expected{}", r.alpha), r.alpha.order() as f64 - s.m as f64);
            }
            None => summary.flags.push(format!("α = {} reproduced exactly", r.alpha)),
        }
    }
    summary.checks.insert("top_order_bounded".into(), d.top_bounded);
    summary.scalar("evaluation_points", d.evaluation_points as f64);
    summary.scalar("cubes_at_first_level", recs[0].decomposition().len() as f64);
    Ok((columns, rows, summary))
}

fn calderon_recipe(s: &Setup, cfg: &ExperimentConfig) -> Result<Table, nlsobolev::Error> {
    let c = cfg.calderon.as_ref().expect("validated");
    let profile = maximal_profile(&s.f, &s.grid, s.m, s.p, &c.radii, c.stride)?;
    let mut columns: Vec<String> = (1..=s.n).map(|i| format!("y{i}")).collect();
    columns.extend(strings(&["N", "argmax_epsilon"]));
    let rows = profile
        .centers
        .iter()
        .zip(profile.values.iter().zip(&profile.argmax_eps))
        .map(|(y, (v, a))| {
            let mut row = y.clone();
            row.extend([*v, *a]);
            row
        })
        .collect();
    let mut summary = Summary::default();
    summary.scalar("lp_norm", profile.lp_norm(s.p));
    summary.scalar("max", profile.values.iter().copied().fold(0.0, f64::max));
    summary.scalar("unbounded_centers", profile.unbounded.iter().filter(|u| **u).count() as f64);
    summary.series.insert("radii".into(), profile.radii.clone());
    Ok((columns, rows, summary))
}

fn jet_condition_recipe(s: &Setup, cfg: &ExperimentConfig) -> Result<Table, nlsobolev::Error> {
    let schedule = cfg.schedule.as_ref().expect("validated").epsilons().map_err(|e| nlsobolev::Error::InvalidArgument(e.to_string()))?;
    let spec = cfg.jet_condition.clone().unwrap_or(crate::config::JetConditionSpec { margin: None, shift: None });
    let jet = s.jet_for(cfg, s.m - 1)?;
    let shift = match &spec.shift {
        Some(v) => Some(MultiIndex::new(v)?),
        None => None,
    };
    if shift.is_some() && spec.margin.is_none() {
        return Err(nlsobolev::Error::InvalidArgument("a shifted condition needs jet_condition.margin".into()));
    }
    // the full-Ω value is always reported; Ω′ columns only with a margin
    let mut columns = strings(&["epsilon", "value"]);
    if spec.margin.is_some() {
        columns.push("inner".into());
    }
    if shift.is_some() {
        columns.push("shifted".into());
    }
    let mut rows = Vec::new();
    for &e in &schedule {
        let mut row = vec![e, jet_condition_value(&jet, &s.grid, s.m, s.p, e, &cfg.quadrature)?];
        if let Some(margin) = spec.margin {
            row.push(jet_condition_value_inner(&jet, &s.grid, s.m, s.p, e, margin, &cfg.quadrature)?);
            if let Some(j) = &shift {
                row.push(shifted_jet_condition(&jet, &s.grid, s.m, j, s.p, e, margin, &cfg.quadrature)?);
            }
        }
        rows.push(row);
    }
    let values: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let (limit, monotone) = nlsobolev::functional::extrapolate(&schedule, &values);
    let mut summary = Summary {
        limit: Some(limit),
        ..Default::default()
    };
    if !monotone {
        summary.flags.push("non-monotone".into());
    }
    summary.scalar("sup", values.iter().copied().fold(0.0, f64::max));
    if spec.margin.is_some() {
        let inner: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        summary.series.insert("inner".into(), inner);
    }
    {
        // (n+mp) times the condition is the power-kernel sweep
        let target = sphere_target(s)?;
        let c = s.n as f64 + s.m as f64 * s.p;
        summary.target = Some(target / c);
        summary.relative_error = if target == 0.0 { Some((limit * c - target).abs()) } else { Some((limit * c - target).abs() / target) };
    }
    Ok((columns, rows, summary))
}
