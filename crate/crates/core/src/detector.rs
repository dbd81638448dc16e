//! Recognising polynomials of degree `≤ m − 1` from two independent pieces of
//! evidence: the power-mollifier sweep limit (zero for polynomials) and the
//! convergence of the singular remainder integral.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calderon::{fit_polynomial, PolynomialFit};
use crate::catalog::CatalogFunction;
use crate::error::{Error, Result};
use crate::functional::{run_sweep, singular_remainder_integral, FunctionalKind, FunctionalSpec, FunctionalSweep, QuadratureConfig, SingularReport};
use crate::jet::{Component, Jet};
use crate::lattice::Grid;
use crate::mollifier::Mollifier;
use crate::multiindex::enumerate_multiindices;

/// Factor applied to the calibration limit to obtain `θ_zero`.
pub const THETA_FACTOR: f64 = 10.0;
/// Relative tolerance of the polynomial fit residual.
pub const FIT_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Polynomial,
    NotPolynomial,
    Inconclusive,
    /// Both functionals vanish but no single polynomial fits; each connected
    /// component of the grid carries its own.
    PolynomialPerComponent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub schedule: Vec<f64>,
    /// Spacing halvings of the singular integral.
    pub singular_levels: usize,
    /// Starting spacing of the singular integral; the grid spacing if unset.
    pub singular_h: Option<f64>,
    pub quadrature: QuadratureConfig,
}

impl DetectorConfig {
    pub fn new(schedule: Vec<f64>) -> Self {
        Self {
            schedule,
            singular_levels: 4,
            singular_h: None,
            quadrature: QuadratureConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentFit {
    pub component: usize,
    pub points: usize,
    pub fit: PolynomialFit,
    /// Discrete `L^p` norm of the residual on the component.
    pub residual_norm: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub verdict: Verdict,
    pub m: usize,
    pub p: f64,
    pub sweep: FunctionalSweep,
    /// Sweep limit of an opaque degree-`(m−1)` polynomial on the same grid.
    pub calibration_limit: f64,
    pub theta_zero: f64,
    pub singular: SingularReport,
    pub sweep_says_polynomial: bool,
    pub singular_says_polynomial: bool,
    /// Global fit, present when both channels vanish.
    pub fit: Option<ComponentFit>,
    pub component_fits: Vec<ComponentFit>,
    pub notes: Vec<String>,
}

// The polynomial Σ_{|β|≤m−1} x^β with no exact-degree information, so its
// functionals carry the same rounding as a generic jet.
fn calibration_jet(jet: &Jet, grid: &Grid, m: usize) -> Result<Jet> {
    let n = grid.dim();
    let coefficients: Vec<_> = enumerate_multiindices(n, m - 1)?.into_iter().map(|b| (b, 1.0)).collect();
    let f = Arc::new(CatalogFunction::polynomial(n, &coefficients)?);
    let components: Vec<_> = enumerate_multiindices(n, m - 1)?
        .into_iter()
        .map(|a| {
            let f = Arc::clone(&f);
            let c: Component = Arc::new(move |x: &[f64]| CatalogFunction::derivative(&f, &a, x));
            (a, c)
        })
        .collect();
    let opaque = Jet::from_components(n, m - 1, components)?;
    if jet.sampled().is_some() {
        Jet::sampled_from(&opaque, grid)
    } else {
        Ok(opaque)
    }
}

fn fit_on(jet: &Jet, grid: &Grid, members: &[usize], m: usize, p: f64, component: usize) -> Result<ComponentFit> {
    let points: Vec<&[f64]> = members.iter().map(|&i| grid.point(i)).collect();
    let values: Vec<f64> = points.iter().map(|x| jet.component(&crate::MultiIndex::zero(grid.dim()), x)).collect::<Result<_>>()?;
    let n = grid.dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for x in &points {
        for i in 0..n {
            lo[i] = lo[i].min(x[i]);
            hi[i] = hi[i].max(x[i]);
        }
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let scale = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a)).fold(grid.h(), f64::max);
    let fit = fit_polynomial(&points, &values, &center, scale, m - 1, p)?;
    let measure = members.len() as f64 * grid.cell_volume();
    let norm_f = (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * grid.cell_volume()).powf(1.0 / p);
    Ok(ComponentFit {
        component,
        points: members.len(),
        residual_norm: fit.residual * measure.powf(1.0 / p),
        tolerance: FIT_TOLERANCE * norm_f.max(1.0),
        fit,
    })
}

/// Classify `jet` as a polynomial of degree `≤ m − 1` on the grid's domain.
///
/// Channel (a) compares the extrapolated power-mollifier sweep limit with
/// `θ_zero = 10 ×` the limit of an opaque calibration polynomial; channel (b)
/// asks whether the singular remainder integral diverges under halving of
/// the spacing. Agreement on "zero" triggers a least-squares fit, first
/// globally and then per connected component; disagreement is inconclusive.
pub fn detect_polynomial(jet: &Jet, grid: &Grid, m: usize, p: f64, cfg: &DetectorConfig) -> Result<DetectionReport> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    if jet.order() + 1 < m {
        return Err(Error::OrderExceeded {
            requested: m - 1,
            available: jet.order(),
        });
    }
    let rho = Mollifier::power(grid.dim(), m, p)?;
    let spec = FunctionalSpec {
        kind: FunctionalKind::Bbm(rho),
        m,
        p,
    };
    let sweep = run_sweep(&spec, jet, grid, &cfg.schedule, &cfg.quadrature)?;
    let calibration = run_sweep(&spec, &calibration_jet(jet, grid, m)?, grid, &cfg.schedule, &cfg.quadrature)?;
    let calibration_limit = calibration.limit.abs();
    let theta_zero = THETA_FACTOR * calibration_limit;
    let singular = match cfg.singular_h {
        Some(h) if h != grid.h() => singular_remainder_integral(jet, &Grid::new(grid.domain(), h)?, m, p, cfg.singular_levels, &cfg.quadrature)?,
        _ => singular_remainder_integral(jet, grid, m, p, cfg.singular_levels, &cfg.quadrature)?,
    };
    let sweep_says_polynomial = sweep.limit.abs() <= theta_zero;
    let singular_says_polynomial = !singular.divergent;
    let mut notes = Vec::new();
    if !sweep.is_monotone() {
        notes.push("sweep values not monotone over the last three scales".to_string());
    }
    let mut fit = None;
    let mut component_fits = Vec::new();
    let verdict = match (sweep_says_polynomial, singular_says_polynomial) {
        (false, false) => Verdict::NotPolynomial,
        (true, false) | (false, true) => {
            notes.push("evidence channels disagree".to_string());
            Verdict::Inconclusive
        }
        (true, true) => {
            let all: Vec<usize> = (0..grid.len()).collect();
            let global = fit_on(jet, grid, &all, m, p, 0)?;
            let global_ok = global.residual_norm <= global.tolerance;
            fit = Some(global);
            if global_ok {
                Verdict::Polynomial
            } else {
                let labels = grid.components();
                let count = labels.iter().copied().max().map_or(0, |c| c + 1);
                for c in 0..count {
                    let members: Vec<usize> = (0..grid.len()).filter(|&i| labels[i] == c).collect();
                    component_fits.push(fit_on(jet, grid, &members, m, p, c)?);
                }
                if count > 1 && component_fits.iter().all(|f| f.residual_norm <= f.tolerance) {
                    notes.push(format!("no global polynomial; each of {count} components fits its own"));
                    Verdict::PolynomialPerComponent
                } else {
                    notes.push("functionals vanish but the polynomial fit residual exceeds tolerance".to_string());
                    Verdict::Inconclusive
                }
            }
        }
    };
    Ok(DetectionReport {
        verdict,
        m,
        p,
        sweep,
        calibration_limit,
        theta_zero,
        singular,
        sweep_says_polynomial,
        singular_says_polynomial,
        fit,
        component_fits,
        notes,
    })
}
