//! Radial mollifier families `ρ_ε`, normalised so that
//! `∫_0^∞ ρ_ε(r) r^{n−1} dr = 1`.
//!
//! Functionals built on these kernels additionally need the first moment
//! `∫ r^p ρ_ε(r) r^{n−1} dr` to be finite; every family here has bounded
//! support or Gaussian decay, and tables are cut off at their last node.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::multiindex::check_dim;
use crate::quadrature::{integrate, integrate_from_zero, integrate_to_infinity};

/// Serializable description of a family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MollifierSpec {
    /// `(n+mp) r^{mp} / ε^{n+mp}` on `r < ε`; `m`, `p` default to the
    /// functional's own values.
    Power {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
    },
    /// `ε r^{−n+ε}` on `r < 1`.
    Log,
    /// `C ε^{−n} e^{−(r/ε)²}` on `r < cutoff·ε`.
    Gaussian {
        #[serde(default = "default_cutoff")]
        cutoff: f64,
    },
    /// Linear interpolation of `(r_i, ρ_i)` at `ε = 1`, scaled as
    /// `ε^{−n} ρ_1(r/ε)`.
    Table { r: Vec<f64>, rho: Vec<f64> },
}

fn default_cutoff() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Power { s: f64 },
    Log,
    Gaussian { cutoff: f64, c: f64 },
    Table { r: Vec<f64>, rho: Vec<f64> },
}

/// A mollifier family in dimension `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mollifier {
    dim: usize,
    kind: Kind,
}

/// Numerically integrated normalisation and tail mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierReport {
    pub normalization: f64,
    pub tail_mass: f64,
}

const TOL: f64 = 1e-12;

impl Mollifier {
    /// `ρ_ε(r) = (n+mp) r^{mp} / ε^{n+mp}` for `r < ε`.
    pub fn power(n: usize, m: usize, p: f64) -> Result<Self> {
        check_dim(n)?;
        if m == 0 || !(p >= 1.0) {
            return Err(Error::Mollifier(format!("power family needs m ≥ 1 and p ≥ 1, got m={m}, p={p}")));
        }
        Ok(Self {
            dim: n,
            kind: Kind::Power { s: m as f64 * p },
        })
    }

    /// `ρ_ε(r) = ε r^{−n+ε}` for `r < 1`.
    pub fn log_type(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self { dim: n, kind: Kind::Log })
    }

    /// Truncated Gaussian `C ε^{−n} e^{−(r/ε)²}` on `r < cutoff·ε`.
    pub fn gaussian(n: usize, cutoff: f64) -> Result<Self> {
        check_dim(n)?;
        if !(cutoff > 0.0) {
            return Err(Error::Mollifier("gaussian cutoff must be positive".into()));
        }
        let t = cutoff;
        let e = (-t * t).exp();
        let sqpi = std::f64::consts::PI.sqrt();
        let mass = match n {
            1 => 0.5 * sqpi * erf(t),
            2 => 0.5 * (1.0 - e),
            _ => 0.25 * sqpi * erf(t) - 0.5 * t * e,
        };
        Ok(Self {
            dim: n,
            kind: Kind::Gaussian { cutoff, c: 1.0 / mass },
        })
    }

    /// Tabulated profile at `ε = 1`, renormalised to unit mass. Values
    /// before the first node repeat the first value; beyond the last node
    /// the density is zero.
    pub fn table(n: usize, r: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        check_dim(n)?;
        if r.len() != rho.len() || r.len() < 2 {
            return Err(Error::Mollifier("table needs matching r and rho of length ≥ 2".into()));
        }
        if r[0] < 0.0 || r.windows(2).any(|w| !(w[1] > w[0])) || r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Mollifier("table radii must be finite, nonnegative and strictly increasing".into()));
        }
        if let Some(v) = rho.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Mollifier(format!("table density {v} is negative or not finite")));
        }
        let mut m = Self {
            dim: n,
            kind: Kind::Table { r, rho },
        };
        let mass = m.table_mass();
        if !(mass > 0.0) {
            return Err(Error::Mollifier("table has zero mass".into()));
        }
        if let Kind::Table { rho, .. } = &mut m.kind {
            rho.iter_mut().for_each(|v| *v /= mass);
        }
        Ok(m)
    }

    /// Build from a [`MollifierSpec`]; `m`, `p` fill in unspecified power parameters.
    pub fn from_spec(spec: &MollifierSpec, n: usize, m: usize, p: f64) -> Result<Self> {
        match spec {
            MollifierSpec::Power { m: mm, p: pp } => Self::power(n, mm.unwrap_or(m), pp.unwrap_or(p)),
            MollifierSpec::Log => Self::log_type(n),
            MollifierSpec::Gaussian { cutoff } => Self::gaussian(n, *cutoff),
            MollifierSpec::Table { r, rho } => Self::table(n, r.clone(), rho.clone()),
        }
    }

    // Exact for the piecewise-linear density times r^{n−1} (degree ≤ 3).
    fn table_mass(&self) -> f64 {
        let Kind::Table { r, rho } = &self.kind else { unreachable!() };
        let n = self.dim as i32;
        let (x, w) = crate::quadrature::gauss_legendre(4);
        let mut mass = rho[0] * r[0].powi(n) / n as f64;
        for i in 0..r.len() - 1 {
            let (a, b) = (r[i], r[i + 1]);
            for (xi, wi) in x.iter().zip(&w) {
                let t = 0.5 * (xi + 1.0);
                let rr = a + t * (b - a);
                let v = rho[i] + t * (rho[i + 1] - rho[i]);
                mass += 0.5 * (b - a) * wi * v * rr.powi(n - 1);
            }
        }
        mass
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Short name for reports.
    pub fn label(&self) -> &'static str {
        match self.kind {
            Kind::Power { .. } => "power",
            Kind::Log => "log",
            Kind::Gaussian { .. } => "gaussian",
            Kind::Table { .. } => "table",
        }
    }

    /// Exponent `mp` of the power family.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::Power { s } => Some(s),
            _ => None,
        }
    }

    pub fn check_scale(&self, eps: f64) -> Result<()> {
        if eps > 0.0 && eps.is_finite() {
            Ok(())
        } else {
            Err(Error::Mollifier(format!("scale {eps} must be positive")))
        }
    }

    /// `ρ_ε(r)` for `r > 0`.
    pub fn density(&self, eps: f64, r: f64) -> f64 {
        let n = self.dim as f64;
        match &self.kind {
            Kind::Power { s } => {
                if r < eps {
                    (n + s) * r.powf(*s) / eps.powf(n + s)
                } else {
                    0.0
                }
            }
            Kind::Log => {
                if r < 1.0 {
                    eps * r.powf(eps - n)
                } else {
                    0.0
                }
            }
            Kind::Gaussian { cutoff, c } => {
                let u = r / eps;
                if u < *cutoff {
                    c * eps.powf(-n) * (-u * u).exp()
                } else {
                    0.0
                }
            }
            Kind::Table { r: rs, rho } => eps.powf(-n) * table_eval(rs, rho, r / eps),
        }
    }

    // ρ_ε(r)·r^n from ln r, stable near r = 0.
    fn scaled_mass(&self, eps: f64, ln_r: f64) -> f64 {
        let n = self.dim as f64;
        match &self.kind {
            Kind::Power { s } => {
                if ln_r < eps.ln() {
                    (n + s) * ((n + s) * (ln_r - eps.ln())).exp()
                } else {
                    0.0
                }
            }
            Kind::Log => {
                if ln_r < 0.0 {
                    eps * (eps * ln_r).exp()
                } else {
                    0.0
                }
            }
            _ => {
                let r = ln_r.exp();
                self.density(eps, r) * r.powf(n)
            }
        }
    }

    /// Radius beyond which `ρ_ε` vanishes.
    pub fn support(&self, eps: f64) -> f64 {
        match &self.kind {
            Kind::Power { .. } => eps,
            Kind::Log => 1.0,
            Kind::Gaussian { cutoff, .. } => cutoff * eps,
            Kind::Table { r, .. } => eps * r[r.len() - 1],
        }
    }

    /// Radii where `ρ_ε` is not smooth (support ends, table nodes).
    pub fn breakpoints(&self, eps: f64) -> Vec<f64> {
        match &self.kind {
            Kind::Table { r, .. } => r.iter().map(|v| v * eps).filter(|v| *v > 0.0).collect(),
            _ => vec![self.support(eps)],
        }
    }

    /// Whether `ρ_ε(r) → ∞` as `r → 0`.
    pub fn singular_at_origin(&self, eps: f64) -> bool {
        matches!(self.kind, Kind::Log) && eps < self.dim as f64
    }

    /// `∫_a^b ρ_ε(r) r^{n−1} dr` split at breakpoints; `b = ∞` allowed.
    fn radial_mass(&self, eps: f64, a: f64, b: f64) -> Result<f64> {
        let n = self.dim as i32;
        let f = |r: f64| self.density(eps, r) * r.powi(n - 1);
        let mut cuts: Vec<f64> = self.breakpoints(eps).into_iter().filter(|c| *c > a && *c < b).collect();
        cuts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        let mut lo = a;
        if lo == 0.0 {
            let first = cuts.first().copied().unwrap_or(b.min(self.support(eps)));
            total += integrate_from_zero(|lr| self.scaled_mass(eps, lr), first, TOL)?;
            lo = first;
        }
        for c in cuts.iter().copied() {
            if c <= lo {
                continue;
            }
            total += integrate(f, lo, c, TOL)?;
            lo = c;
        }
        let end = b.min(self.support(eps));
        if end > lo {
            total += if end.is_finite() {
                integrate(f, lo, end, TOL)?
            } else {
                integrate_to_infinity(f, lo, TOL)?
            };
        }
        Ok(total)
    }
}

fn table_eval(r: &[f64], rho: &[f64], x: f64) -> f64 {
    if x <= r[0] {
        return rho[0];
    }
    if x >= r[r.len() - 1] {
        return 0.0;
    }
    let i = r.partition_point(|v| *v <= x) - 1;
    let t = (x - r[i]) / (r[i + 1] - r[i]);
    rho[i] + t * (rho[i + 1] - rho[i])
}

/// Normalisation `∫_0^∞ ρ_ε r^{n−1}` and tail `∫_δ^∞ ρ_ε r^{n−1}` by adaptive
/// quadrature.
pub fn check_mollifier(fam: &Mollifier, eps: f64, delta: f64) -> Result<MollifierReport> {
    fam.check_scale(eps)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold {delta} must be positive")));
    }
    Ok(MollifierReport {
        normalization: fam.radial_mass(eps, 0.0, f64::INFINITY)?,
        tail_mass: fam.radial_mass(eps, delta, f64::INFINITY)?,
    })
}
