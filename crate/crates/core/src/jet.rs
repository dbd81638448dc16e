//! Jets `{f_α : |α| ≤ k}`, their Taylor polynomials and remainders.
//!
//! A jet is either analytic (a catalog function, components are exact
//! derivatives), a set of closures supplied per multi-index, or grid samples
//! interpolated multilinearly. Sampled jets carry an `O(h²)` evaluation bias
//! away from the boundary and `O(h)` within half a cell of it.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::catalog::CatalogFunction;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::lattice::Grid;
use crate::multiindex::{check_dim, enumerate_multiindices, MultiIndex};

/// A component given as a closure.
pub type Component = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Source {
    Analytic(Arc<CatalogFunction>),
    Components(Arc<HashMap<MultiIndex, Component>>),
    Sampled(Arc<SampledJet>),
}

/// Grid samples of every component of a jet.
#[derive(Clone, Debug)]
pub struct SampledJet {
    grid: Grid,
    values: HashMap<MultiIndex, Vec<f64>>,
}

impl SampledJet {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn samples(&self, alpha: &MultiIndex) -> Option<&[f64]> {
        self.values.get(alpha).map(|v| v.as_slice())
    }
}

/// A jet of order `k` in dimension `n`.
#[derive(Clone)]
pub struct Jet {
    dim: usize,
    order: usize,
    source: Source,
    domain: Option<Domain>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let src = match &self.source {
            Source::Analytic(c) => format!("analytic {}", c.name()),
            Source::Components(_) => "components".to_string(),
            Source::Sampled(s) => format!("sampled h={}", s.grid.h()),
        };
        f.debug_struct("Jet")
            .field("dim", &self.dim)
            .field("order", &self.order)
            .field("source", &src)
            .finish()
    }
}

impl Jet {
    /// The jet `{D^α f : |α| ≤ order}` of a catalog function.
    pub fn analytic(f: CatalogFunction, order: usize) -> Self {
        Self {
            dim: f.dim(),
            order,
            source: Source::Analytic(Arc::new(f)),
            domain: None,
        }
    }

    /// Jet from one closure per multi-index; every `|α| ≤ order` must be
    /// present exactly once.
    pub fn from_components(dim: usize, order: usize, components: Vec<(MultiIndex, Component)>) -> Result<Self> {
        check_dim(dim)?;
        let mut map = HashMap::new();
        for (a, c) in components {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: a.dim() });
            }
            if a.order() > order {
                return Err(Error::InvalidArgument(format!("component {a} exceeds the jet order {order}")));
            }
            if map.insert(a, c).is_some() {
                return Err(Error::InvalidArgument(format!("component {a} given twice")));
            }
        }
        for a in enumerate_multiindices(dim, order)? {
            if !map.contains_key(&a) {
                return Err(Error::InvalidArgument(format!("component {a} is missing")));
            }
        }
        Ok(Self {
            dim,
            order,
            source: Source::Components(Arc::new(map)),
            domain: None,
        })
    }

    /// Sample every component of `jet` on `grid`.
    pub fn sampled_from(jet: &Jet, grid: &Grid) -> Result<Self> {
        if grid.dim() != jet.dim {
            return Err(Error::DimensionMismatch { expected: jet.dim, got: grid.dim() });
        }
        let mut values = HashMap::new();
        for a in enumerate_multiindices(jet.dim, jet.order)? {
            values.insert(a, (0..grid.len()).map(|i| jet.eval(&a, grid.point(i))).collect());
        }
        Ok(Self {
            dim: jet.dim,
            order: jet.order,
            source: Source::Sampled(Arc::new(SampledJet { grid: grid.clone(), values })),
            domain: Some(grid.domain().clone()),
        })
    }

    /// Jet from raw per-member samples, one vector per multi-index.
    pub fn from_samples(grid: &Grid, order: usize, samples: Vec<(MultiIndex, Vec<f64>)>) -> Result<Self> {
        let dim = grid.dim();
        let mut values = HashMap::new();
        for (a, v) in samples {
            if v.len() != grid.len() {
                return Err(Error::DimensionMismatch { expected: grid.len(), got: v.len() });
            }
            if a.dim() != dim || a.order() > order {
                return Err(Error::InvalidArgument(format!("unexpected component {a}")));
            }
            values.insert(a, v);
        }
        for a in enumerate_multiindices(dim, order)? {
            if !values.contains_key(&a) {
                return Err(Error::InvalidArgument(format!("component {a} is missing")));
            }
        }
        Ok(Self {
            dim,
            order,
            source: Source::Sampled(Arc::new(SampledJet { grid: grid.clone(), values })),
            domain: Some(grid.domain().clone()),
        })
    }

    /// Restrict evaluation to `domain`: points outside are rejected.
    pub fn on_domain(mut self, domain: &Domain) -> Result<Self> {
        if domain.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: domain.dim() });
        }
        self.domain = Some(domain.clone());
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn order(&self) -> usize {
        self.order
    }

    /// The underlying catalog function, if analytic.
    pub fn catalog(&self) -> Option<&CatalogFunction> {
        match &self.source {
            Source::Analytic(c) => Some(c),
            _ => None,
        }
    }

    pub fn sampled(&self) -> Option<&SampledJet> {
        match &self.source {
            Source::Sampled(s) => Some(s),
            _ => None,
        }
    }

    /// Degree of the analytic polynomial behind this jet, if any. Remainders
    /// of such jets are computed from the tail `Σ_{|α|>k}` and vanish
    /// identically when the degree is at most `k`.
    pub fn exact_polynomial_degree(&self) -> Option<usize> {
        self.catalog().and_then(|c| c.polynomial_degree())
    }

    /// `f_α(x)` without validation.
    pub(crate) fn eval(&self, alpha: &MultiIndex, x: &[f64]) -> f64 {
        match &self.source {
            Source::Analytic(f) => CatalogFunction::derivative(f, alpha, x),
            Source::Components(map) => map[alpha](x),
            Source::Sampled(s) => s.grid.interpolate(&s.values[alpha], x).unwrap_or(f64::NAN),
        }
    }

    /// Exact `D^α f` of an analytic polynomial jet beyond the jet order.
    pub(crate) fn eval_beyond(&self, alpha: &MultiIndex, x: &[f64]) -> f64 {
        match &self.source {
            Source::Analytic(f) => CatalogFunction::derivative(f, alpha, x),
            _ => unreachable!("only analytic jets are differentiated beyond their order"),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if let Some(d) = &self.domain {
            d.check_point(x)?;
        }
        Ok(())
    }

    fn check_order(&self, k: usize) -> Result<()> {
        if k > self.order {
            Err(Error::OrderExceeded { requested: k, available: self.order })
        } else {
            Ok(())
        }
    }

    /// The component `f_α(x)`.
    pub fn component(&self, alpha: &MultiIndex, x: &[f64]) -> Result<f64> {
        if alpha.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: alpha.dim() });
        }
        self.check_order(alpha.order())?;
        self.check_point(x)?;
        Ok(self.eval(alpha, x))
    }

    /// `T^k_y F(x) = Σ_{|α|≤k} f_α(y)(x−y)^α/α!`.
    pub fn taylor_polynomial(&self, y: &[f64], x: &[f64], k: usize) -> Result<f64> {
        self.check_order(k)?;
        self.check_point(x)?;
        self.check_point(y)?;
        let v: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        Ok(enumerate_multiindices(self.dim, k)?
            .iter()
            .map(|a| self.eval(a, y) * a.monomial(&v) / a.factorial())
            .sum())
    }

    /// `R^k F(x, y) = f_0(x) − T^k_y F(x)`.
    pub fn taylor_remainder(&self, x: &[f64], y: &[f64], k: usize) -> Result<f64> {
        self.shifted_remainder(x, y, &MultiIndex::zero(self.dim), k)
    }

    /// `R^{k−|j|}_j F(x, y) = f_j(x) − Σ_{|j+α|≤k} f_{j+α}(y)(x−y)^α/α!`.
    pub fn shifted_remainder(&self, x: &[f64], y: &[f64], j: &MultiIndex, k: usize) -> Result<f64> {
        if j.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: j.dim() });
        }
        if j.order() > k {
            return Err(Error::ShiftTooLarge { shift: j.order(), order: k });
        }
        self.check_order(k)?;
        self.check_point(x)?;
        self.check_point(y)?;
        let v: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let s = k - j.order();
        if let Some(deg) = self.exact_polynomial_degree() {
            if deg <= k {
                return Ok(0.0);
            }
            let mut tail = 0.0;
            for order in (s + 1)..=(deg - j.order()) {
                for a in crate::multiindex::multiindices_of_order(self.dim, order)? {
                    tail += self.eval_beyond(&(*j + a), y) * a.monomial(&v) / a.factorial();
                }
            }
            return Ok(tail);
        }
        let t: f64 = enumerate_multiindices(self.dim, s)?
            .iter()
            .map(|a| self.eval(&(*j + *a), y) * a.monomial(&v) / a.factorial())
            .sum();
        Ok(self.eval(j, x) - t)
    }

    /// The value component `f_0` as a scalar field.
    pub fn value_field(&self) -> JetValueField {
        JetValueField { jet: self.clone() }
    }
}

/// `f_0` of a jet seen as a [`ScalarField`].
#[derive(Clone, Debug)]
pub struct JetValueField {
    jet: Jet,
}

impl ScalarField for JetValueField {
    fn dim(&self) -> usize {
        self.jet.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.jet.eval(&MultiIndex::zero(self.jet.dim), x)
    }
    fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> Option<f64> {
        match &self.jet.source {
            Source::Analytic(f) => Some(CatalogFunction::derivative(f, alpha, x)),
            _ if alpha.order() <= self.jet.order => Some(self.jet.eval(alpha, x)),
            _ => None,
        }
    }
    fn polynomial_degree(&self) -> Option<usize> {
        self.jet.exact_polynomial_degree()
    }
}
