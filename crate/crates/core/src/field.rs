//! Scalar fields and the alternating `m`-th difference.

use std::sync::Arc;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::multiindex::{binomial, multiindices_of_order, MultiIndex};

/// A real function on `R^n`. Implementors that know their derivatives (and
/// whether they are polynomials) expose that, which lets annihilation
/// identities hold exactly instead of up to rounding.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;

    /// `D^α f(x)` if available.
    fn derivative(&self, _alpha: &MultiIndex, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Total degree if the field is known to be a polynomial with exact
    /// [`ScalarField::derivative`].
    fn polynomial_degree(&self) -> Option<usize> {
        None
    }
}

impl<T: ScalarField + ?Sized> ScalarField for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> Option<f64> {
        (**self).derivative(alpha, x)
    }
    fn polynomial_degree(&self) -> Option<usize> {
        (**self).polynomial_degree()
    }
}

/// A field given by a closure; no derivative information.
#[derive(Clone)]
pub struct FnField {
    dim: usize,
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl FnField {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { dim, f: Arc::new(f) }
    }
}

impl ScalarField for FnField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Weights `δ_i = Σ_j (−1)^j C(m,j) (j/m)^i`, the action of the `m`-th
/// difference on `t^i` along the unit segment. `δ_i = 0` for `i < m`.
pub(crate) fn difference_moments(m: usize, max_power: usize) -> Vec<f64> {
    (0..=max_power)
        .map(|i| {
            if i < m {
                return 0.0;
            }
            (0..=m)
                .map(|j| {
                    let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                    s * binomial(m, j) * (j as f64 / m as f64).powi(i as i32)
                })
                .sum()
        })
        .collect()
}

/// `Σ_{j=0}^m (−1)^j C(m,j) f((m−j)x/m + jy/m)`.
///
/// All `m+1` sample points must lie in `domain` when one is given. For
/// polynomial fields with exact derivatives the difference is evaluated from
/// the Taylor coefficients of `t ↦ f(x + t(y−x))` of order `≥ m`, so
/// polynomials of degree `< m` give exactly zero.
pub fn mth_difference<F: ScalarField + ?Sized>(f: &F, x: &[f64], y: &[f64], m: usize, domain: Option<&Domain>) -> Result<f64> {
    let n = f.dim();
    for p in [x, y] {
        if p.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.len() });
        }
    }
    if m == 0 {
        return Err(Error::InvalidArgument("difference order must be at least 1".into()));
    }
    let point = |j: usize| -> Vec<f64> {
        let t = j as f64 / m as f64;
        (0..n).map(|i| (1.0 - t) * x[i] + t * y[i]).collect()
    };
    if let Some(d) = domain {
        for j in 0..=m {
            d.check_point(&point(j))?;
        }
    }
    if let Some(deg) = f.polynomial_degree() {
        if deg < m {
            return Ok(0.0);
        }
        let delta = difference_moments(m, deg);
        let v: Vec<f64> = (0..n).map(|i| y[i] - x[i]).collect();
        let mut total = 0.0;
        for (i, di) in delta.iter().enumerate().skip(m) {
            let mut ci = 0.0;
            for a in multiindices_of_order(n, i)? {
                let d = f.derivative(&a, x).expect("polynomial fields expose derivatives");
                ci += d * a.monomial(&v) / a.factorial();
            }
            total += ci * di;
        }
        return Ok(total);
    }
    Ok((0..=m)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            s * binomial(m, j) * f.value(&point(j))
        })
        .sum())
}
