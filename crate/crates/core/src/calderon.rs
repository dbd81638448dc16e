//! The maximal function
//! `N(f, y) = sup_ε ε^{−m} (⨍_{B(y,ε)} |f − P_{y,ε}|^p)^{1/p}` with `P_{y,ε}`
//! the best `L^p` polynomial of degree `m − 1` on the ball, the sup taken
//! over a finite descending grid of radii.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::lattice::Grid;
use crate::multiindex::{enumerate_multiindices, MultiIndex};
use crate::whitney::LocalPolynomial;

pub const IRLS_TOLERANCE: f64 = 1e-8;
pub const IRLS_MAX_ITERATIONS: usize = 100;
pub const IRLS_RIDGE: f64 = 1e-12;

/// Log-slope of `ε^{−m}·residual` against `1/ε` above which the last radii
/// of a profile are flagged as growing without bound.
pub const UNBOUNDED_SLOPE: f64 = 0.25;

/// Best polynomial on a sample set and its `p`-residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFit {
    pub polynomial: LocalPolynomial,
    /// `(mean |f − P|^p)^{1/p}` over the samples.
    pub residual: f64,
    pub samples: usize,
    pub iterations: usize,
}

/// `(mean |v_i − P(x_i)|^p)^{1/p}`.
pub fn mean_residual(points: &[&[f64]], values: &[f64], poly: &LocalPolynomial, p: f64) -> f64 {
    let terms: Vec<f64> = points.iter().zip(values).map(|(x, v)| (v - poly.eval(x)).abs().powf(p)).collect();
    (crate::quadrature::pairwise_sum(&terms) / points.len() as f64).powf(1.0 / p)
}

fn solve_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let k = a.ncols();
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.iter().any(|s| *s <= 1e-10 * smax) || smax == 0.0 {
        return Err(Error::RankDeficient(format!("{} samples for {k} monomials", b.len())));
    }
    svd.solve(b, 0.0).map_err(|e| Error::RankDeficient(e.to_string()))
}

/// Fit `Σ_{|β|≤degree} c_β (x − center)^β` to samples, minimising the `p`-norm
/// of the residual. `scale` normalises the monomials for conditioning.
pub fn fit_polynomial(points: &[&[f64]], values: &[f64], center: &[f64], scale: f64, degree: usize, p: f64) -> Result<PolynomialFit> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p = {p} must be a finite value ≥ 1")));
    }
    if points.is_empty() {
        return Err(Error::EmptyDomain("no samples to fit".into()));
    }
    let n = center.len();
    let basis = enumerate_multiindices(n, degree)?;
    if points.len() < basis.len() {
        return Err(Error::RankDeficient(format!("{} samples for {} monomials", points.len(), basis.len())));
    }
    let a = DMatrix::from_fn(points.len(), basis.len(), |r, c| {
        let u: Vec<f64> = points[r].iter().zip(center).map(|(x, y)| (x - y) / scale).collect();
        basis[c].monomial(&u)
    });
    let b = DVector::from_column_slice(values);
    let mut coef = solve_least_squares(&a, &b)?;
    let mut iterations = 0;
    if p != 2.0 {
        let k = basis.len();
        for it in 1..=IRLS_MAX_ITERATIONS {
            iterations = it;
            let r = &b - &a * &coef;
            let rmax = r.amax();
            if rmax <= 64.0 * f64::EPSILON * b.amax() {
                break;
            }
            let floor = (1e-8 * rmax).max(1e-300);
            let w = r.map(|v| v.abs().max(floor).powf(p - 2.0));
            let s = w.map(f64::sqrt);
            let mut aw = a.clone();
            for (mut row, si) in aw.row_iter_mut().zip(s.iter()) {
                row *= *si;
            }
            let mut normal = aw.transpose() * &aw;
            let trace = normal.trace().max(f64::MIN_POSITIVE);
            for i in 0..k {
                normal[(i, i)] += IRLS_RIDGE * trace / k as f64;
            }
            let rhs = aw.transpose() * b.component_mul(&s);
            let next = normal
                .cholesky()
                .ok_or_else(|| Error::RankDeficient("weighted normal system is singular".into()))?
                .solve(&rhs);
            // the relaxed step is a Newton step for p > 2
            let relax = if p > 2.0 { 1.0 / (p - 1.0) } else { 1.0 };
            let next = &coef + (next - &coef) * relax;
            let change = (&next - &coef).amax();
            let size = next.amax().max(1.0);
            coef = next;
            if change <= IRLS_TOLERANCE * size {
                break;
            }
        }
    }
    let coefficients: Vec<(MultiIndex, f64)> = basis
        .iter()
        .zip(coef.iter())
        .map(|(b, c)| (*b, c / scale.powi(b.order() as i32)))
        .collect();
    let polynomial = LocalPolynomial {
        center: center.to_vec(),
        coefficients,
    };
    Ok(PolynomialFit {
        residual: mean_residual(points, values, &polynomial, p),
        polynomial,
        samples: points.len(),
        iterations,
    })
}

fn exact_fit<F: ScalarField + ?Sized>(f: &F, y: &[f64], degree: usize, samples: usize) -> Option<PolynomialFit> {
    let deg = f.polynomial_degree()?;
    if deg > degree {
        return None;
    }
    let basis = enumerate_multiindices(y.len(), degree).ok()?;
    let coefficients = basis
        .iter()
        .map(|b| Some((*b, f.derivative(b, y)? / b.factorial())))
        .collect::<Option<Vec<_>>>()?;
    Some(PolynomialFit {
        polynomial: LocalPolynomial {
            center: y.to_vec(),
            coefficients,
        },
        residual: 0.0,
        samples,
        iterations: 0,
    })
}

/// Best degree-`degree` polynomial for `f` on the grid points of `B(y, ε)`.
///
/// Fields that report an exact polynomial degree not above `degree` are
/// returned as their own Taylor polynomial at `y` with residual 0.
pub fn best_local_polynomial<F: ScalarField + ?Sized>(f: &F, grid: &Grid, y: &[f64], eps: f64, degree: usize, p: f64) -> Result<PolynomialFit> {
    if y.len() != grid.dim() || f.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: y.len(),
        });
    }
    let members = grid.members_in_ball(y, eps);
    if members.is_empty() {
        return Err(Error::EmptyDomain(format!("ball of radius {eps} around {y:?} holds no grid point")));
    }
    if let Some(fit) = exact_fit(f, y, degree, members.len()) {
        return Ok(fit);
    }
    let points: Vec<&[f64]> = members.iter().map(|&i| grid.point(i)).collect();
    let values: Vec<f64> = points.iter().map(|x| f.value(x)).collect();
    fit_polynomial(&points, &values, y, eps, degree, p)
}

/// `N(f, y)` over a finite radius grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalValue {
    pub value: f64,
    pub argmax_eps: f64,
    /// `ε^{−m}·residual` for each radius of the grid.
    pub per_radius: Vec<f64>,
    /// The last two steps of the grid grow with log-slope above
    /// [`UNBOUNDED_SLOPE`].
    pub unbounded: bool,
}

fn check_radii(grid: &Grid, radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("empty radius grid".into()));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("radius grid must be strictly descending".into()));
    }
    let last = *radii.last().expect("non-empty");
    if last < 2.0 * grid.h() {
        return Err(Error::Unresolved { eps: last, h: grid.h() });
    }
    Ok(())
}

/// `max_j ε_j^{−m} (⨍_{B(y,ε_j)} |f − P|^p)^{1/p}` with `P` of degree `m − 1`.
pub fn maximal_function<F: ScalarField + ?Sized>(f: &F, grid: &Grid, y: &[f64], m: usize, p: f64, radii: &[f64]) -> Result<MaximalValue> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    check_radii(grid, radii)?;
    let per_radius: Vec<f64> = radii
        .iter()
        .map(|&e| Ok(best_local_polynomial(f, grid, y, e, m - 1, p)?.residual / e.powi(m as i32)))
        .collect::<Result<_>>()?;
    let (j, value) = per_radius
        .iter()
        .enumerate()
        .fold((0, per_radius[0]), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    let k = radii.len();
    let unbounded = k >= 3
        && (k - 2..k).all(|i| {
            let (a, b) = (per_radius[i - 1], per_radius[i]);
            a > 0.0 && b > 0.0 && (b / a).ln() / (radii[i - 1] / radii[i]).ln() > UNBOUNDED_SLOPE
        });
    Ok(MaximalValue {
        value,
        argmax_eps: radii[j],
        per_radius,
        unbounded,
    })
}

/// `N(f, ·)` over interior centers `y` with `B(y, ε_max) ⊂ Ω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalProfile {
    pub centers: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub argmax_eps: Vec<f64>,
    pub unbounded: Vec<bool>,
    pub radii: Vec<f64>,
    pub degree: usize,
    /// Measure represented by each center.
    pub weight: f64,
}

impl MaximalProfile {
    /// Discrete `‖N(f, ·)‖_{L^p}` over the centers.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let terms: Vec<f64> = self.values.iter().map(|v| v.powf(p)).collect();
        (crate::quadrature::pairwise_sum(&terms) * self.weight).powf(1.0 / p)
    }
}

/// Profile of `N(f, ·)` at every `stride`-th grid point along each axis.
pub fn maximal_profile<F: ScalarField + Sync + ?Sized>(f: &F, grid: &Grid, m: usize, p: f64, radii: &[f64], stride: usize) -> Result<MaximalProfile> {
    check_radii(grid, radii)?;
    let stride = stride.max(1) as i64;
    let reach = radii[0];
    let centers: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            grid.lattice_index(i).iter().take(grid.dim()).all(|c| c % stride == 0) && grid.domain().boundary_distance(grid.point(i)) >= reach
        })
        .collect();
    if centers.is_empty() {
        return Err(Error::EmptyDomain(format!("no center lies at distance ≥ {reach} from the boundary")));
    }
    let values: Vec<MaximalValue> = centers
        .par_iter()
        .map(|&i| maximal_function(f, grid, grid.point(i), m, p, radii))
        .collect::<Result<_>>()?;
    Ok(MaximalProfile {
        centers: centers.iter().map(|&i| grid.point(i).to_vec()).collect(),
        values: values.iter().map(|v| v.value).collect(),
        argmax_eps: values.iter().map(|v| v.argmax_eps).collect(),
        unbounded: values.iter().map(|v| v.unbounded).collect(),
        radii: radii.to_vec(),
        degree: m - 1,
        weight: grid.cell_volume() * (stride as f64).powi(grid.dim() as i32),
    })
}
