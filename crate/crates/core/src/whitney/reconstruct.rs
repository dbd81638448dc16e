use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::lattice::{Grid, Offset};
use crate::multiindex::{binomial, enumerate_multiindices, multiindices_of_order, MultiIndex};

use super::{decompose, partition_of_unity, DyadicCube, PartitionOfUnity, WhitneyDecomposition};

/// A polynomial `Σ_β c_β (x − center)^β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalPolynomial {
    pub center: Vec<f64>,
    pub coefficients: Vec<(MultiIndex, f64)>,
}

impl LocalPolynomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let u: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        self.coefficients.iter().map(|(b, c)| c * b.monomial(&u)).sum()
    }
}

/// Coefficients of `T_Q F = ⨍_Q T^k_y F dy`, the average running over the
/// grid points in the closed cube `Q`.
pub fn averaged_taylor_coefficients(jet: &Jet, grid: &Grid, cube: &DyadicCube, k: usize) -> Result<LocalPolynomial> {
    let n = grid.dim();
    let q = cube.bbox();
    let members = grid.members_in_box(q.lo(), q.hi());
    let needed = 1usize << n;
    if members.len() < needed {
        return Err(Error::UnresolvedCube {
            center: q.center(),
            side: cube.side(),
            points: members.len(),
            needed,
        });
    }
    let center = q.center();
    let alphas = enumerate_multiindices(n, k)?;
    let mut sums = vec![0.0; alphas.len()];
    for &y in &members {
        let yp = grid.point(y);
        let v: Vec<f64> = yp.iter().zip(&center).map(|(a, c)| c - a).collect();
        let f: Vec<f64> = alphas.iter().map(|a| jet.component(a, yp)).collect::<Result<_>>()?;
        // (x − y)^α = Σ_{β≤α} C(α,β) u^β (c − y)^{α−β} with u = x − c
        for (bi, beta) in alphas.iter().enumerate() {
            let mut s = 0.0;
            for (ai, alpha) in alphas.iter().enumerate() {
                if let Some(rest) = alpha.checked_sub(beta) {
                    s += f[ai] * alpha.binomial(beta) * rest.monomial(&v) / alpha.factorial();
                }
            }
            sums[bi] += s;
        }
    }
    let count = members.len() as f64;
    Ok(LocalPolynomial {
        center,
        coefficients: alphas.into_iter().zip(sums).map(|(b, s)| (b, s / count)).collect(),
    })
}

/// `T_Q F(x)` for the averaged Taylor polynomial of order `k`.
pub fn averaged_taylor(jet: &Jet, grid: &Grid, cube: &DyadicCube, x: &[f64], k: usize) -> Result<f64> {
    Ok(averaged_taylor_coefficients(jet, grid, cube, k)?.eval(x))
}

/// `w^k = Σ_i φ_i T_{Q_i} F` sampled on a grid; `NaN` where the cubes do not
/// reach.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    partition: PartitionOfUnity,
    polynomials: Vec<LocalPolynomial>,
    values: Vec<f64>,
    grid: Grid,
}

impl Reconstruction {
    pub fn level(&self) -> u32 {
        self.partition.decomposition().level()
    }
    pub fn decomposition(&self) -> &WhitneyDecomposition {
        self.partition.decomposition()
    }
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn polynomials(&self) -> &[LocalPolynomial] {
        &self.polynomials
    }

    /// `w^k(x)` at an arbitrary covered point.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let w = self.partition.weights_at(x)?;
        Ok(w.iter().map(|&(i, phi)| phi * self.polynomials[i].eval(x)).sum())
    }
}

/// Build `w^k` from the averaged Taylor polynomials of order `order` on the
/// cubes of `pou`, sampled at the points of `grid`.
pub fn reconstruct(jet: &Jet, grid: &Grid, pou: &PartitionOfUnity, order: usize) -> Result<Reconstruction> {
    if jet.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: jet.dim(),
            got: grid.dim(),
        });
    }
    let dec = pou.decomposition();
    let polynomials: Vec<LocalPolynomial> = dec
        .cubes()
        .par_iter()
        .map(|c| averaged_taylor_coefficients(jet, grid, c, order))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            if !dec.in_covered_region(x) {
                return Ok(f64::NAN);
            }
            let w = pou.weights_at(x)?;
            Ok(w.iter().map(|&(c, phi)| phi * polynomials[c].eval(x)).sum())
        })
        .collect::<Result<_>>()?;
    Ok(Reconstruction {
        partition: pou.clone(),
        polynomials,
        values,
        grid: grid.clone(),
    })
}

/// Reconstructions at each of `levels`, all capped at `max_level`, for the
/// jet restricted to `Ω' = {dist(·, ∂Ω) > domain.margin()}`.
pub fn whitney_sweep(jet: &Jet, grid: &Grid, domain: &Domain, levels: &[u32], max_level: u32, order: usize) -> Result<Vec<Reconstruction>> {
    let finest = (-(max_level as f64)).exp2();
    if finest < 4.0 * grid.h() * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "finest cube side {finest} is below 4h = {}",
            4.0 * grid.h()
        )));
    }
    levels
        .iter()
        .map(|&k| {
            let dec = decompose(domain, k, max_level)?;
            reconstruct(jet, grid, &partition_of_unity(&dec), order)
        })
        .collect()
}

/// Measured errors and slope for one multi-index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaRate {
    pub alpha: MultiIndex,
    /// `‖f_α − D^α w^k‖_{L^p}` per level.
    pub errors: Vec<f64>,
    /// Least-squares slope of `log2` error against level; `None` when every
    /// error is at rounding level (exact reproduction).
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionDiagnostics {
    pub levels: Vec<u32>,
    pub p: f64,
    pub rates: Vec<AlphaRate>,
    /// `‖D^α w^k‖_{L^p}` per level, for each `|α| = m`.
    pub top_norms: Vec<(MultiIndex, Vec<f64>)>,
    /// Every top-order sequence ends at most 1.25× its first value.
    pub top_bounded: bool,
    pub evaluation_points: usize,
}

// Central stencil of order r at unit spacing.
fn stencil(r: u32) -> Vec<(i64, f64)> {
    if r.is_multiple_of(2) {
        let half = (r / 2) as i64;
        (0..=r as usize)
            .map(|j| {
                let sign = if (r as usize - j).is_multiple_of(2) { 1.0 } else { -1.0 };
                (j as i64 - half, sign * binomial(r as usize, j))
            })
            .collect()
    } else {
        let mut out: Vec<(i64, f64)> = Vec::new();
        for (o, c) in stencil(r - 1) {
            for (d, w) in [(-1i64, -0.5), (1, 0.5)] {
                match out.iter_mut().find(|(p, _)| *p == o + d) {
                    Some(e) => e.1 += c * w,
                    None => out.push((o + d, c * w)),
                }
            }
        }
        out
    }
}

fn tensor_stencil(alpha: &MultiIndex) -> Vec<(Offset, f64)> {
    let mut out = vec![([0i64; 3], 1.0)];
    for (i, &a) in alpha.entries().iter().enumerate() {
        let s = stencil(a);
        out = out
            .iter()
            .flat_map(|(off, c)| {
                s.iter().map(move |&(d, w)| {
                    let mut o = *off;
                    o[i] += d;
                    (o, c * w)
                })
            })
            .collect();
    }
    out
}

fn finite_difference(rec: &Reconstruction, i: usize, st: &[(Offset, f64)], scale: f64) -> f64 {
    let mut s = 0.0;
    for (off, c) in st {
        match rec.grid.neighbor(i, off) {
            Some(j) => s += c * rec.values[j],
            None => return f64::NAN,
        }
    }
    s / scale
}

fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Convergence rates of `D^α w^k → f_α` (`|α| ≤ m − 1`) and the top-order
/// norms `‖D^α w^k‖` (`|α| = m`) over a sequence of reconstructions sharing
/// one grid. Derivatives are central differences at grid scale, evaluated
/// where every stencil stays inside the covered region of every level.
pub fn reconstruction_diagnostics(jet: &Jet, recs: &[Reconstruction], m: usize, p: f64) -> Result<ReconstructionDiagnostics> {
    if recs.len() < 3 {
        return Err(Error::TooFewLevels { needed: 3, got: recs.len() });
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p = {p} must be a finite value ≥ 1")));
    }
    if m == 0 || jet.order() + 1 < m {
        return Err(Error::OrderExceeded {
            requested: m.saturating_sub(1),
            available: jet.order(),
        });
    }
    let grid = &recs[0].grid;
    if recs.iter().any(|r| r.grid.len() != grid.len() || r.grid.h() != grid.h()) {
        return Err(Error::InvalidArgument("reconstructions must share one grid".into()));
    }
    let n = grid.dim();
    let h = grid.h();
    let lower = enumerate_multiindices(n, m - 1)?;
    let top = multiindices_of_order(n, m)?;
    let stencils: Vec<(MultiIndex, Vec<(Offset, f64)>, f64)> = lower
        .iter()
        .chain(&top)
        .map(|a| (*a, tensor_stencil(a), h.powi(a.order() as i32)))
        .collect();
    let points: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            stencils.iter().all(|(_, st, _)| {
                st.iter()
                    .all(|(off, _)| grid.neighbor(i, off).is_some_and(|j| recs.iter().all(|r| r.values[j].is_finite())))
            })
        })
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyDomain("no grid point admits every difference stencil".into()));
    }
    let cell = grid.cell_volume();
    let norm = |vals: Vec<f64>| (crate::quadrature::pairwise_sum(&vals) * cell).powf(1.0 / p);
    let mut rates = Vec::new();
    let mut top_norms = Vec::new();
    for (alpha, st, scale) in &stencils {
        let per_level: Vec<f64> = recs
            .iter()
            .map(|r| {
                let terms: Vec<f64> = points
                    .par_iter()
                    .map(|&i| {
                        let d = finite_difference(r, i, st, *scale);
                        if alpha.order() < m {
                            (jet.component(alpha, grid.point(i)).unwrap_or(f64::NAN) - d).abs().powf(p)
                        } else {
                            d.abs().powf(p)
                        }
                    })
                    .collect();
                norm(terms)
            })
            .collect();
        if alpha.order() < m {
            let exact = per_level.iter().all(|e| *e < 1e-10);
            let slope = if exact {
                None
            } else {
                let xs: Vec<f64> = recs.iter().map(|r| r.level() as f64).collect();
                let ys: Vec<f64> = per_level.iter().map(|e| e.log2()).collect();
                Some(lsq_slope(&xs, &ys))
            };
            rates.push(AlphaRate {
                alpha: *alpha,
                errors: per_level,
                slope,
            });
        } else {
            top_norms.push((*alpha, per_level));
        }
    }
    let top_bounded = top_norms
        .iter()
        .all(|(_, v)| v.last().copied().unwrap_or(0.0) <= 1.25 * v[0] + 1e-12);
    Ok(ReconstructionDiagnostics {
        levels: recs.iter().map(|r| r.level()).collect(),
        p,
        rates,
        top_norms,
        top_bounded,
        evaluation_points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::CatalogFunction;
    use crate::quadrature::integrate;

    #[test]
    fn stencils_differentiate_monomials() {
        for r in 0..5u32 {
            let s = stencil(r);
            for deg in 0..=r {
                let v: f64 = s.iter().map(|&(o, c)| c * (o as f64).powi(deg as i32)).sum();
                let expect = if deg == r { crate::multiindex::factorial(r as usize) } else { 0.0 };
                assert!((v - expect).abs() < 1e-12, "r={r} deg={deg} v={v}");
            }
        }
    }

    #[test]
    fn averaged_taylor_matches_quadrature() {
        let d = Domain::open_box(&[0.0], &[std::f64::consts::PI]).unwrap();
        let grid = Grid::new(&d, 1.0 / 4096.0).unwrap();
        let jet = Jet::analytic(CatalogFunction::parse("sin", 1).unwrap(), 1);
        let cube = DyadicCube { level: 2, index: [4, 0, 0], dim: 1 };
        let got = averaged_taylor(&jet, &grid, &cube, &[1.5], 1).unwrap();
        let exact = integrate(|y| y.sin() + y.cos() * (1.5 - y), 1.0, 1.25, 1e-14).unwrap() / 0.25;
        assert!((got - exact).abs() < 1e-6, "{got} {exact}");
    }

    #[test]
    fn polynomial_reproduced() {
        let d = Domain::unit_cube(2).unwrap().with_margin(0.05).unwrap();
        let grid = Grid::new(&Domain::unit_cube(2).unwrap(), 1.0 / 128.0).unwrap();
        let f = CatalogFunction::parse("1+2x-3y+0.5xy", 2).unwrap();
        let jet = Jet::analytic(f.clone(), 2);
        let dec = decompose(&d, 2, 5).unwrap();
        let rec = reconstruct(&jet, &grid, &partition_of_unity(&dec), 2).unwrap();
        let mut count = 0;
        for (i, v) in rec.values().iter().enumerate() {
            if v.is_finite() {
                assert!((v - f.value(grid.point(i))).abs() < 1e-10);
                count += 1;
            }
        }
        assert!(count > 5000, "{count}");
    }

    #[test]
    fn too_few_levels() {
        let d = Domain::unit_cube(1).unwrap().with_margin(0.1).unwrap();
        let grid = Grid::new(&Domain::unit_cube(1).unwrap(), 1.0 / 256.0).unwrap();
        let jet = Jet::analytic(CatalogFunction::parse("exp", 1).unwrap(), 0);
        let recs = whitney_sweep(&jet, &grid, &d, &[2, 3], 6, 0).unwrap();
        assert!(matches!(reconstruction_diagnostics(&jet, &recs, 1, 2.0), Err(Error::TooFewLevels { .. })));
    }

    #[test]
    fn exp_first_order_rate() {
        let d = Domain::unit_cube(1).unwrap().with_margin(0.1).unwrap();
        let grid = Grid::new(&Domain::unit_cube(1).unwrap(), 1.0 / 2048.0).unwrap();
        let jet = Jet::analytic(CatalogFunction::parse("exp", 1).unwrap(), 1);
        let recs = whitney_sweep(&jet, &grid, &d, &[3, 4, 5, 6], 9, 0).unwrap();
        let diag = reconstruction_diagnostics(&jet, &recs, 1, 2.0).unwrap();
        let slope = diag.rates[0].slope.unwrap();
        assert!((slope + 1.0).abs() < 0.2, "{slope} {:?}", diag.rates[0].errors);
    }
}
