//! Quadrature on the unit sphere `∂B(0,1) ⊂ R^n` and the norm it induces on
//! order-`m` coefficient vectors, `‖v‖ = (∫ |v·E(e)|^p de)^{1/p}` with
//! `E_α(e) = e^α/α!`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::lattice::Grid;
use crate::multiindex::{check_dim, multiindices_of_order, MultiIndex, MAX_DIM};
use crate::quadrature::{gauss_legendre, pairwise_sum};

/// Seed of the random directions drawn by [`norm_equivalence_probe`].
pub const PROBE_SEED: u64 = 0x5eed_0001;

/// `ω_{n−1}`, the surface measure of the unit sphere in `R^n`.
pub fn sphere_measure(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => f64::NAN,
    }
}

/// Nodes and weights on the unit sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereRule {
    dim: usize,
    nodes: Vec<[f64; MAX_DIM]>,
    weights: Vec<f64>,
}

/// Node counts for [`SphereRule::with_nodes`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereNodes {
    /// Uniform angles for `n = 2`, azimuths for `n = 3`.
    pub azimuth: usize,
    /// Gauss–Legendre nodes in `cos θ` for `n = 3`.
    pub polar: usize,
}

impl Default for SphereNodes {
    fn default() -> Self {
        Self { azimuth: 64, polar: 32 }
    }
}

impl SphereRule {
    /// Default rule: `{±1}` for `n = 1`, 64 angles for `n = 2`, 32×64 for `n = 3`.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_nodes(n, SphereNodes::default())
    }

    pub fn with_nodes(n: usize, nodes: SphereNodes) -> Result<Self> {
        check_dim(n)?;
        let mut pts = Vec::new();
        let mut w = Vec::new();
        match n {
            1 => {
                pts.push([-1.0, 0.0, 0.0]);
                pts.push([1.0, 0.0, 0.0]);
                w.extend([1.0, 1.0]);
            }
            2 => {
                if nodes.azimuth == 0 {
                    return Err(Error::InvalidArgument("need at least one angle".into()));
                }
                let k = nodes.azimuth;
                for i in 0..k {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                    pts.push([t.cos(), t.sin(), 0.0]);
                    w.push(2.0 * std::f64::consts::PI / k as f64);
                }
            }
            _ => {
                if nodes.azimuth == 0 || nodes.polar == 0 {
                    return Err(Error::InvalidArgument("need at least one node per angle".into()));
                }
                let (z, wz) = gauss_legendre(nodes.polar);
                let k = nodes.azimuth;
                for (zi, wi) in z.iter().zip(&wz) {
                    let s = (1.0 - zi * zi).sqrt();
                    for j in 0..k {
                        let t = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                        pts.push([s * t.cos(), s * t.sin(), *zi]);
                        w.push(wi * 2.0 * std::f64::consts::PI / k as f64);
                    }
                }
            }
        }
        Ok(Self { dim: n, nodes: pts, weights: w })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i][..self.dim]
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// `E_α(e_i)` for every node and every `|α| = m`, row-major by node.
    fn basis(&self, m: usize) -> Result<(Vec<MultiIndex>, Vec<f64>)> {
        let alphas = multiindices_of_order(self.dim, m)?;
        let mut table = Vec::with_capacity(alphas.len() * self.len());
        for i in 0..self.len() {
            for a in &alphas {
                table.push(a.monomial(self.node(i)) / a.factorial());
            }
        }
        Ok((alphas, table))
    }
}

/// Components `v_α` for `|α| = m`, in [`multiindices_of_order`] order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    dim: usize,
    order: usize,
    values: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(dim: usize, order: usize, values: Vec<f64>) -> Result<Self> {
        let count = multiindices_of_order(dim, order)?.len();
        if values.len() != count {
            return Err(Error::DimensionMismatch { expected: count, got: values.len() });
        }
        Ok(Self { dim, order, values })
    }

    pub fn zero(dim: usize, order: usize) -> Result<Self> {
        let count = multiindices_of_order(dim, order)?.len();
        Self::new(dim, order, vec![0.0; count])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn order(&self) -> usize {
        self.order
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim || self.order != other.order {
            return Err(Error::InvalidArgument("coefficient vectors of different shape".into()));
        }
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            ..self.clone()
        })
    }
}

fn abs_pow(v: f64, p: f64) -> f64 {
    if p == 2.0 {
        v * v
    } else if p == 1.0 {
        v.abs()
    } else {
        v.abs().powf(p)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("exponent p = {p} must be at least 1")))
    }
}

fn sphere_sum(values: &[f64], basis: &[f64], rule: &SphereRule, p: f64) -> f64 {
    let k = values.len();
    let terms: Vec<f64> = (0..rule.len())
        .map(|i| {
            let dot: f64 = values.iter().zip(&basis[i * k..(i + 1) * k]).map(|(v, e)| v * e).sum();
            rule.weights[i] * abs_pow(dot, p)
        })
        .collect();
    pairwise_sum(&terms)
}

/// `‖v‖ = (Σ_i w_i |v·E(e_i)|^p)^{1/p}`.
pub fn coeff_sphere_norm(v: &CoefficientVector, p: f64, rule: &SphereRule) -> Result<f64> {
    check_p(p)?;
    if v.dim != rule.dim {
        return Err(Error::DimensionMismatch { expected: rule.dim, got: v.dim });
    }
    let (_, basis) = rule.basis(v.order)?;
    Ok(sphere_sum(&v.values, &basis, rule, p).powf(1.0 / p))
}

/// `∫_Ω Σ_i w_i |Σ_{|α|=m} f_α(x) E_α(e_i)|^p dx` with the lattice midpoint
/// rule in `x`.
pub fn sphere_limit_target(jet: &Jet, grid: &Grid, m: usize, p: f64, rule: &SphereRule) -> Result<f64> {
    check_p(p)?;
    if jet.order() < m {
        return Err(Error::OrderExceeded { requested: m, available: jet.order() });
    }
    if grid.dim() != jet.dim() || rule.dim != jet.dim() {
        return Err(Error::DimensionMismatch { expected: jet.dim(), got: grid.dim() });
    }
    let (alphas, basis) = rule.basis(m)?;
    let per_point: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            let v: Vec<f64> = alphas.iter().map(|a| jet.eval(a, x)).collect();
            sphere_sum(&v, &basis, rule, p)
        })
        .collect();
    Ok(pairwise_sum(&per_point) * grid.cell_volume())
}

/// Empirical equivalence constants between the sphere norm and the
/// Euclidean norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub c_lower: f64,
    pub c_upper: f64,
}

/// Min and max of `‖v‖/|v|_2` over `samples` random unit vectors drawn with
/// the fixed seed [`PROBE_SEED`].
pub fn norm_equivalence_probe(m: usize, n: usize, p: f64, rule: &SphereRule, samples: usize) -> Result<NormBounds> {
    check_p(p)?;
    if samples < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 samples, got {samples}")));
    }
    if rule.dim != n {
        return Err(Error::DimensionMismatch { expected: n, got: rule.dim });
    }
    let (alphas, basis) = rule.basis(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for _ in 0..samples {
        let mut v: Vec<f64> = (0..alphas.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let r = sphere_sum(&v, &basis, rule, p).powf(1.0 / p);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok(NormBounds { c_lower: lo, c_upper: hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::CatalogFunction;
    use crate::domain::Domain;

    #[test]
    fn total_weights() {
        for n in 1..=3 {
            let r = SphereRule::new(n).unwrap();
            assert!((r.total_weight() - sphere_measure(n)).abs() < 1e-10);
        }
        assert_eq!(SphereRule::new(1).unwrap().total_weight(), 2.0);
    }

    #[test]
    fn norm_examples() {
        let r1 = SphereRule::new(1).unwrap();
        let v = CoefficientVector::new(1, 1, vec![-3.0]).unwrap();
        assert!((coeff_sphere_norm(&v, 3.0, &r1).unwrap() - (2.0f64 * 27.0).powf(1.0 / 3.0)).abs() < 1e-12);
        let r2 = SphereRule::new(2).unwrap();
        let e1 = CoefficientVector::new(2, 1, vec![1.0, 0.0]).unwrap();
        assert!((coeff_sphere_norm(&e1, 2.0, &r2).unwrap() - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert_eq!(coeff_sphere_norm(&CoefficientVector::zero(2, 2).unwrap(), 1.0, &r2).unwrap(), 0.0);
    }

    #[test]
    fn targets() {
        let d = Domain::unit_cube(1).unwrap();
        let g = Grid::new(&d, 1.0 / 256.0).unwrap();
        let r = SphereRule::new(1).unwrap();
        let x = Jet::analytic(CatalogFunction::parse("x", 1).unwrap(), 1);
        assert!((sphere_limit_target(&x, &g, 1, 2.0, &r).unwrap() - 2.0).abs() < 1e-12);
        let c = Jet::analytic(CatalogFunction::parse("x^3", 1).unwrap(), 2);
        assert!((sphere_limit_target(&c, &g, 2, 2.0, &r).unwrap() - 6.0).abs() < 1e-3);
        assert!(sphere_limit_target(&x, &g, 2, 2.0, &r).is_err());
    }

    #[test]
    fn probe() {
        let r = SphereRule::new(1).unwrap();
        let b = norm_equivalence_probe(1, 1, 2.0, &r, 100).unwrap();
        assert!((b.c_lower - 2f64.sqrt()).abs() < 1e-12 && (b.c_upper - 2f64.sqrt()).abs() < 1e-12);
        let r2 = SphereRule::new(2).unwrap();
        let b = norm_equivalence_probe(2, 2, 2.0, &r2, 500).unwrap();
        assert!(b.c_lower > 0.0 && b.c_upper / b.c_lower < 10.0);
        assert!(norm_equivalence_probe(1, 1, 2.0, &r, 10).is_err());
    }
}
