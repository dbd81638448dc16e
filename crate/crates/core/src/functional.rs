//! Double-integral functionals over `Ω × Ω` on a uniform lattice and their
//! ε-sweeps.
//!
//! Every functional has the shape `∬ G(x, y) ω(|x−y|) dx dy` with a smooth
//! numerator `G` (a remainder or difference divided by a power of `|x−y|`)
//! and a radial weight `ω`. Pairs of lattice cells contribute
//! `h^{2n} G(x_i, y_j) W(x_i − y_j)`. With [`WeightRule::CellAveraged`]
//! (the default), `W(dh) = ∫ ω(|z|) Λ_h(z − dh) dz` where `Λ_h` is the
//! normalised tensor tent, i.e. the exact cell-pair average of `ω`. This
//! removes the `O(h/ε)` bias that the sharp cutoff of compactly supported
//! kernels would otherwise cause. [`WeightRule::Midpoint`] uses `ω(|dh|)`.
//! Pairs in the same cell are excluded in both rules.
//!
//! Summation is ordered: one serial sum per outer lattice point, then a
//! pairwise reduction over points, so results do not depend on the thread
//! count.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::{difference_moments, ScalarField};
use crate::jet::Jet;
use crate::lattice::{Grid, Offset};
use crate::mollifier::Mollifier;
use crate::multiindex::{binomial, enumerate_multiindices, multiindices_of_order, MultiIndex, MAX_DIM};
use crate::quadrature::{gauss_legendre, pairwise_sum};
use crate::sphere::sphere_measure;

/// How the radial weight is integrated over a pair of cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    #[default]
    CellAveraged,
    Midpoint,
}

/// Options shared by the lattice functionals. The spacing comes from the
/// [`Grid`] passed alongside.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Only pairs with `|x−y| <` cutoff contribute.
    #[serde(default)]
    pub cutoff: Option<f64>,
    #[serde(default)]
    pub weights: WeightRule,
}

impl QuadratureConfig {
    fn validate(&self, h: f64) -> Result<()> {
        match self.cutoff {
            Some(c) if !(c >= h) => Err(Error::InvalidArgument(format!("cutoff {c} is below the grid spacing {h}"))),
            _ => Ok(()),
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("exponent p = {p} must be at least 1")))
    }
}

fn check_resolved(eps: f64, h: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("scale {eps} must be positive")));
    }
    if eps < 2.0 * h {
        return Err(Error::Unresolved { eps, h });
    }
    Ok(())
}

#[inline]
fn abs_pow(v: f64, p: f64) -> f64 {
    if p == 2.0 {
        v * v
    } else if p == 1.0 {
        v.abs()
    } else {
        v.abs().powf(p)
    }
}

// ---------------------------------------------------------------------------
// Offset tables

struct Kernel<'a> {
    f: &'a (dyn Fn(f64) -> f64 + Sync),
    support: f64,
    breaks: Vec<f64>,
}

struct OffsetTable {
    offsets: Vec<Offset>,
    weights: Vec<f64>,
    radius: Vec<f64>,
}

fn max_depth(n: usize) -> usize {
    match n {
        1 => 40,
        2 => 8,
        _ => 5,
    }
}

const GAUSS_NODES: usize = 4;

/// `Σ_{s ∈ {±1}^n} ∫_{[0,1]^n} ω(|z(u)|) Π(1−u_i) du`, `z_i = (d_i + s_i u_i) h`.
fn tent_weight(kernel: &Kernel, d: &[i64], h: f64, gauss: &(Vec<f64>, Vec<f64>)) -> f64 {
    let n = d.len();
    let mut total = 0.0;
    for signs in 0..(1usize << n) {
        let s: Vec<f64> = (0..n).map(|i| if signs >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let lo = vec![0.0; n];
        let hi = vec![1.0; n];
        total += piece(kernel, d, &s, h, &lo, &hi, 0, gauss);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn piece(kernel: &Kernel, d: &[i64], s: &[f64], h: f64, lo: &[f64], hi: &[f64], depth: usize, gauss: &(Vec<f64>, Vec<f64>)) -> f64 {
    let n = d.len();
    let mut rmin2 = 0.0;
    let mut rmax2 = 0.0;
    for i in 0..n {
        let a = (d[i] as f64 + s[i] * lo[i]) * h;
        let b = (d[i] as f64 + s[i] * hi[i]) * h;
        let (zl, zh) = if a <= b { (a, b) } else { (b, a) };
        let near = if zl > 0.0 {
            zl
        } else if zh < 0.0 {
            -zh
        } else {
            0.0
        };
        let far = zl.abs().max(zh.abs());
        rmin2 += near * near;
        rmax2 += far * far;
    }
    let (rmin, rmax) = (rmin2.sqrt(), rmax2.sqrt());
    if rmin >= kernel.support {
        return 0.0;
    }
    let straddles = kernel.breaks.iter().any(|&b| rmin < b && b < rmax) || rmin == 0.0;
    if straddles && depth < max_depth(n) {
        let mut total = 0.0;
        for child in 0..(1usize << n) {
            let mut clo = lo.to_vec();
            let mut chi = hi.to_vec();
            for i in 0..n {
                let mid = 0.5 * (lo[i] + hi[i]);
                if child >> i & 1 == 1 {
                    clo[i] = mid;
                } else {
                    chi[i] = mid;
                }
            }
            total += piece(kernel, d, s, h, &clo, &chi, depth + 1, gauss);
        }
        return total;
    }
    let (x, w) = gauss;
    let q = x.len();
    let mut total = 0.0;
    let count = q.pow(n as u32);
    for k in 0..count {
        let mut rest = k;
        let mut weight = 1.0;
        let mut r2 = 0.0;
        for i in 0..n {
            let j = rest % q;
            rest /= q;
            let half = 0.5 * (hi[i] - lo[i]);
            let u = lo[i] + half * (x[j] + 1.0);
            weight *= half * w[j] * (1.0 - u);
            let z = (d[i] as f64 + s[i] * u) * h;
            r2 += z * z;
        }
        let r = r2.sqrt();
        if r < kernel.support {
            total += weight * (kernel.f)(r);
        }
    }
    total
}

fn offset_table(grid: &Grid, kernel: &Kernel, rule: WeightRule) -> OffsetTable {
    let n = grid.dim();
    let h = grid.h();
    let reach: Vec<i64> = (0..n)
        .map(|i| {
            let lattice = grid.counts()[i] as i64 - 1;
            if kernel.support.is_finite() {
                ((kernel.support / h).ceil() as i64 + 1).min(lattice)
            } else {
                lattice
            }
        })
        .collect();
    let mut candidates = Vec::new();
    let mut idx = vec![0i64; n];
    let total: usize = reach.iter().map(|r| (2 * r + 1) as usize).product();
    for lin in 0..total {
        let mut rest = lin;
        for i in 0..n {
            let w = (2 * reach[i] + 1) as usize;
            idx[i] = (rest % w) as i64 - reach[i];
            rest /= w;
        }
        if idx.iter().all(|&v| v == 0) {
            continue;
        }
        let r = idx.iter().map(|&v| (v as f64 * h).powi(2)).sum::<f64>().sqrt();
        let near = idx.iter().map(|&v| ((v.abs() - 1).max(0) as f64 * h).powi(2)).sum::<f64>().sqrt();
        let keep = match rule {
            WeightRule::Midpoint => r < kernel.support,
            WeightRule::CellAveraged => near < kernel.support,
        };
        if keep {
            let mut o = [0i64; MAX_DIM];
            o[..n].copy_from_slice(&idx);
            candidates.push((o, r));
        }
    }
    let weights: Vec<f64> = match rule {
        WeightRule::Midpoint => candidates.iter().map(|(_, r)| (kernel.f)(*r)).collect(),
        WeightRule::CellAveraged => {
            let key = |o: &Offset| {
                let mut k: Vec<i64> = o[..n].iter().map(|v| v.abs()).collect();
                k.sort_unstable();
                k
            };
            let mut keys: Vec<Vec<i64>> = candidates.iter().map(|(o, _)| key(o)).collect();
            keys.sort();
            keys.dedup();
            let gauss = gauss_legendre(GAUSS_NODES);
            let values: Vec<f64> = keys.par_iter().map(|k| tent_weight(kernel, k, h, &gauss)).collect();
            let map: HashMap<&Vec<i64>, f64> = keys.iter().zip(values).collect();
            candidates.iter().map(|(o, _)| map[&key(o)]).collect()
        }
    };
    let mut table = OffsetTable {
        offsets: Vec::new(),
        weights: Vec::new(),
        radius: Vec::new(),
    };
    for ((o, r), w) in candidates.into_iter().zip(weights) {
        if w != 0.0 {
            table.offsets.push(o);
            table.weights.push(w);
            table.radius.push(r);
        }
    }
    table
}

// ---------------------------------------------------------------------------
// Remainders on the lattice

/// Samples needed to evaluate `R_j^{k−|j|}F(x_i, y_l)` for lattice members.
struct RemainderPlan {
    target: Option<Vec<f64>>,
    alphas: Vec<MultiIndex>,
    samples: Vec<Vec<f64>>,
}

impl RemainderPlan {
    fn new(jet: &Jet, grid: &Grid, j: &MultiIndex, k: usize) -> Result<Self> {
        let n = jet.dim();
        if grid.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: grid.dim() });
        }
        if j.order() > k {
            return Err(Error::ShiftTooLarge { shift: j.order(), order: k });
        }
        if k > jet.order() {
            return Err(Error::OrderExceeded { requested: k, available: jet.order() });
        }
        let s = k - j.order();
        let sample = |a: &MultiIndex, beyond: bool| -> Vec<f64> {
            (0..grid.len())
                .into_par_iter()
                .map(|i| if beyond { jet.eval_beyond(a, grid.point(i)) } else { jet.eval(a, grid.point(i)) })
                .collect()
        };
        if let Some(deg) = jet.exact_polynomial_degree() {
            let mut alphas = Vec::new();
            let mut samples = Vec::new();
            if deg > k {
                for order in (s + 1)..=(deg - j.order()) {
                    for a in multiindices_of_order(n, order)? {
                        samples.push(sample(&(*j + a), true));
                        alphas.push(a);
                    }
                }
            }
            return Ok(Self { target: None, alphas, samples });
        }
        let alphas = enumerate_multiindices(n, s)?;
        let samples = alphas.iter().map(|a| sample(&(*j + *a), false)).collect();
        Ok(Self {
            target: Some(sample(j, false)),
            alphas,
            samples,
        })
    }

    fn is_zero(&self) -> bool {
        self.target.is_none() && self.alphas.is_empty()
    }

    /// `(x−y)^α/α!` with `x − y = −d h`, flattened per offset.
    fn monomials(&self, table: &OffsetTable, h: f64, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(table.offsets.len() * self.alphas.len());
        for o in &table.offsets {
            let v: Vec<f64> = (0..n).map(|i| -(o[i] as f64) * h).collect();
            for a in &self.alphas {
                out.push(a.monomial(&v) / a.factorial());
            }
        }
        out
    }

    #[inline]
    fn eval(&self, x: usize, y: usize, mono: &[f64]) -> f64 {
        let mut t = 0.0;
        for (s, m) in self.samples.iter().zip(mono) {
            t += s[y] * m;
        }
        match &self.target {
            Some(tg) => tg[x] - t,
            None => t,
        }
    }
}

/// `Σ_i Σ_o W_o G(i, y, o)` over members `i` (optionally masked) and offsets
/// `o` with `y = i + o` a member.
fn pair_sum<G>(grid: &Grid, table: &OffsetTable, mask: Option<&[bool]>, g: G) -> f64
where
    G: Fn(usize, usize, usize) -> f64 + Sync,
{
    let per_point: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if mask.is_some_and(|m| !m[i]) {
                return 0.0;
            }
            let mut acc = 0.0;
            for (o, off) in table.offsets.iter().enumerate() {
                if let Some(y) = grid.neighbor(i, off) {
                    acc += table.weights[o] * g(i, y, o);
                }
            }
            acc
        })
        .collect();
    pairwise_sum(&per_point)
}

/// Lattice sum of `|R_j^{k-|j|}F(x,y)|^p / |x−y|^s · ω(|x−y|)` over pairs.
fn remainder_sum(grid: &Grid, plan: &RemainderPlan, table: &OffsetTable, p: f64, s: f64, mask: Option<&[bool]>) -> f64 {
    if plan.is_zero() {
        return 0.0;
    }
    let n = grid.dim();
    let mono = plan.monomials(table, grid.h(), n);
    let na = plan.alphas.len();
    let inv: Vec<f64> = table.radius.iter().map(|r| r.powf(-s)).collect();
    let sum = pair_sum(grid, table, mask, |i, y, o| {
        let r = plan.eval(i, y, &mono[o * na..(o + 1) * na]);
        abs_pow(r, p) * inv[o]
    });
    sum * grid.cell_volume().powi(2)
}

fn mollifier_kernel<'a>(rho: &Mollifier, eps: f64, f: &'a (dyn Fn(f64) -> f64 + Sync), cutoff: Option<f64>) -> Kernel<'a> {
    let support = cutoff.map_or(rho.support(eps), |c| c.min(rho.support(eps)));
    let mut breaks = rho.breakpoints(eps);
    breaks.push(support);
    Kernel { f, support, breaks }
}

fn inner_mask(grid: &Grid, margin: f64) -> Vec<bool> {
    let d = grid.domain();
    (0..grid.len()).map(|i| d.boundary_distance(grid.point(i)) > margin).collect()
}

// ---------------------------------------------------------------------------
// Functionals

/// `∬ |R^{m−1}F(x,y)|^p |x−y|^{−mp} ρ_ε(|x−y|) dx dy`.
pub fn bbm_functional(jet: &Jet, grid: &Grid, m: usize, p: f64, rho: &Mollifier, eps: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let prep = Prepared::bbm(jet, grid, m, p, rho)?;
    prep.bbm_at(eps, cfg)
}

/// `ε^{−(n+mp)} ∬_{|x−y|<ε} |R^{m−1}F(x,y)|^p dx dy`.
pub fn jet_condition_value(jet: &Jet, grid: &Grid, m: usize, p: f64, eps: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let prep = Prepared::remainder(jet, grid, m, p, &MultiIndex::zero(jet.dim()))?;
    prep.jet_condition_at(eps, None, cfg)
}

/// [`jet_condition_value`] with the outer variable restricted to
/// `Ω' = {dist(x, ∂Ω) > margin}`.
pub fn jet_condition_value_inner(jet: &Jet, grid: &Grid, m: usize, p: f64, eps: f64, margin: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let prep = Prepared::remainder(jet, grid, m, p, &MultiIndex::zero(jet.dim()))?;
    let mask = inner_mask(grid, margin);
    prep.jet_condition_at(eps, Some(&mask), cfg)
}

/// `ε^{−(m−|j|)p} ∫_{Ω'} ⨍_{B(x,ε)} |R_j^{m−1−|j|}F(x,y)|^p dy dx` with
/// `Ω' = {dist(x, ∂Ω) > margin}`; requires `ε < margin` so every ball lies
/// in `Ω`.
#[allow(clippy::too_many_arguments)]
pub fn shifted_jet_condition(jet: &Jet, grid: &Grid, m: usize, j: &MultiIndex, p: f64, eps: f64, margin: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if m == 0 || j.order() > m - 1 {
        return Err(Error::ShiftTooLarge { shift: j.order(), order: m.saturating_sub(1) });
    }
    check_resolved(eps, grid.h())?;
    if !(eps < margin) {
        return Err(Error::InvalidArgument(format!("scale {eps} must be below the inner margin {margin}")));
    }
    check_p(p)?;
    cfg.validate(grid.h())?;
    let plan = RemainderPlan::new(jet, grid, j, m - 1)?;
    let n = grid.dim();
    let s = (m - j.order()) as f64 * p;
    let f = move |r: f64| r.powf(s);
    let support = cfg.cutoff.map_or(eps, |c| c.min(eps));
    let kernel = Kernel { f: &f, support, breaks: vec![support] };
    let table = offset_table(grid, &kernel, cfg.weights);
    let mask = inner_mask(grid, margin);
    let ball = sphere_measure(n) / n as f64 * eps.powi(n as i32);
    Ok(remainder_sum(grid, &plan, &table, p, s, Some(&mask)) / (ball * eps.powf(s)))
}

/// Result of [`difference_functional`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceValue {
    pub value: f64,
    /// Pairs with nonzero weight dropped because an intermediate point
    /// of the difference left `Ω`.
    pub skipped_pairs: u64,
    pub total_pairs: u64,
}

impl DifferenceValue {
    /// Fraction of weighted pairs that were evaluated.
    pub fn coverage(&self) -> f64 {
        if self.total_pairs == 0 {
            1.0
        } else {
            1.0 - self.skipped_pairs as f64 / self.total_pairs as f64
        }
    }
}

/// `∬ |Δ^m f(x,y)|^p |x−y|^{−mp} ρ_ε(|x−y|) dx dy` with the alternating
/// `m`-th difference along `[x, y]`.
#[allow(clippy::too_many_arguments)]
pub fn difference_functional<F: ScalarField + ?Sized>(f: &F, grid: &Grid, m: usize, p: f64, rho: &Mollifier, eps: f64, cfg: &QuadratureConfig) -> Result<DifferenceValue> {
    let prep = PreparedDifference::new(f, grid, m, p, rho)?;
    prep.at(eps, cfg)
}

struct PreparedDifference<'a, F: ScalarField + ?Sized> {
    f: &'a F,
    grid: &'a Grid,
    m: usize,
    p: f64,
    rho: &'a Mollifier,
    values: Vec<f64>,
    // Exact polynomial path: derivatives of order ≥ m at members.
    poly: Option<(Vec<Vec<MultiIndex>>, Vec<Vec<Vec<f64>>>, Vec<f64>)>,
}

impl<'a, F: ScalarField + ?Sized> PreparedDifference<'a, F> {
    fn new(f: &'a F, grid: &'a Grid, m: usize, p: f64, rho: &'a Mollifier) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("difference order must be at least 1".into()));
        }
        check_p(p)?;
        if f.dim() != grid.dim() || rho.dim() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), got: f.dim() });
        }
        let values = (0..grid.len()).into_par_iter().map(|i| f.value(grid.point(i))).collect();
        let poly = match f.polynomial_degree() {
            Some(deg) => {
                let mut orders = Vec::new();
                let mut samples = Vec::new();
                for i in m..=deg.max(m.saturating_sub(1)) {
                    if i > deg {
                        break;
                    }
                    let alphas = multiindices_of_order(grid.dim(), i)?;
                    let s = alphas
                        .iter()
                        .map(|a| (0..grid.len()).map(|l| f.derivative(a, grid.point(l)).unwrap_or(f64::NAN)).collect())
                        .collect();
                    orders.push(alphas);
                    samples.push(s);
                }
                Some((orders, samples, difference_moments(m, deg.max(m))))
            }
            None => None,
        };
        Ok(Self { f, grid, m, p, rho, values, poly })
    }

    fn at(&self, eps: f64, cfg: &QuadratureConfig) -> Result<DifferenceValue> {
        let grid = self.grid;
        let h = grid.h();
        check_resolved(eps, h)?;
        self.rho.check_scale(eps)?;
        cfg.validate(h)?;
        let n = grid.dim();
        let m = self.m;
        let rho = self.rho;
        let dens = move |r: f64| rho.density(eps, r);
        let kernel = mollifier_kernel(rho, eps, &dens, cfg.cutoff);
        let table = offset_table(grid, &kernel, cfg.weights);
        let s = m as f64 * self.p;
        let inv: Vec<f64> = table.radius.iter().map(|r| r.powf(-s)).collect();
        let domain: &Domain = grid.domain();
        let signs: Vec<f64> = (0..=m).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * binomial(m, j)).collect();
        // per offset: monomials (y−x)^α/α! = (dh)^α/α! for the exact path
        let poly_mono: Option<Vec<Vec<Vec<f64>>>> = self.poly.as_ref().map(|(orders, _, _)| {
            table
                .offsets
                .iter()
                .map(|o| {
                    let v: Vec<f64> = (0..n).map(|i| o[i] as f64 * h).collect();
                    orders.iter().map(|al| al.iter().map(|a| a.monomial(&v) / a.factorial()).collect()).collect()
                })
                .collect()
        });
        let per_point: Vec<(f64, u64, u64)> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let x = grid.point(i);
                let mut acc = 0.0;
                let mut skipped = 0;
                let mut total = 0;
                let mut pt = [0.0; MAX_DIM];
                for (o, off) in table.offsets.iter().enumerate() {
                    let Some(yi) = grid.neighbor(i, off) else { continue };
                    total += 1;
                    let y = grid.point(yi);
                    let mut inside = true;
                    for j in 1..m {
                        let t = j as f64 / m as f64;
                        for k in 0..n {
                            pt[k] = (1.0 - t) * x[k] + t * y[k];
                        }
                        if !domain.contains(&pt[..n]) {
                            inside = false;
                            break;
                        }
                    }
                    if !inside {
                        skipped += 1;
                        continue;
                    }
                    let diff = match (&self.poly, &poly_mono) {
                        (Some((orders, samples, delta)), Some(pm)) => {
                            let mut d = 0.0;
                            for (q, _) in orders.iter().enumerate() {
                                let c: f64 = samples[q].iter().zip(&pm[o][q]).map(|(s, mo)| s[i] * mo).sum();
                                d += c * delta[m + q];
                            }
                            d
                        }
                        _ => {
                            let mut d = signs[0] * self.values[i] + signs[m] * self.values[yi];
                            for j in 1..m {
                                let t = j as f64 / m as f64;
                                for k in 0..n {
                                    pt[k] = (1.0 - t) * x[k] + t * y[k];
                                }
                                d += signs[j] * self.f.value(&pt[..n]);
                            }
                            d
                        }
                    };
                    acc += table.weights[o] * abs_pow(diff, self.p) * inv[o];
                }
                (acc, skipped, total)
            })
            .collect();
        let sums: Vec<f64> = per_point.iter().map(|t| t.0).collect();
        Ok(DifferenceValue {
            value: pairwise_sum(&sums) * grid.cell_volume().powi(2),
            skipped_pairs: per_point.iter().map(|t| t.1).sum(),
            total_pairs: per_point.iter().map(|t| t.2).sum(),
        })
    }
}

/// Outcome of [`singular_remainder_integral`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularReport {
    /// Spacings `h, h/2, h/4, …`.
    pub spacings: Vec<f64>,
    pub values: Vec<f64>,
    /// `2·(I_{k+2} − I_{k+1})/(I_{k+1} − I_k)`: about 2 for logarithmic
    /// growth, about 1 or less for a convergent first-order scheme.
    pub growth_ratios: Vec<f64>,
    pub divergent: bool,
}

impl SingularReport {
    /// Value at the finest spacing.
    pub fn value(&self) -> f64 {
        *self.values.last().expect("at least three levels")
    }
}

/// Threshold on the growth ratio across halvings of `h`.
pub const DIVERGENCE_RATIO: f64 = 1.5;

/// `∬ |R^{m−1}F(x,y)|^p / |x−y|^{mp+n}` regularised by dropping diagonal
/// cells, evaluated at `levels ≥ 3` successive halvings of the spacing of
/// `grid`. The integral is flagged divergent when every growth ratio exceeds
/// [`DIVERGENCE_RATIO`] and the last increment is above the rounding floor.
pub fn singular_remainder_integral(jet: &Jet, grid: &Grid, m: usize, p: f64, levels: usize, cfg: &QuadratureConfig) -> Result<SingularReport> {
    if levels < 3 {
        return Err(Error::TooFewLevels { needed: 3, got: levels });
    }
    if m == 0 {
        return Err(Error::InvalidArgument("order m must be at least 1".into()));
    }
    check_p(p)?;
    let n = grid.dim();
    let s = m as f64 * p;
    let mut spacings = Vec::new();
    let mut values = Vec::new();
    let mut scale = 0.0f64;
    for l in 0..levels {
        let h = grid.h() / (1u64 << l) as f64;
        let g = Grid::new(grid.domain(), h)?;
        cfg.validate(h)?;
        let plan = RemainderPlan::new(jet, &g, &MultiIndex::zero(n), m - 1)?;
        let nf = n as f64;
        let f = move |r: f64| r.powf(-nf);
        let support = cfg.cutoff.unwrap_or(f64::INFINITY);
        let kernel = Kernel { f: &f, support, breaks: vec![] };
        let table = offset_table(&g, &kernel, WeightRule::Midpoint);
        values.push(remainder_sum(&g, &plan, &table, p, s, None));
        spacings.push(h);
        if l == 0 {
            let v: Vec<f64> = (0..g.len()).map(|i| abs_pow(jet.eval(&MultiIndex::zero(n), g.point(i)), p)).collect();
            scale = pairwise_sum(&v) * g.cell_volume();
        }
    }
    let incr: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let growth_ratios: Vec<f64> = incr
        .windows(2)
        .map(|w| if w[0] > 0.0 { 2.0 * w[1] / w[0] } else if w[1] > 0.0 { f64::INFINITY } else { 0.0 })
        .collect();
    let floor = 1e-10 * scale.max(1.0);
    let divergent = growth_ratios.iter().all(|r| *r > DIVERGENCE_RATIO) && *incr.last().unwrap() > floor;
    Ok(SingularReport {
        spacings,
        values,
        growth_ratios,
        divergent,
    })
}

// ---------------------------------------------------------------------------
// Sweeps

/// Which functional a sweep evaluates.
#[derive(Clone, Debug, PartialEq)]
pub enum FunctionalKind {
    Bbm(Mollifier),
    Difference(Mollifier),
    JetCondition,
    /// [`jet_condition_value_inner`] with the given margin.
    JetConditionInner(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalSpec {
    pub kind: FunctionalKind,
    pub m: usize,
    pub p: f64,
}

/// Per-ε values and their extrapolated limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSweep {
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub limit: f64,
    pub target: Option<f64>,
    /// `non-monotone` when the last three values are not monotone and the
    /// limit is the final value instead of an extrapolation.
    pub flags: Vec<String>,
}

impl FunctionalSweep {
    pub fn with_target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self
    }

    /// `|limit − target| / |target|` (absolute error when the target is 0).
    pub fn relative_error(&self) -> Option<f64> {
        self.target.map(|t| {
            let d = (self.limit - t).abs();
            if t == 0.0 {
                d
            } else {
                d / t.abs()
            }
        })
    }

    pub fn is_monotone(&self) -> bool {
        !self.flags.iter().any(|f| f == "non-monotone")
    }
}

/// `ε_k = ε_0 2^{−k}`, `k = 0..count`.
pub fn geometric_schedule(eps0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| eps0 / (1u64 << k) as f64).collect()
}

/// Value at `ε = 0` of the polynomial through the last (up to) three points.
pub fn extrapolate(epsilons: &[f64], values: &[f64]) -> (f64, bool) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, false);
    }
    let take = k.min(3);
    let e = &epsilons[k - take..];
    let v = &values[k - take..];
    let monotone = v.windows(2).all(|w| w[1] >= w[0]) || v.windows(2).all(|w| w[1] <= w[0]);
    if !monotone {
        return (v[take - 1], false);
    }
    let mut limit = 0.0;
    for i in 0..take {
        let mut l = 1.0;
        for j in 0..take {
            if i != j {
                l *= e[j] / (e[j] - e[i]);
            }
        }
        limit += v[i] * l;
    }
    (limit, true)
}

/// Evaluate `spec` along a strictly decreasing schedule and extrapolate.
pub fn run_sweep(spec: &FunctionalSpec, jet: &Jet, grid: &Grid, schedule: &[f64], cfg: &QuadratureConfig) -> Result<FunctionalSweep> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty ε-schedule".into()));
    }
    if schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("ε-schedule must be strictly decreasing".into()));
    }
    for &e in schedule {
        check_resolved(e, grid.h())?;
    }
    let values: Vec<f64> = match &spec.kind {
        FunctionalKind::Bbm(rho) => {
            let prep = Prepared::bbm(jet, grid, spec.m, spec.p, rho)?;
            schedule.iter().map(|&e| prep.bbm_at(e, cfg)).collect::<Result<_>>()?
        }
        FunctionalKind::JetCondition => {
            let prep = Prepared::remainder(jet, grid, spec.m, spec.p, &MultiIndex::zero(jet.dim()))?;
            schedule.iter().map(|&e| prep.jet_condition_at(e, None, cfg)).collect::<Result<_>>()?
        }
        FunctionalKind::JetConditionInner(margin) => {
            let prep = Prepared::remainder(jet, grid, spec.m, spec.p, &MultiIndex::zero(jet.dim()))?;
            let mask = inner_mask(grid, *margin);
            schedule.iter().map(|&e| prep.jet_condition_at(e, Some(&mask), cfg)).collect::<Result<_>>()?
        }
        FunctionalKind::Difference(rho) => {
            let field = jet.value_field();
            let prep = PreparedDifference::new(&field, grid, spec.m, spec.p, rho)?;
            schedule.iter().map(|&e| prep.at(e, cfg).map(|d| d.value)).collect::<Result<_>>()?
        }
    };
    let (limit, monotone) = extrapolate(schedule, &values);
    let mut flags = Vec::new();
    if !monotone {
        flags.push("non-monotone".to_string());
    }
    Ok(FunctionalSweep {
        epsilons: schedule.to_vec(),
        values,
        limit,
        target: None,
        flags,
    })
}

/// Remainder samples prepared once and reused across scales.
struct Prepared<'a> {
    grid: &'a Grid,
    plan: RemainderPlan,
    m: usize,
    p: f64,
    rho: Option<&'a Mollifier>,
}

impl<'a> Prepared<'a> {
    fn remainder(jet: &Jet, grid: &'a Grid, m: usize, p: f64, j: &MultiIndex) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("order m must be at least 1".into()));
        }
        check_p(p)?;
        Ok(Self {
            grid,
            plan: RemainderPlan::new(jet, grid, j, m - 1)?,
            m,
            p,
            rho: None,
        })
    }

    fn bbm(jet: &Jet, grid: &'a Grid, m: usize, p: f64, rho: &'a Mollifier) -> Result<Self> {
        if rho.dim() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), got: rho.dim() });
        }
        let mut prep = Self::remainder(jet, grid, m, p, &MultiIndex::zero(jet.dim()))?;
        prep.rho = Some(rho);
        Ok(prep)
    }

    fn bbm_at(&self, eps: f64, cfg: &QuadratureConfig) -> Result<f64> {
        let rho = self.rho.expect("prepared with a mollifier");
        check_resolved(eps, self.grid.h())?;
        rho.check_scale(eps)?;
        cfg.validate(self.grid.h())?;
        let dens = move |r: f64| rho.density(eps, r);
        let kernel = mollifier_kernel(rho, eps, &dens, cfg.cutoff);
        let table = offset_table(self.grid, &kernel, cfg.weights);
        Ok(remainder_sum(self.grid, &self.plan, &table, self.p, self.m as f64 * self.p, None))
    }

    fn jet_condition_at(&self, eps: f64, mask: Option<&[bool]>, cfg: &QuadratureConfig) -> Result<f64> {
        check_resolved(eps, self.grid.h())?;
        cfg.validate(self.grid.h())?;
        let s = self.m as f64 * self.p;
        let f = move |r: f64| r.powf(s);
        let support = cfg.cutoff.map_or(eps, |c| c.min(eps));
        let kernel = Kernel { f: &f, support, breaks: vec![support] };
        let table = offset_table(self.grid, &kernel, cfg.weights);
        let n = self.grid.dim() as f64;
        Ok(remainder_sum(self.grid, &self.plan, &table, self.p, s, mask) / eps.powf(n + s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::CatalogFunction;

    fn jet(name: &str, n: usize, k: usize) -> Jet {
        Jet::analytic(CatalogFunction::parse(name, n).unwrap(), k)
    }

    #[test]
    fn tent_weights_integrate_kernel_mass() {
        // Σ_d W_d h^n approximates ∫ ω with d = 0 included; with ω ≡ 1 on a
        // ball the total is the ball volume.
        let d = Domain::unit_cube(2).unwrap();
        let g = Grid::new(&d, 1.0 / 64.0).unwrap();
        let one = |_: f64| 1.0;
        let k = Kernel { f: &one, support: 0.25, breaks: vec![0.25] };
        let t = offset_table(&g, &k, WeightRule::CellAveraged);
        let h2 = g.h() * g.h();
        let w0 = tent_weight(&k, &[0, 0], g.h(), &gauss_legendre(GAUSS_NODES));
        let total: f64 = t.weights.iter().sum::<f64>() * h2 + w0 * h2;
        assert!((total - std::f64::consts::PI * 0.0625).abs() < 1e-5, "{total}");
    }

    #[test]
    fn linear_function_continuum_value() {
        // For f = x on (0,1) with the power mollifier (m=1, p=2) the exact
        // functional is 2 − 1.5ε. Cell averaging is exact here, so the only
        // deviation is the excluded diagonal cells, h·h²/(2ε³).
        let d = Domain::unit_cube(1).unwrap();
        let g = Grid::new(&d, 1.0 / 256.0).unwrap();
        let rho = Mollifier::power(1, 1, 2.0).unwrap();
        let f = jet("x", 1, 0);
        for eps in [0.25, 0.1, 0.05] {
            let v = bbm_functional(&f, &g, 1, 2.0, &rho, eps, &QuadratureConfig::default()).unwrap();
            let h = g.h();
            let diagonal = h.powi(3) / (2.0 * eps.powi(3));
            assert!((v - (2.0 - 1.5 * eps - diagonal)).abs() < 1e-9, "eps={eps}: {v}");
        }
    }

    #[test]
    fn refuses_unresolved_scales() {
        let g = Grid::new(&Domain::unit_cube(1).unwrap(), 0.01).unwrap();
        let rho = Mollifier::power(1, 1, 2.0).unwrap();
        let r = bbm_functional(&jet("x", 1, 0), &g, 1, 2.0, &rho, 0.015, &QuadratureConfig::default());
        assert!(matches!(r, Err(Error::Unresolved { .. })));
    }

    #[test]
    fn power_mollifier_identity() {
        let g = Grid::new(&Domain::unit_cube(2).unwrap(), 1.0 / 32.0).unwrap();
        let f = jet("sinxsiny", 2, 1);
        let rho = Mollifier::power(2, 2, 1.5).unwrap();
        let cfg = QuadratureConfig::default();
        let b = bbm_functional(&f, &g, 2, 1.5, &rho, 0.2, &cfg).unwrap();
        let j = jet_condition_value(&f, &g, 2, 1.5, 0.2, &cfg).unwrap();
        assert!((b / j - 5.0).abs() < 1e-12 * 5.0);
    }

    #[test]
    fn difference_matches_bbm_for_first_order() {
        let g = Grid::new(&Domain::unit_cube(1).unwrap(), 1.0 / 128.0).unwrap();
        let f = jet("sin", 1, 0);
        let rho = Mollifier::power(1, 1, 2.0).unwrap();
        let cfg = QuadratureConfig::default();
        let b = bbm_functional(&f, &g, 1, 2.0, &rho, 0.1, &cfg).unwrap();
        let d = difference_functional(&f.value_field(), &g, 1, 2.0, &rho, 0.1, &cfg).unwrap();
        assert!((b - d.value).abs() < 1e-13 * b);
        assert_eq!(d.skipped_pairs, 0);
    }

    #[test]
    fn extrapolation_is_exact_for_quadratics() {
        let e = [0.4, 0.2, 0.1];
        let v: Vec<f64> = e.iter().map(|x| 3.0 + x + 2.0 * x * x).collect();
        let (l, mono) = extrapolate(&e, &v);
        assert!(mono && (l - 3.0).abs() < 1e-13);
        let (l, mono) = extrapolate(&e, &[1.0, 2.0, 1.5]);
        assert!(!mono && l == 1.5);
    }

    #[test]
    fn singular_integral_classifies() {
        let g = Grid::new(&Domain::unit_cube(1).unwrap(), 1.0 / 32.0).unwrap();
        let cfg = QuadratureConfig::default();
        let sq = singular_remainder_integral(&jet("x^2", 1, 1), &g, 2, 1.0, 4, &cfg).unwrap();
        assert!(sq.divergent, "{sq:?}");
        let lin = singular_remainder_integral(&jet("poly:1+2x", 1, 1), &g, 2, 1.0, 3, &cfg).unwrap();
        assert!(!lin.divergent && lin.values.iter().all(|v| *v == 0.0));
    }
}
