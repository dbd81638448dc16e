//! Dyadic Whitney decompositions of `Ω' = {dist(·, ∂Ω) > margin}`, the
//! associated smooth partition of unity, averaged Taylor polynomials and the
//! reconstruction `w^k = Σ_i φ_i T_{Q_i} F`.
//!
//! Level `k` selects, top-down from the level-`k` dyadic grid, the maximal
//! cubes `Q` of level `l ≥ k` that meet the shell
//! `{√n 2^{−l+1} < dist(x, Ω'^c) ≤ √n 2^{−l+2}}` (no upper bound when
//! `l = k`). Refinement stops at a maximal level `L`, so the cubes cover
//! `{dist(·, Ω'^c) > √n 2^{−L+1}}` rather than all of `Ω'`.

mod partition;
mod reconstruct;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::domain::{BoxRegion, Domain};
use crate::error::{Error, Result};
use crate::multiindex::MAX_DIM;

pub use partition::{partition_of_unity, smooth_step, PartitionOfUnity};
pub use reconstruct::{
    averaged_taylor, averaged_taylor_coefficients, reconstruct, reconstruction_diagnostics, whitney_sweep, AlphaRate, LocalPolynomial, Reconstruction,
    ReconstructionDiagnostics,
};

/// Dilation factor of the cubes carrying the partition of unity.
pub const DILATION: f64 = 9.0 / 8.0;

/// The dyadic cube `Π [j_i 2^{−l}, (j_i + 1) 2^{−l}]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: u32,
    pub index: [i64; MAX_DIM],
    pub dim: usize,
}

impl DyadicCube {
    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn diameter(&self) -> f64 {
        self.side() * (self.dim as f64).sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        let s = self.side();
        (0..self.dim).map(|i| (self.index[i] as f64 + 0.5) * s).collect()
    }

    pub fn bbox(&self) -> BoxRegion {
        let s = self.side();
        let lo: Vec<f64> = (0..self.dim).map(|i| self.index[i] as f64 * s).collect();
        let hi: Vec<f64> = (0..self.dim).map(|i| (self.index[i] + 1) as f64 * s).collect();
        BoxRegion::new(&lo, &hi).expect("dyadic cubes are well formed")
    }

    pub fn dilated(&self) -> BoxRegion {
        self.bbox().dilate(DILATION)
    }

    pub fn parent(&self) -> DyadicCube {
        let mut index = self.index;
        for v in index.iter_mut().take(self.dim) {
            *v = v.div_euclid(2);
        }
        DyadicCube {
            level: self.level - 1,
            index,
            dim: self.dim,
        }
    }

    fn children(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..(1usize << self.dim)).map(move |c| {
            let mut index = self.index;
            for (i, v) in index.iter_mut().enumerate().take(self.dim) {
                *v = 2 * *v + ((c >> i) & 1) as i64;
            }
            DyadicCube {
                level: self.level + 1,
                index,
                dim: self.dim,
            }
        })
    }
}

/// The cube family `F_k` together with its parent domain.
#[derive(Clone, Debug)]
pub struct WhitneyDecomposition {
    level: u32,
    max_level: u32,
    domain: Domain,
    cubes: Vec<DyadicCube>,
}

/// Plain-data export of a decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionExport {
    pub level: u32,
    pub max_level: u32,
    pub margin: f64,
    pub cubes: Vec<CubeExport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeExport {
    pub center: Vec<f64>,
    pub side: f64,
    pub level: u32,
}

fn shell(n: usize, l: u32) -> (f64, f64) {
    let s = (n as f64).sqrt() * (-(l as f64)).exp2();
    (2.0 * s, 4.0 * s)
}

/// Build `F_k` for `Ω' = {dist(·, ∂Ω) > domain.margin()}` with refinement
/// capped at `max_level`.
pub fn decompose(domain: &Domain, k: u32, max_level: u32) -> Result<WhitneyDecomposition> {
    if max_level < k {
        return Err(Error::InvalidArgument(format!("maximal level {max_level} is below the level {k}")));
    }
    if max_level > 30 {
        return Err(Error::InvalidArgument(format!("maximal level {max_level} is too fine")));
    }
    let n = domain.dim();
    let selector = Selector { domain, k, max_level, n };
    let side = (-(k as f64)).exp2();
    let outer = domain.outer();
    let mut lo = [0i64; MAX_DIM];
    let mut hi = [0i64; MAX_DIM];
    for i in 0..n {
        lo[i] = ((outer.lo()[i] + domain.margin()) / side).floor() as i64;
        hi[i] = ((outer.hi()[i] - domain.margin()) / side).ceil() as i64 - 1;
    }
    let mut cubes = Vec::new();
    for c in lo[2]..=hi[2] {
        for b in lo[1]..=hi[1] {
            for a in lo[0]..=hi[0] {
                let cube = DyadicCube {
                    level: k,
                    index: [a, b, c],
                    dim: n,
                };
                selector.visit(cube, &mut cubes);
            }
        }
    }
    if cubes.is_empty() {
        return Err(Error::EmptyDomain(format!(
            "no Whitney cube of level {k}..{max_level} fits the inner set (margin {})",
            domain.margin()
        )));
    }
    Ok(WhitneyDecomposition {
        level: k,
        max_level,
        domain: domain.clone(),
        cubes,
    })
}

struct Selector<'a> {
    domain: &'a Domain,
    k: u32,
    max_level: u32,
    n: usize,
}

impl Selector<'_> {
    // Bounds of dist(·, Ω'^c) over a box.
    fn bounds(&self, q: &BoxRegion) -> (f64, f64) {
        let (lo, hi) = self.domain.distance_bounds(q);
        let m = self.domain.margin();
        ((lo - m).max(0.0), (hi - m).max(0.0))
    }

    // Whether dist(·, Ω'^c) exceeds `threshold` somewhere in `q`.
    fn exceeds(&self, q: &BoxRegion, threshold: f64, depth: u32) -> bool {
        let (_, hi) = self.bounds(q);
        if hi <= threshold {
            return false;
        }
        if self.domain.inner_distance(&q.center()) > threshold {
            return true;
        }
        if depth == 0 {
            return false;
        }
        let c = q.center();
        (0..(1usize << self.n)).any(|child| {
            let lo: Vec<f64> = (0..self.n).map(|i| if child >> i & 1 == 1 { c[i] } else { q.lo()[i] }).collect();
            let hi: Vec<f64> = (0..self.n).map(|i| if child >> i & 1 == 1 { q.hi()[i] } else { c[i] }).collect();
            self.exceeds(&BoxRegion::new(&lo, &hi).expect("sub-box"), threshold, depth - 1)
        })
    }

    fn visit(&self, cube: DyadicCube, out: &mut Vec<DyadicCube>) {
        let q = cube.bbox();
        let (floor, _) = shell(self.n, self.max_level);
        let (lo, hi) = self.bounds(&q);
        if hi <= floor {
            return;
        }
        let (a, b) = shell(self.n, cube.level);
        let selected = if cube.level == self.k { self.exceeds(&q, a, 12) } else { lo <= b && self.exceeds(&q, a, 12) };
        if selected {
            out.push(cube);
        } else if cube.level < self.max_level {
            for child in cube.children() {
                self.visit(child, out);
            }
        }
    }
}

/// Outcome of [`WhitneyDecomposition::verify`]; all counts are violations.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    /// (i) sample points of the covered region lying in no cube.
    pub uncovered: usize,
    /// (ii) cubes breaking the diameter cap or the distance comparability.
    pub comparability: usize,
    /// (iii) pairs of cubes with overlapping interiors.
    pub overlapping: usize,
    /// (iv) largest number of open dilated cubes containing a sample point.
    pub max_overlap: usize,
    /// (v) touching dilated cubes whose diameters differ by more than 4×.
    pub neighbor_ratio: usize,
    pub samples: usize,
}

impl GeometryReport {
    /// Overlap bound `c(n) = 2^n` asserted for property (iv).
    pub fn overlap_bound(n: usize) -> usize {
        1 << n
    }

    pub fn passes(&self, n: usize) -> bool {
        self.uncovered == 0 && self.comparability == 0 && self.overlapping == 0 && self.max_overlap <= Self::overlap_bound(n) && self.neighbor_ratio == 0
    }
}

impl WhitneyDecomposition {
    pub fn level(&self) -> u32 {
        self.level
    }
    pub fn max_level(&self) -> u32 {
        self.max_level
    }
    pub fn domain(&self) -> &Domain {
        &self.domain
    }
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }
    pub fn len(&self) -> usize {
        self.cubes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Lower bound on `dist(·, Ω'^c)` beyond which the cubes cover `Ω'`.
    pub fn coverage_threshold(&self) -> f64 {
        shell(self.dim(), self.max_level).0
    }

    /// Whether `x` lies in the region the cubes are guaranteed to cover.
    pub fn in_covered_region(&self, x: &[f64]) -> bool {
        self.domain.inner_distance(x) > self.coverage_threshold()
    }

    pub fn export(&self) -> DecompositionExport {
        DecompositionExport {
            level: self.level,
            max_level: self.max_level,
            margin: self.domain.margin(),
            cubes: self
                .cubes
                .iter()
                .map(|c| CubeExport {
                    center: c.center(),
                    side: c.side(),
                    level: c.level,
                })
                .collect(),
        }
    }

    /// Index from level-`k` cells to cubes whose closed dilation meets them.
    pub(crate) fn spatial_index(&self) -> HashMap<[i64; MAX_DIM], Vec<usize>> {
        let n = self.dim();
        let side = (-(self.level as f64)).exp2();
        let mut map: HashMap<[i64; MAX_DIM], Vec<usize>> = HashMap::new();
        for (id, c) in self.cubes.iter().enumerate() {
            let d = c.dilated();
            let mut lo = [0i64; MAX_DIM];
            let mut hi = [0i64; MAX_DIM];
            for i in 0..n {
                lo[i] = (d.lo()[i] / side).floor() as i64;
                hi[i] = (d.hi()[i] / side).floor() as i64;
            }
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        map.entry([x, y, z]).or_default().push(id);
                    }
                }
            }
        }
        map
    }

    pub(crate) fn cell_key(&self, x: &[f64]) -> [i64; MAX_DIM] {
        let side = (-(self.level as f64)).exp2();
        let mut key = [0i64; MAX_DIM];
        for i in 0..self.dim() {
            key[i] = (x[i] / side).floor() as i64;
        }
        key
    }

    /// Check properties (i)–(v); coverage and overlap are tested at `samples`.
    pub fn verify(&self, samples: &[Vec<f64>]) -> GeometryReport {
        let n = self.dim();
        let mut report = GeometryReport {
            samples: samples.len(),
            ..Default::default()
        };
        let top_diam = (-(self.level as f64)).exp2() * (n as f64).sqrt();
        let m = self.domain.margin();
        for c in &self.cubes {
            let diam = c.diameter();
            let mut ok = diam <= top_diam * (1.0 + 1e-12);
            if c.level > self.level {
                let (lo, _) = self.domain.distance_bounds(&c.bbox());
                let dist = (lo - m).max(0.0);
                ok &= diam <= dist * (1.0 + 1e-12) && dist <= 4.0 * diam * (1.0 + 1e-12);
            }
            if !ok {
                report.comparability += 1;
            }
        }
        let set: HashSet<DyadicCube> = self.cubes.iter().copied().collect();
        report.overlapping = self.cubes.len() - set.len();
        for c in &self.cubes {
            let mut a = *c;
            while a.level > self.level {
                a = a.parent();
                if set.contains(&a) {
                    report.overlapping += 1;
                }
            }
        }
        let index = self.spatial_index();
        for (id, c) in self.cubes.iter().enumerate() {
            let d = c.dilated();
            let mut seen = HashSet::new();
            for key in cells_of(self, &d) {
                for &other in index.get(&key).into_iter().flatten() {
                    if other <= id || !seen.insert(other) {
                        continue;
                    }
                    let e = self.cubes[other].dilated();
                    if d.intersects(&e) {
                        let r = c.side() / self.cubes[other].side();
                        if !(0.25..=4.0).contains(&r) {
                            report.neighbor_ratio += 1;
                        }
                    }
                }
            }
        }
        for x in samples {
            let candidates = index.get(&self.cell_key(x)).map(|v| v.as_slice()).unwrap_or(&[]);
            if self.in_covered_region(x) && !candidates.iter().any(|&i| self.cubes[i].bbox().contains_closed(x)) {
                report.uncovered += 1;
            }
            let count = candidates.iter().filter(|&&i| self.cubes[i].dilated().contains_open(x)).count();
            report.max_overlap = report.max_overlap.max(count);
        }
        report
    }
}

fn cells_of(dec: &WhitneyDecomposition, b: &BoxRegion) -> Vec<[i64; MAX_DIM]> {
    let n = dec.dim();
    let lo = dec.cell_key(b.lo());
    let hi = dec.cell_key(b.hi());
    let mut out = Vec::new();
    let mut hi3 = hi;
    let mut lo3 = lo;
    for i in n..MAX_DIM {
        lo3[i] = 0;
        hi3[i] = 0;
    }
    for z in lo3[2]..=hi3[2] {
        for y in lo3[1]..=hi3[1] {
            for x in lo3[0]..=hi3[0] {
                out.push([x, y, z]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(d: &Domain, count: usize) -> Vec<Vec<f64>> {
        let n = d.dim();
        let mut out = Vec::new();
        let mut s = 12345u64;
        while out.len() < count {
            let p: Vec<f64> = (0..n)
                .map(|i| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let u = (s >> 11) as f64 / (1u64 << 53) as f64;
                    d.outer().lo()[i] + u * (d.outer().hi()[i] - d.outer().lo()[i])
                })
                .collect();
            if d.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn flat_interior_interval() {
        let d = Domain::unit_cube(1).unwrap().with_margin(0.3).unwrap();
        let dec = decompose(&d, 4, 8).unwrap();
        // cubes well inside are level-4 intervals
        assert!(dec.cubes().iter().any(|c| c.level == 4 && (c.center()[0] - 0.5).abs() < 0.1));
        assert!(dec.verify(&samples(&d, 2000)).passes(1));
    }

    #[test]
    fn geometry_on_test_domains() {
        let domains = [
            Domain::unit_cube(1).unwrap().with_margin(0.1).unwrap(),
            Domain::unit_cube(2).unwrap().with_margin(0.05).unwrap(),
            Domain::l_shape().with_margin(0.05).unwrap(),
            Domain::square_with_hole().with_margin(0.03).unwrap(),
        ];
        for d in &domains {
            let pts = samples(d, 3000);
            for k in 2..=4 {
                let dec = decompose(d, k, k + 4).unwrap();
                let r = dec.verify(&pts);
                assert!(r.passes(d.dim()), "k={k}: {r:?}");
            }
        }
    }

    #[test]
    fn empty_when_margin_too_large() {
        let d = Domain::unit_cube(2).unwrap().with_margin(0.6).unwrap();
        assert!(matches!(decompose(&d, 3, 6), Err(Error::EmptyDomain(_))));
    }

    #[test]
    fn square_counts_grow_with_level() {
        let d = Domain::unit_cube(2).unwrap().with_margin(0.0).unwrap();
        let c: Vec<usize> = (2..=4).map(|k| decompose(&d, k, k + 3).unwrap().len()).collect();
        assert!(c[1] > 2 * c[0] && c[2] > 2 * c[1], "{c:?}");
    }
}
