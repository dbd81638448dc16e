//! Bounded open sets `Ω ⊂ R^n` together with an inner margin that defines
//! the compactly contained subset `Ω' = {x ∈ Ω : dist(x, ∂Ω) > margin}`.
//!
//! Two flavours exist. Rectilinear domains are an open box with closed boxes
//! removed (covers intervals, squares, L-shapes, squares with holes and
//! multi-component sets); their boundary distance is exact. Predicate domains
//! take an arbitrary membership test and approximate the boundary distance by
//! sampling the boundary at a fixed resolution.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::multiindex::{check_dim, MAX_DIM};

/// An axis-aligned box `[lo, hi]` (used both as open and closed set, see the
/// individual methods). Degenerate boxes represent points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxRegion {
    dim: usize,
    lo: [f64; MAX_DIM],
    hi: [f64; MAX_DIM],
}

impl BoxRegion {
    pub fn new(lo: &[f64], hi: &[f64]) -> Result<Self> {
        check_dim(lo.len())?;
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidArgument(format!("box bounds {lo:?} .. {hi:?} are not ordered")));
        }
        let mut l = [0.0; MAX_DIM];
        let mut h = [0.0; MAX_DIM];
        l[..lo.len()].copy_from_slice(lo);
        h[..hi.len()].copy_from_slice(hi);
        Ok(Self { dim: lo.len(), lo: l, hi: h })
    }

    /// Cube with the given center and side length.
    pub fn cube(center: &[f64], side: f64) -> Result<Self> {
        let lo: Vec<f64> = center.iter().map(|c| c - 0.5 * side).collect();
        let hi: Vec<f64> = center.iter().map(|c| c + 0.5 * side).collect();
        Self::new(&lo, &hi)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim]
    }
    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.dim]
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim).map(|i| 0.5 * (self.lo[i] + self.hi[i])).collect()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|i| self.hi[i] - self.lo[i]).product()
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim).map(|i| (self.hi[i] - self.lo[i]).powi(2)).sum::<f64>().sqrt()
    }

    /// Scale about the center by `factor`.
    pub fn dilate(&self, factor: f64) -> Self {
        let mut b = *self;
        for i in 0..self.dim {
            let c = 0.5 * (self.lo[i] + self.hi[i]);
            let r = 0.5 * (self.hi[i] - self.lo[i]) * factor;
            b.lo[i] = c - r;
            b.hi[i] = c + r;
        }
        b
    }

    pub fn contains_open(&self, x: &[f64]) -> bool {
        (0..self.dim).all(|i| x[i] > self.lo[i] && x[i] < self.hi[i])
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        (0..self.dim).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }

    /// Closed boxes intersect.
    pub fn intersects(&self, other: &Self) -> bool {
        (0..self.dim).all(|i| self.lo[i] <= other.hi[i] && other.lo[i] <= self.hi[i])
    }

    /// Open boxes intersect.
    pub fn interiors_intersect(&self, other: &Self) -> bool {
        (0..self.dim).all(|i| self.lo[i] < other.hi[i] && other.lo[i] < self.hi[i])
    }

    /// Euclidean distance from a point to the closed box.
    pub fn distance_to_point(&self, x: &[f64]) -> f64 {
        (0..self.dim)
            .map(|i| {
                let d = (self.lo[i] - x[i]).max(0.0).max(x[i] - self.hi[i]);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Distance between two closed boxes.
    pub fn distance_to_box(&self, other: &Self) -> f64 {
        (0..self.dim)
            .map(|i| {
                let d = (self.lo[i] - other.hi[i]).max(0.0).max(other.lo[i] - self.hi[i]);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `max_{x ∈ q} dist(x, self)`; the distance is convex and separable in
    /// its squared form, so the maximum is taken coordinatewise at endpoints.
    fn max_distance_over(&self, q: &Self) -> f64 {
        (0..self.dim)
            .map(|i| {
                let at = |x: f64| (self.lo[i] - x).max(0.0).max(x - self.hi[i]);
                let d = at(q.lo[i]).max(at(q.hi[i]));
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Signed distance to the complement of the open box (negative outside).
    fn inner_distance(&self, x: &[f64]) -> f64 {
        (0..self.dim)
            .map(|i| (x[i] - self.lo[i]).min(self.hi[i] - x[i]))
            .fold(f64::INFINITY, f64::min)
    }

    /// `min_{x ∈ q}` of [`Self::inner_distance`]; concave, so vertices suffice.
    fn min_inner_distance_over(&self, q: &Self) -> f64 {
        (0..self.dim)
            .map(|i| (q.lo[i] - self.lo[i]).min(self.hi[i] - q.hi[i]))
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_{x ∈ q}` of [`Self::inner_distance`]; the minimum over separate
    /// coordinates of 1-D tents, so the maximum factorises.
    fn max_inner_distance_over(&self, q: &Self) -> f64 {
        (0..self.dim)
            .map(|i| {
                let mid = 0.5 * (self.lo[i] + self.hi[i]);
                let x = mid.clamp(q.lo[i], q.hi[i]);
                (x - self.lo[i]).min(self.hi[i] - x)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

type Predicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// A bounded open set with an inner margin.
#[derive(Clone)]
pub struct Domain {
    outer: BoxRegion,
    holes: Vec<BoxRegion>,
    predicate: Option<Predicate>,
    // Closed sets whose union with the outer complement is `Ω^c`, used for
    // distances. Equal to `holes` for rectilinear domains.
    obstacles: Vec<BoxRegion>,
    margin: f64,
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain")
            .field("outer", &self.outer)
            .field("holes", &self.holes)
            .field("predicate", &self.predicate.is_some())
            .field("margin", &self.margin)
            .finish()
    }
}

impl Domain {
    /// The open box `(lo, hi)`.
    pub fn open_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let outer = BoxRegion::new(lo, hi)?;
        if outer.volume() <= 0.0 {
            return Err(Error::EmptyDomain("outer box has zero volume".into()));
        }
        Ok(Self {
            outer,
            holes: Vec::new(),
            predicate: None,
            obstacles: Vec::new(),
            margin: 0.0,
        })
    }

    /// The unit cube `(0, 1)^n`.
    pub fn unit_cube(n: usize) -> Result<Self> {
        Self::open_box(&vec![0.0; n], &vec![1.0; n])
    }

    /// Remove a closed box from the domain.
    pub fn without(mut self, hole: BoxRegion) -> Result<Self> {
        if hole.dim() != self.outer.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.outer.dim(),
                got: hole.dim(),
            });
        }
        if self.predicate.is_some() {
            return Err(Error::InvalidArgument("cannot remove boxes from a predicate domain".into()));
        }
        self.holes.push(hole);
        self.obstacles.push(hole);
        Ok(self)
    }

    /// `(0,1)^2` minus the closed upper-right quadrant `[1/2, 1]^2`.
    pub fn l_shape() -> Self {
        Self::unit_cube(2)
            .and_then(|d| d.without(BoxRegion::new(&[0.5, 0.5], &[1.0, 1.0])?))
            .expect("static geometry")
    }

    /// `(0,1)^2` minus the closed central square `[3/8, 5/8]^2`.
    pub fn square_with_hole() -> Self {
        Self::unit_cube(2)
            .and_then(|d| d.without(BoxRegion::new(&[0.375, 0.375], &[0.625, 0.625])?))
            .expect("static geometry")
    }

    /// A domain given by `outer ∩ {predicate}`. The boundary distance is
    /// approximated from non-member samples adjacent to members on a lattice
    /// of spacing `resolution`; its error is at most `resolution·√n / 2`.
    pub fn from_predicate<P>(lo: &[f64], hi: &[f64], predicate: P, resolution: f64) -> Result<Self>
    where
        P: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        let outer = BoxRegion::new(lo, hi)?;
        if !(resolution > 0.0) {
            return Err(Error::InvalidArgument("resolution must be positive".into()));
        }
        let n = outer.dim();
        let counts: Vec<usize> = (0..n)
            .map(|i| ((hi[i] - lo[i]) / resolution).ceil().max(1.0) as usize)
            .collect();
        let total: usize = counts.iter().product();
        let point = |lin: usize| -> [f64; MAX_DIM] {
            let mut rest = lin;
            let mut p = [0.0; MAX_DIM];
            for i in 0..n {
                let c = rest % counts[i];
                rest /= counts[i];
                p[i] = lo[i] + (c as f64 + 0.5) * resolution;
            }
            p
        };
        let inside: Vec<bool> = (0..total).map(|l| predicate(&point(l)[..n])).collect();
        let mut obstacles = Vec::new();
        let mut strides = [1usize; MAX_DIM];
        for i in 1..n {
            strides[i] = strides[i - 1] * counts[i - 1];
        }
        for lin in 0..total {
            if inside[lin] {
                continue;
            }
            let mut rest = lin;
            let mut touches = false;
            for i in 0..n {
                let c = rest % counts[i];
                rest /= counts[i];
                if c > 0 && inside[lin - strides[i]] || c + 1 < counts[i] && inside[lin + strides[i]] {
                    touches = true;
                }
            }
            if touches {
                let p = point(lin);
                obstacles.push(BoxRegion::new(&p[..n], &p[..n])?);
            }
        }
        if !inside.iter().any(|&b| b) {
            return Err(Error::EmptyDomain("predicate selects no sample point".into()));
        }
        Ok(Self {
            outer,
            holes: Vec::new(),
            predicate: Some(Arc::new(predicate)),
            obstacles,
            margin: 0.0,
        })
    }

    /// Set the inner margin defining `Ω'`.
    pub fn with_margin(mut self, margin: f64) -> Result<Self> {
        if !(margin >= 0.0) {
            return Err(Error::InvalidArgument(format!("margin {margin} must be nonnegative")));
        }
        self.margin = margin;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.outer.dim()
    }
    pub fn outer(&self) -> &BoxRegion {
        &self.outer
    }
    pub fn holes(&self) -> &[BoxRegion] {
        &self.holes
    }
    pub fn margin(&self) -> f64 {
        self.margin
    }
    pub fn is_rectilinear(&self) -> bool {
        self.predicate.is_none()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.outer.contains_open(x)
            && !self.holes.iter().any(|b| b.contains_closed(x))
            && self.predicate.as_ref().is_none_or(|p| p(x))
    }

    /// `dist(x, Ω^c)`, zero outside `Ω`.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        self.obstacles
            .iter()
            .map(|b| b.distance_to_point(x))
            .fold(self.outer.inner_distance(x), f64::min)
            .max(0.0)
    }

    /// `dist(x, Ω'^c) = (dist(x, Ω^c) − margin)_+`.
    pub fn inner_distance(&self, x: &[f64]) -> f64 {
        (self.boundary_distance(x) - self.margin).max(0.0)
    }

    /// Membership in `Ω'`.
    pub fn contains_inner(&self, x: &[f64]) -> bool {
        self.boundary_distance(x) > self.margin
    }

    /// Lower and upper bounds for `dist(·, Ω^c)` over a closed box. The lower
    /// bound is exact; the upper bound is `min` over the pieces of their
    /// individual maxima, which is tight when a single piece is active.
    pub fn distance_bounds(&self, q: &BoxRegion) -> (f64, f64) {
        let mut lower = self.outer.min_inner_distance_over(q);
        let mut upper = self.outer.max_inner_distance_over(q);
        for b in &self.obstacles {
            lower = lower.min(b.distance_to_box(q));
            upper = upper.min(b.max_distance_over(q));
        }
        (lower.max(0.0), upper.max(0.0))
    }

    /// Connected pieces are not tracked analytically; see
    /// [`crate::Grid::components`] for the lattice-level labelling.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain(x.to_vec()))
        }
    }
}
