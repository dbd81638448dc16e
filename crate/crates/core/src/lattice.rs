//! Uniform cell-centred lattices restricted to a domain.

use rayon::prelude::*;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::multiindex::MAX_DIM;

/// Lattice offset in index space.
pub type Offset = [i64; MAX_DIM];

/// Cell centres `lo + (j + 1/2)h` of the bounding box of a domain that lie
/// in the domain. Members are stored in lexicographic order (last axis
/// slowest), which fixes every summation order downstream.
#[derive(Clone, Debug)]
pub struct Grid {
    domain: Domain,
    h: f64,
    dim: usize,
    counts: [usize; MAX_DIM],
    origin: [f64; MAX_DIM],
    slot: Vec<u32>,
    points: Vec<[f64; MAX_DIM]>,
    index: Vec<Offset>,
}

const EMPTY: u32 = u32::MAX;

impl Grid {
    pub fn new(domain: &Domain, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("grid spacing {h} must be positive")));
        }
        let dim = domain.dim();
        let outer = domain.outer();
        let mut counts = [1usize; MAX_DIM];
        let mut origin = [0.0; MAX_DIM];
        for i in 0..dim {
            let width = outer.hi()[i] - outer.lo()[i];
            counts[i] = (width / h - 1e-9).ceil().max(1.0) as usize;
            origin[i] = outer.lo()[i] + 0.5 * h;
        }
        let total: usize = counts.iter().product();
        if total > 200_000_000 {
            return Err(Error::InvalidArgument(format!("lattice with {total} cells is too large")));
        }
        let lin_to_idx = |lin: usize| -> Offset {
            let mut rest = lin;
            let mut idx = [0i64; MAX_DIM];
            for i in 0..MAX_DIM {
                idx[i] = (rest % counts[i]) as i64;
                rest /= counts[i];
            }
            idx
        };
        let inside: Vec<bool> = (0..total)
            .into_par_iter()
            .map(|lin| {
                let idx = lin_to_idx(lin);
                let p: Vec<f64> = (0..dim).map(|i| origin[i] + idx[i] as f64 * h).collect();
                domain.contains(&p)
            })
            .collect();
        let mut slot = vec![EMPTY; total];
        let mut points = Vec::new();
        let mut index = Vec::new();
        for (lin, &ok) in inside.iter().enumerate() {
            if ok {
                slot[lin] = points.len() as u32;
                let idx = lin_to_idx(lin);
                let mut p = [0.0; MAX_DIM];
                for i in 0..dim {
                    p[i] = origin[i] + idx[i] as f64 * h;
                }
                points.push(p);
                index.push(idx);
            }
        }
        if points.is_empty() {
            return Err(Error::EmptyDomain(format!("no lattice point of spacing {h} lies in the domain")));
        }
        Ok(Self {
            domain: domain.clone(),
            h,
            dim,
            counts,
            origin,
            slot,
            points,
            index,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Volume of one cell, `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i][..self.dim]
    }

    pub fn lattice_index(&self, i: usize) -> Offset {
        self.index[i]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    /// Member at a lattice index, if that cell centre lies in the domain.
    pub fn member_at(&self, idx: &Offset) -> Option<usize> {
        let mut lin = 0usize;
        let mut stride = 1usize;
        for i in 0..MAX_DIM {
            let c = idx[i];
            if c < 0 || c as usize >= self.counts[i] {
                return None;
            }
            lin += c as usize * stride;
            stride *= self.counts[i];
        }
        match self.slot[lin] {
            EMPTY => None,
            s => Some(s as usize),
        }
    }

    /// Member displaced from `i` by `offset` lattice steps.
    #[inline]
    pub fn neighbor(&self, i: usize, offset: &Offset) -> Option<usize> {
        let base = &self.index[i];
        let idx = [base[0] + offset[0], base[1] + offset[1], base[2] + offset[2]];
        self.member_at(&idx)
    }

    /// Lattice index of the cell containing `x` (may be outside the lattice).
    pub fn cell_of(&self, x: &[f64]) -> Offset {
        let mut idx = [0i64; MAX_DIM];
        for i in 0..self.dim {
            idx[i] = ((x[i] - self.origin[i]) / self.h + 0.5).floor() as i64;
        }
        idx
    }

    /// Members whose centres lie in the closed box `[lo, hi]`, in storage order.
    pub fn members_in_box(&self, lo: &[f64], hi: &[f64]) -> Vec<usize> {
        let mut a = [0i64; MAX_DIM];
        let mut b = [0i64; MAX_DIM];
        for i in 0..self.dim {
            a[i] = ((lo[i] - self.origin[i]) / self.h).ceil().max(0.0) as i64;
            b[i] = ((hi[i] - self.origin[i]) / self.h).floor().min(self.counts[i] as f64 - 1.0) as i64;
            if b[i] < a[i] {
                return Vec::new();
            }
        }
        let mut out = Vec::new();
        for k in a[2]..=b[2] {
            for j in a[1]..=b[1] {
                for i in a[0]..=b[0] {
                    if let Some(s) = self.member_at(&[i, j, k]) {
                        let p = self.point(s);
                        if (0..self.dim).all(|d| p[d] >= lo[d] && p[d] <= hi[d]) {
                            out.push(s);
                        }
                    }
                }
            }
        }
        out
    }

    /// Members within Euclidean distance `< r` of `y`.
    pub fn members_in_ball(&self, y: &[f64], r: f64) -> Vec<usize> {
        let lo: Vec<f64> = y.iter().map(|c| c - r).collect();
        let hi: Vec<f64> = y.iter().map(|c| c + r).collect();
        self.members_in_box(&lo, &hi)
            .into_iter()
            .filter(|&s| {
                let p = self.point(s);
                (0..self.dim).map(|d| (p[d] - y[d]).powi(2)).sum::<f64>() < r * r
            })
            .collect()
    }

    /// Labels of face-connected components, numbered in order of first member.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.len()];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.len() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for d in 0..self.dim {
                    for s in [-1i64, 1] {
                        let mut off = [0i64; MAX_DIM];
                        off[d] = s;
                        if let Some(j) = self.neighbor(i, &off) {
                            if label[j] == usize::MAX {
                                label[j] = next;
                                stack.push(j);
                            }
                        }
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Multilinear interpolation of member samples at `x`. Cell corners
    /// outside the lattice are clamped; corners not in the domain are dropped
    /// and the remaining weights renormalised.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        let mut base = [0i64; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for i in 0..self.dim {
            let t = ((x[i] - self.origin[i]) / self.h).clamp(0.0, (self.counts[i] - 1) as f64);
            let b = t.floor().min((self.counts[i].max(2) - 2) as f64).max(0.0);
            base[i] = b as i64;
            frac[i] = if self.counts[i] > 1 { t - b } else { 0.0 };
        }
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut idx = base;
            let mut w = 1.0;
            for i in 0..self.dim {
                if corner >> i & 1 == 1 {
                    idx[i] += 1;
                    w *= frac[i];
                } else {
                    w *= 1.0 - frac[i];
                }
            }
            if w == 0.0 {
                continue;
            }
            if let Some(s) = self.member_at(&idx) {
                acc += w * values[s];
                wsum += w;
            }
        }
        if wsum <= 1e-12 {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        Ok(acc / wsum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_lattice() {
        let g = Grid::new(&Domain::unit_cube(1).unwrap(), 0.25).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.point(0), &[0.125]);
        assert_eq!(g.neighbor(0, &[1, 0, 0]), Some(1));
        assert_eq!(g.neighbor(0, &[-1, 0, 0]), None);
    }

    #[test]
    fn l_shape_counts() {
        let g = Grid::new(&Domain::l_shape(), 1.0 / 16.0).unwrap();
        assert_eq!(g.len(), 256 - 64);
        assert_eq!(*g.components().iter().max().unwrap(), 0);
    }

    #[test]
    fn two_components() {
        let d = Domain::unit_cube(2)
            .unwrap()
            .without(crate::domain::BoxRegion::new(&[0.45, 0.0], &[0.55, 1.0]).unwrap())
            .unwrap();
        let g = Grid::new(&d, 1.0 / 32.0).unwrap();
        assert_eq!(*g.components().iter().max().unwrap(), 1);
    }

    #[test]
    fn interpolation_reproduces_affine() {
        let g = Grid::new(&Domain::unit_cube(2).unwrap(), 0.1).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|i| 1.0 + 2.0 * g.point(i)[0] - g.point(i)[1]).collect();
        let v = g.interpolate(&vals, &[0.33, 0.71]).unwrap();
        assert!((v - (1.0 + 0.66 - 0.71)).abs() < 1e-13);
    }

    #[test]
    fn ball_query() {
        let g = Grid::new(&Domain::unit_cube(2).unwrap(), 0.1).unwrap();
        let b = g.members_in_ball(&[0.5, 0.5], 0.1);
        assert_eq!(b.len(), 4);
    }
}
