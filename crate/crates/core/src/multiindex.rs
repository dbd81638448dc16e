//! Multi-indices `α = (α_1, …, α_n)` and the small amount of algebra built on
//! them: orders, factorials, monomials and graded enumeration.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 3;

/// A multi-index of length `n ≤ 3`. Unused trailing slots are always zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    dim: u8,
    entries: [u32; MAX_DIM],
}

pub(crate) fn check_dim(n: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::Dimension(n))
    }
}

impl MultiIndex {
    pub fn new(entries: &[u32]) -> Result<Self> {
        check_dim(entries.len())?;
        let mut e = [0; MAX_DIM];
        e[..entries.len()].copy_from_slice(entries);
        Ok(Self {
            dim: entries.len() as u8,
            entries: e,
        })
    }

    pub fn zero(n: usize) -> Self {
        debug_assert!((1..=MAX_DIM).contains(&n));
        Self {
            dim: n as u8,
            entries: [0; MAX_DIM],
        }
    }

    /// The unit multi-index `e_i` in dimension `n`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut a = Self::zero(n);
        a.entries[i] = 1;
        a
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries[..self.dim as usize]
    }

    /// `|α| = Σ α_i`.
    pub fn order(&self) -> usize {
        self.entries().iter().map(|&a| a as usize).sum()
    }

    /// `α! = Π α_i!`.
    pub fn factorial(&self) -> f64 {
        self.entries().iter().map(|&a| factorial(a as usize)).product()
    }

    /// The monomial `x^α`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.entries()
            .iter()
            .zip(x)
            .map(|(&a, &xi)| xi.powi(a as i32))
            .product()
    }

    /// Componentwise `β ≤ α`.
    pub fn le(&self, other: &Self) -> bool {
        self.dim == other.dim && self.entries().iter().zip(other.entries()).all(|(a, b)| a <= b)
    }

    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        if !other.le(self) {
            return None;
        }
        let mut r = *self;
        for i in 0..self.dim() {
            r.entries[i] -= other.entries[i];
        }
        Some(r)
    }

    /// `Π binom(α_i, β_i)`; zero unless `β ≤ α`.
    pub fn binomial(&self, beta: &Self) -> f64 {
        if !beta.le(self) {
            return 0.0;
        }
        self.entries()
            .iter()
            .zip(beta.entries())
            .map(|(&a, &b)| binomial(a as usize, b as usize))
            .product()
    }

    /// All `β ≤ α`, in graded order.
    pub fn lower_set(&self) -> Vec<Self> {
        enumerate_multiindices(self.dim(), self.order())
            .expect("dimension already validated")
            .into_iter()
            .filter(|b| b.le(self))
            .collect()
    }
}

impl std::ops::Add for MultiIndex {
    type Output = MultiIndex;

    fn add(self, rhs: Self) -> Self {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut r = self;
        for i in 0..MAX_DIM {
            r.entries[i] += rhs.entries[i];
        }
        r
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.entries().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// All multi-indices in dimension `n` with `|α| ≤ k`, graded by order and,
/// within one order, lexicographically descending (so `(1,0)` precedes
/// `(0,1)`). The count is `binom(n + k, n)`.
pub fn enumerate_multiindices(n: usize, k: usize) -> Result<Vec<MultiIndex>> {
    let mut out = Vec::new();
    for order in 0..=k {
        out.extend(multiindices_of_order(n, order)?);
    }
    Ok(out)
}

/// Multi-indices with `|α| = k` exactly, in the same order as
/// [`enumerate_multiindices`].
pub fn multiindices_of_order(n: usize, k: usize) -> Result<Vec<MultiIndex>> {
    check_dim(n)?;
    let mut out = Vec::new();
    let mut current = [0u32; MAX_DIM];
    fill(n, 0, k as u32, &mut current, &mut out);
    Ok(out)
}

fn fill(n: usize, pos: usize, remaining: u32, current: &mut [u32; MAX_DIM], out: &mut Vec<MultiIndex>) {
    if pos == n - 1 {
        current[pos] = remaining;
        out.push(MultiIndex {
            dim: n as u8,
            entries: *current,
        });
        current[pos] = 0;
        return;
    }
    for a in (0..=remaining).rev() {
        current[pos] = a;
        fill(n, pos + 1, remaining - a, current, out);
    }
    current[pos] = 0;
}
