use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::multiindex::MAX_DIM;

use super::WhitneyDecomposition;

/// Smooth step equal to 1 for `u ≤ 0`, 0 for `u ≥ 1`, built from
/// `g(t) = exp(−1/t)`.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    if u >= 1.0 {
        return 0.0;
    }
    let g = |t: f64| (-1.0 / t).exp();
    let a = g(1.0 - u);
    a / (a + g(u))
}

/// The partition `φ_i = ψ_i / Σ_j ψ_j` subordinate to the dilated cubes.
///
/// `ψ_i` is a tensor product of smooth steps, equal to 1 on `Q_i` and
/// supported in the open cube `(9/8)Q_i`.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    decomposition: WhitneyDecomposition,
    index: HashMap<[i64; MAX_DIM], Vec<usize>>,
}

/// Partition of unity for a decomposition.
pub fn partition_of_unity(decomposition: &WhitneyDecomposition) -> PartitionOfUnity {
    PartitionOfUnity {
        index: decomposition.spatial_index(),
        decomposition: decomposition.clone(),
    }
}

impl PartitionOfUnity {
    pub fn decomposition(&self) -> &WhitneyDecomposition {
        &self.decomposition
    }

    /// The bump `ψ_i(x)`.
    pub fn bump(&self, i: usize, x: &[f64]) -> f64 {
        let cube = &self.decomposition.cubes()[i];
        let c = cube.center();
        let s = cube.side();
        let band = s * (super::DILATION - 1.0) / 2.0;
        (0..cube.dim)
            .map(|d| smooth_step(((x[d] - c[d]).abs() - s / 2.0) / band))
            .product()
    }

    /// Cubes whose dilation may contain `x`.
    pub fn candidates(&self, x: &[f64]) -> &[usize] {
        self.index.get(&self.decomposition.cell_key(x)).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Non-zero pairs `(i, φ_i(x))`.
    pub fn weights_at(&self, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        let raw: Vec<(usize, f64)> = self
            .candidates(x)
            .iter()
            .map(|&i| (i, self.bump(i, x)))
            .filter(|(_, v)| *v > 0.0)
            .collect();
        let total: f64 = raw.iter().map(|(_, v)| v).sum();
        if total < 1e-8 {
            return Err(Error::PartitionDegenerate {
                point: x.to_vec(),
                value: total,
            });
        }
        Ok(raw.into_iter().map(|(i, v)| (i, v / total)).collect())
    }

    /// `φ_i(x)`, zero when `x` is not covered.
    pub fn weight(&self, i: usize, x: &[f64]) -> f64 {
        self.weights_at(x)
            .ok()
            .and_then(|w| w.into_iter().find(|(j, _)| *j == i).map(|(_, v)| v))
            .unwrap_or(0.0)
    }
}
