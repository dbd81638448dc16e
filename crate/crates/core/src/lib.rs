//! Taylor-remainder nonlocal functionals, their sphere limits, polynomial
//! detection, and Whitney-type jet reconstruction on domains in `R^n`,
//! `n ≤ 3`.
//!
//! The guide in `book/` walks through each concept; its code blocks are
//! compiled as doctests of this crate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calderon;
pub mod catalog;
pub mod detector;
pub mod domain;
pub mod error;
pub mod field;
pub mod functional;
pub mod jet;
pub mod lattice;
pub mod mollifier;
pub mod multiindex;
pub mod quadrature;
pub mod sphere;
pub mod whitney;

pub use calderon::{best_local_polynomial, fit_polynomial, maximal_function, maximal_profile, MaximalProfile, MaximalValue, PolynomialFit};
pub use catalog::CatalogFunction;
pub use detector::{detect_polynomial, DetectionReport, DetectorConfig, Verdict};
pub use domain::{BoxRegion, Domain};
pub use error::{Error, Result};
pub use field::{mth_difference, FnField, ScalarField};
pub use functional::{
    bbm_functional, difference_functional, geometric_schedule, jet_condition_value, jet_condition_value_inner, run_sweep, shifted_jet_condition,
    singular_remainder_integral, DifferenceValue, FunctionalKind, FunctionalSpec, FunctionalSweep, QuadratureConfig, SingularReport, WeightRule,
};
pub use jet::{Component, Jet};
pub use lattice::Grid;
pub use mollifier::{check_mollifier, Mollifier, MollifierReport, MollifierSpec};
pub use multiindex::{enumerate_multiindices, multiindices_of_order, MultiIndex};
pub use sphere::{coeff_sphere_norm, norm_equivalence_probe, sphere_limit_target, sphere_measure, CoefficientVector, NormBounds, SphereNodes, SphereRule};
pub use whitney::{
    averaged_taylor, decompose, partition_of_unity, reconstruct, reconstruction_diagnostics, whitney_sweep, DyadicCube, PartitionOfUnity, Reconstruction,
    ReconstructionDiagnostics, WhitneyDecomposition,
};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/jets.md")]
    pub struct Jets;
    #[doc = include_str!("../../../book/src/functionals.md")]
    pub struct Functionals;
    #[doc = include_str!("../../../book/src/sphere.md")]
    pub struct Sphere;
    #[doc = include_str!("../../../book/src/detector.md")]
    pub struct Detector;
    #[doc = include_str!("../../../book/src/whitney.md")]
    pub struct Whitney;
    #[doc = include_str!("../../../book/src/calderon.md")]
    pub struct Calderon;
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub struct Experiments;
}
