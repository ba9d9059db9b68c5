//! Szegő kernels and Szegő projections on polynomial-model CR manifolds
//! `{(z, w) ∈ ℂ × ℂⁿ : Im w = p(Re z) a}`.
//!
//! The modules follow the computation from the bottom up: [`model`] holds the
//! profile and coordinates, [`weights`] the normalizing integral, [`kernel`]
//! point evaluations of the kernel, [`projection`] the operator on grid
//! functions, and [`geometry`] the commutator and control-distance analysis.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod model;
pub mod poly;
pub mod projection;
pub mod quad;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
pub use model::{build_model, p_derivative, Frequency, ManifoldPoint, ModelSpec, PolynomialModel};
pub use weights::{log_weight_gaussian, log_weight_quadrature, sigma_contains, LogWeight};
pub use kernel::{
    factorized_kernel, nagel_kernel_numeric, pair_with_test_function, quadric_kernel_1d, DistributionalKernelValue,
    Method,
};
pub use projection::{
    apply_lbar, apply_szego_projection, frequency_slice_project, partial_fourier, Direction, GridFunction, GridSpec,
    ProjectionDiagnostics, SliceWeightCache,
};
pub use geometry::{
    commutator_fields, control_distance_upper_bound, gauge_distance, leaf_offset, size_ratio_report, tangency_report,
    CommutatorField, GaugeReport, SizeRatioReport, TangencyReport,
};
