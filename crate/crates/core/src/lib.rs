//! Sparse wideband MIMO array synthesis for near-field imaging.
//!
//! The crate covers the full synthesis loop:
//!
//! * a Born-approximation forward scattering simulator for arbitrary
//!   transmit/receive topologies and stepped-frequency grids ([`scatter`]),
//! * delay-and-sum (back-projection) image formation together with the
//!   sensing-matrix factorization that makes the image linear in the
//!   candidate element weights ([`imaging`]),
//! * an l1-constrained solver (with optional iterative reweighting) that
//!   fits a sparse weight vector to a block reference pattern, plus element
//!   selection and sequential Tx/Rx alternation ([`synthesis`]),
//! * point-spread-function characterization ([`psf`]) and image-quality
//!   metrics ([`metrics`]).
//!
//! All operations are deterministic: parallel loops only distribute
//! independent output cells and every inner reduction runs in a fixed order,
//! so results are bit-identical regardless of thread count.

// Negated float comparisons like !(x > 0.0) are deliberate throughout:
// unlike x <= 0.0 they also reject NaN. Index-style loops in the linear
// algebra kernels mirror the triangular access patterns they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod geometry;
pub mod imaging;
pub mod metrics;
pub mod psf;
pub mod scatter;
pub mod synthesis;

pub use error::Error;
pub use geometry::{
    ArrayTopology, Element, FrequencyGrid, Point3, Scatterer, Scene, Side, SPEED_OF_LIGHT,
};
pub use imaging::{
    bp_image, build_sensing_matrix, image_point_scene, project_max_range, ImageField, ImageGrid,
    RectMeta, SensingMatrix,
};
pub use metrics::{compare_images, display_map, image_entropy, MetricsReport};
pub use psf::{psf_analyze, PsfReport, SidelobePeak};
pub use scatter::{forward_scatter, ScatteredField};
pub use synthesis::{
    lemma1_check, reference_pattern, reference_pattern_and_field, resolution, reweighted_l1,
    sampling_grid, select_elements, solve_l1, subtended_angles, synthesize_sequential,
    Apodization, Epsilon, OptimizeOrder, PassDiagnostics, ReferencePattern, ResolutionSpec,
    SamplingGrid, Selection, SynthesisConfig, SynthesisResult,
};

/// Complex sample type used throughout.
pub type Complex64 = num_complex::Complex<f64>;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
