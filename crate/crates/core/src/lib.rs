//! Nonparametric differential-entropy estimation with equiprobable k-d tree
//! partitions whose orientation is tuned to the sample.
//!
//! The pipeline is: centre and rotate the sample ([`geometry`]), split it
//! recursively at marginal medians into `2^(s*d)` equal-count bins
//! ([`partition`]), and read the entropy off the bin volumes
//! ([`estimators`]). [`optimizer`] picks the rotation that makes the bin
//! volumes as equal as possible, and [`benchmark`] scores all estimators
//! against Gaussians with known entropy.
//!
//! ```
//! use eqpart::{build_equiprobable, entropy_equiprobable, SampleSet};
//!
//! let s = SampleSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
//! let p = build_equiprobable(&s, 1, &[0, 1]).unwrap();
//! assert_eq!(p.len(), 4);
//! assert_eq!(entropy_equiprobable(&p).unwrap(), 0.0);
//! ```

pub mod benchmark;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod io;
pub mod optimizer;
pub mod partition;

pub use error::{Error, Result};
pub use estimators::{
    cyclic_orders, ensemble_estimate, entropy_equiprobable, entropy_equiprobable_samples,
    entropy_histogram, entropy_marginal_equiquantised, entropy_naive, estimate_equiprobable,
    winsorise, EntropyEstimate, HistogramEntropy, Method,
};
pub use geometry::{mrp_from_angle_2d, rotate, rotation_matrix, BoundingBox, Rotation, SampleSet};
pub use optimizer::{
    entropy_rotated, optimise_rotation, planar_variance, volume_variance, ObjectiveEvaluation,
    OptimizerConfig, RotationOptimum,
};
pub use partition::{
    bin_volumes, build_equiprobable, default_cycle_order, median_split, Bin, Partition, SplitPlane,
};
