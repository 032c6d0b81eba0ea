//! Quantitative ultrasound tissue characterization.
//!
//! Five biophysical features are measured inside a lesion mask on raw RF
//! frames (H-scan color level, convex-hull boundary roughness, B-mode STD
//! inside the lesion and in its boundary margin, Burr power-law exponent),
//! fused into a malignancy score (PC1, reference projection or signed SVM
//! distance) and rendered as a color overlay on the B-mode image.
//!
//! The [`phantom`] module synthesizes labeled RF cohorts with known ground
//! truth so the full chain can be exercised without clinical data.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops read more clearly in the matrix and kernel code.
#![allow(clippy::needless_range_loop)]
// `is_multiple_of` is newer than the supported toolchain.
#![allow(clippy::manual_is_multiple_of)]

pub mod burr;
pub mod dsi;
mod dsp;
pub mod eval;
pub mod grid;
pub mod hscan;
pub mod ml;
pub mod phantom;
pub mod pipeline;
pub mod region;
pub mod signal;

pub use grid::{Grid, Region};
pub use ml::{Feature, FeatureVector, Label, MalignancyScore, Scorer, TrainedModel};
pub use phantom::{Category, CohortManifest, LesionSpec};
pub use signal::{BModeImage, EnvelopeFrame, Geometry, LesionMask, RfFrame};
