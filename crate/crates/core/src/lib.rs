//! Sequence-based visual place recognition over low-resolution,
//! patch-normalized images.
//!
//! The pipeline mirrors how a route is localized from a second traverse:
//!
//! - [`imaging`]: grayscale conversion, crop, area downsampling and patch
//!   normalization into [`Template`]s.
//! - [`matching`]: SAD comparison against a [`TemplateStore`], local
//!   neighborhood normalization of difference vectors, and the sliding
//!   [`DifferenceMatrix`].
//! - [`sequence`]: slope-constrained linear trajectory search over the
//!   difference matrix.
//! - [`blur`]: moving-average temporal blur for long-exposure simulation.
//! - [`eval`]: ground truth interpolation, recall and error scoring,
//!   threshold sweeps and the normalization ranking analysis.
//! - [`pipeline`]: glue that runs a full query traverse against a
//!   reference store.
//!
//! [`synth`] generates procedural routes with known correspondences and is
//! used by the test suites and benchmarks.

pub mod blur;
mod error;
pub mod eval;
pub mod imaging;
pub mod io;
pub mod matching;
pub mod pipeline;
pub mod report;
pub mod sequence;
pub mod synth;

pub use error::{Error, Result};
pub use imaging::{CropRect, GrayImage, RawImage, Template};
pub use matching::{DifferenceMatrix, DifferenceVector, TemplateStore};
pub use sequence::{SequenceMatch, SlopeConfig};

/// Selects whether data-parallel kernels fan out over the rayon pool.
///
/// Results are bit-identical either way.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// Round to nearest, ties toward positive infinity.
#[inline]
pub fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}
