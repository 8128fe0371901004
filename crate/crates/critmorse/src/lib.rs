//! File formats and report writers around `critmorse-core`.
//!
//! - [`io`]: the grid field format and trajectory CSV.
//! - [`report`]: JSON reports with sorted keys.
//! - [`svg`]: index class and determinant rasters.

pub mod io;
pub mod report;
pub mod svg;
