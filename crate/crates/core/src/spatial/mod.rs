//! Grids, rasters, marked point patterns, and their file formats.

mod grid;
pub mod io;
mod pattern;

pub use grid::{CountRaster, RasterGrid, RasterLayer};
pub use io::{load_point_pattern, load_raster, write_point_pattern, write_raster};
pub use pattern::{cell_counts, rasterize_marks, MarkedPointPattern, Point, CONFIDENCE, DIAG, LOCAL_FREQUENCY};
