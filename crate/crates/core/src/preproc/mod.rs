//! Volume I/O, surface detection and patch extraction.

pub mod filters;
pub mod patches;
pub mod spline;
pub mod surface;
pub mod volume;

pub use filters::{gaussian_filter, sobel_edges, EdgeMap};
pub use patches::{downscale, extract_patches, ExtractMode, LabelSource, Patch, PatchOrigin, PatchSet};
pub use surface::{
    detect_surface, first_edge_per_column, rolling_ball, spline_average, Provenance, SurfaceCurve,
    SurfaceParams,
};
pub use volume::{BScanVolume, Image};
