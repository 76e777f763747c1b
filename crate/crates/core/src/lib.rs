//! Fast exploratory data analysis through stable equilibrium points.
//!
//! The pipeline compresses a dataset by aggregating nodes of its k-nearest
//! neighbor graph, fits a minimal enclosing hypersphere in a Gaussian feature
//! space, and follows the gradient of the squared radial distance from every
//! compressed point to a local minimum. The distinct minima (stable
//! equilibrium points, SEPs) are a small representative set on which
//! spectral clustering and t-SNE run; results map back to every sample.
//!
//! ```no_run
//! use sep_eda::{data::make_blobs, spectral::{sep_spectral_cluster, PipelineParams}};
//!
//! let data = make_blobs(3, 200, 2, 4.0, 0.5, 7).unwrap();
//! let (labels, trace) = sep_spectral_cluster(&data, 3, &PipelineParams::default()).unwrap();
//! println!("{} SEPs, first label {}", trace.s, labels.labels[0]);
//! ```

pub mod bench;
pub mod coarsen;
pub mod data;
pub mod eigen;
pub mod error;
pub mod eval;
pub mod graph;
pub mod kmeans;
pub mod sep;
pub mod spectral;
pub mod svc;
pub mod svg;
pub mod tsne;

pub use data::{DataMatrix, Normalization};
pub use error::{Error, Result};
pub use eval::{accuracy, AccReport};
pub use kmeans::ClusterAssignment;
pub use spectral::{
    sep_spectral_cluster, spectral_cluster, LaplacianVariant, PipelineParams, PipelineTrace, SpectralParams,
};
pub use tsne::{exact_tsne, sep_tsne, TsneParams};
