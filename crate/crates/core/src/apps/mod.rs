//! Downstream pipelines built on a pivot strategy: kernel ridge regression
//! restricted to the pivot points, and spectral clustering from a Nyström
//! factor.

pub mod kmeans;
pub mod krr;
pub mod metrics;
pub mod spectral;

pub use kmeans::{kmeans, KMeans};
pub use krr::{krr_fit, solve_restricted_system, KrrFit, KrrModel};
pub use metrics::{clustering_error, smape};
pub use spectral::{spectral_cluster, spectral_embedding, ClusterModel, SpectralParams};
