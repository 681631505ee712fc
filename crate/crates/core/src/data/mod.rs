//! Batch datasets, count-based behavior density estimates and the support filter.

mod dataset;
mod density;
mod filter;

pub use dataset::{generate_dataset, read_dataset, write_dataset, Dataset, Provenance, SamplingMode};
pub use density::{estimate_density, DensityEstimate};
pub use filter::{build_filter, filter_diagnostics, write_support_csv, FilterDiagnostics, SupportFilter};

pub use crate::mdp::Transition;
