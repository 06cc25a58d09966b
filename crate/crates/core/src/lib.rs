//! Higher-order tensor descriptors for multivariate time series.
//!
//! Sequences of 3D body joints (or per-frame score streams) are mapped to
//! fixed-length vectors whose dot products reproduce sequence and dynamics
//! compatibility kernels, optionally whitened by eigenvalue power
//! normalization. Exact kernels are provided alongside as test oracles.

pub mod bench;
pub mod classify;
pub mod dataio;
pub mod dck;
pub mod descriptor;
pub mod epn;
pub mod error;
pub mod features;
pub mod sck;
pub mod tensor;

pub use dataio::{Channel, SkeletonSequence};
pub use descriptor::{config_hash, Descriptor, KernelKind};
pub use error::{Error, Result};
pub use features::PivotGrid;
