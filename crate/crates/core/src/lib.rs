#![no_std]
#![forbid(unsafe_code)]
// `!(x >= lo)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Self-sampling point cloud consolidation.
//!
//! A small displacement network is trained on pairs of disjoint subsets drawn
//! from a single input cloud. Targets are biased toward "positive" points
//! (sharp or sparsely sampled) and sources toward the rest, so the network
//! learns to move ordinary points onto the under-represented features. At
//! inference, uniform subsets are displaced repeatedly and the outputs are
//! aggregated into an arbitrarily dense consolidated cloud.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, fixtures and
//! the command-line front end live in the `selfsample` crate.

extern crate alloc;

pub mod cloud;
pub mod consolidate;
mod error;
pub mod eval;
pub mod geometry;
pub mod knn;
pub mod labeling;
mod linalg;
pub mod net;
pub mod proxy;
pub mod real;
pub mod sampler;
pub mod train;

pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use geometry::Vec3;
pub use knn::KnnIndex;
pub use labeling::{Criterion, Label, PointLabels};
pub use net::{NetArchitecture, NetParams, NormalizationTransform};
pub use proxy::{ProxyKind, ProxyValues};
pub use real::Real;
pub use sampler::{Sampler, SamplerConfig, SubsetPair};
