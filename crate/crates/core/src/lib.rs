//! Hypergraph-to-token compilation and structure-language alignment.
//!
//! The crate is `no_std` + `alloc`; the `std` feature only enables runtime
//! SIMD dispatch in the matrix kernels.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bench;
pub mod diag;
pub mod eigen;
pub mod error;
pub mod hidto;
pub mod hip;
pub mod hypergraph;
pub mod lm;
pub mod nn;
pub mod protocol;
pub mod real;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use hypergraph::{BucketScheme, Buckets, Hyperedge, HyperedgeId, Hypergraph, Object, VertexId};
