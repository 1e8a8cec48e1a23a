//! Causal forests with limit-inferior leaf-interval (LILI) clustering.
//!
//! A forest of `K` causal trees is fitted on the data; two instances are
//! clustered together when they share a leaf in more than `K - f(K)` trees.
//! Clusters holding both treated and control units yield within-cluster
//! effect estimates that are averaged, weighted by size, into an ATE.

pub mod clustering;
pub mod data;
pub mod error;
pub mod estimate;
pub mod forest;
pub mod seed;
pub mod tolerance;
pub mod tree;
pub mod tune;

pub use error::{Error, Result};
