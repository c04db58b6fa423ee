//! Structure learning and posterior sampling for Bayesian networks.
//!
//! The pipeline combines a constraint-based skeleton (Fisher-z or G² tests)
//! with order and partition MCMC over a restricted search space.  All score
//! quantities needed by the chains are precomputed into per-node lookup
//! lattices so that individual MCMC steps reduce to table lookups.

pub mod bde;
pub mod bge;
pub mod cli;
pub mod data;
pub mod error;
pub mod graph;
pub mod math;
pub mod order;
pub mod partition;
pub mod space;
pub mod tables;

pub use data::{Dataset, DataKind, GaussianStats, GroundTruth};
pub use error::{Error, Result};
pub use graph::{Cpdag, Dag, DagSample, EdgePosterior};
pub use space::SearchSpace;
pub use tables::{Lattices, LocalScorer, NodeLattice};
