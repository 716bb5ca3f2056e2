//! Simulation and verification engine for the range of random walks and
//! cocycles on countable groups.

pub mod error;
pub mod group;
pub mod lattice;
pub mod law;
pub mod quadrature;
pub mod acceptance;
pub mod analytic;
pub mod estimators;
pub mod cocycle;
pub mod range;
pub mod sites;
pub mod rng;
pub mod special;
pub mod stats;
pub mod taboo;

pub use error::{Error, Result};
pub use group::{inverse, multiply, word_norm, GroupDescriptor, GroupElement, GroupKind};
