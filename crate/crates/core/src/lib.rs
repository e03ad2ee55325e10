//! Inference for hybrid Bayesian networks with conditional linear Gaussian
//! continuous variables and softmax-style discrete children of continuous parents.
//!
//! The pipeline: build a strongly triangulated clique tree, calibrate it with the
//! CLG and table CPDs, enter evidence, then insert the CD CPDs by Gaussian
//! quadrature (or Monte Carlo) moment matching and recalibrate.

pub mod assignment;
pub mod canonical;
pub mod cdinsert;
pub mod cliquetree;
pub mod error;
pub mod experiments;
pub mod kl;
pub mod lw;
pub mod model;
pub mod networks;
pub mod pipeline;
pub mod propagation;
pub mod quadrature;

pub use error::{Error, Result};
pub use model::{Evidence, Network, NetworkBuilder, VarId};
