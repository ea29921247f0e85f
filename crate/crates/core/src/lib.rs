// SPDX-License-Identifier: Apache-2.0
//! State register identification for flattened gate-level netlists.
//!
//! The pipeline maps a structural Verilog netlist onto a small
//! technology-independent cell model, builds a directed data-dependency
//! graph, extracts the depth-limited fan-in cone of every register, embeds
//! each cone with a graph attention auto-encoder and finally groups the
//! registers by embedding distance. Small groups are labeled as FSM state
//! registers, large groups as datapath registers.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the bottom of this file pin the common instantiations.

pub mod classify;
pub mod error;
pub mod eval;
pub mod gate;
pub mod graph;
pub mod netlist;
pub mod pipeline;
pub mod scalar;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Scalar;

pub use classify::{Classification, ClusterSet, RegisterLabel};
pub use gate::{GateModel, TrainConfig};
pub use graph::{CircuitGraph, FeatureVector, PathStructure};
pub use netlist::{CellKind, Netlist, TechLibrary};

/// Double precision model, the default for training and checkpoints.
pub type GateModelF64 = gate::GateModel<f64>;
/// Single precision model.
pub type GateModelF32 = gate::GateModel<f32>;
pub type FeatureVectorF64 = graph::FeatureVector<f64>;
pub type FeatureVectorF32 = graph::FeatureVector<f32>;
pub type RegisterEmbeddingF64 = gate::RegisterEmbedding<f64>;
pub type RegisterEmbeddingF32 = gate::RegisterEmbedding<f32>;
