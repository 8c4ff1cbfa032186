//! Ontology-backed relation prediction with perturbation explanations.
//!
//! This crate represents a pair of knowledge-graph entities by the ontology
//! classes they share (their disjoint common ancestors), feeds that
//! representation to a binary classifier, and explains each prediction by
//! removing or isolating one shared class at a time. Everything here is pure
//! computation over in-memory data; file formats, configuration and the
//! pipeline live in the companion CLI crate.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the `std` feature is
//! enabled by default.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod aspects;
pub mod bitset;
pub mod classify;
pub mod embed;
pub mod eval;
pub mod explain;
pub mod graph;
pub mod pairrep;

mod numeric;

pub use aspects::AspectSet;
pub use classify::{ClassifierConfig, ClassifierKind, ClassifierModel, Prediction};
pub use embed::{EmbeddingMethod, EmbeddingTable, TrainConfig};
pub use eval::{DeltaMetrics, Metrics, PairDataset};
pub use explain::Explanation;
pub use graph::{AnnotationMap, NodeId, OntologyGraph, RelId, Triple, TripleStore};
pub use pairrep::{AggregateOp, PairVector};
