//! Typed hypergraph network for joint activity and phone-placement
//! recognition.
//!
//! Instances are labelled with a phone placement and a set of activities.
//! Training instances are summarised into a hypergraph whose nodes are users,
//! placements and activities, and whose hyperedges are the observed
//! combinations. The model learns node embeddings over that graph and scores
//! each instance's features against every placement and activity node.
//!
//! Dense and sparse kernels run data-parallel through rayon when the
//! `parallel` feature is on (the default); see [`par::Exec`].

pub mod builder;
pub mod data;
pub mod error;
pub mod hypergraph;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod par;
pub mod sparse;

pub use builder::{build_graph, BuildOptions, BuildReport, GraphBundle};
pub use error::{Error, Result};
pub use hypergraph::{Hypergraph, NodeType};
pub use model::{make_variant, HhgnnConfig, Model, Variant};
pub use par::Exec;
pub use sparse::SparseMatrix;
