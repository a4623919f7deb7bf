//! Semi-supervised text classification over a corpus-level word/document
//! graph whose edges carry one weight per embedding dimension, learned with a
//! multi-stream graph convolutional network.
//!
//! Pipeline: [`corpus`] → [`embed`] → [`graph`] → [`model`], orchestrated by
//! [`harness`]. Numeric code is generic over [`Scalar`] (`f32` / `f64`); the
//! `*64` / `*32` aliases below fix the precision.

pub mod corpus;
pub mod embed;
pub mod graph;
pub mod harness;
pub mod io;
pub mod model;
pub mod scalar;
pub mod sparse;

pub use scalar::Scalar;

pub type SparseMatrix64 = sparse::SparseMatrix<f64>;
pub type SparseMatrix32 = sparse::SparseMatrix<f32>;
pub type EmbeddingMatrix64 = embed::EmbeddingMatrix<f64>;
pub type EmbeddingMatrix32 = embed::EmbeddingMatrix<f32>;
pub type MultiEdgeGraph64 = graph::MultiEdgeGraph<f64>;
pub type MultiEdgeGraph32 = graph::MultiEdgeGraph<f32>;
pub type ModelParams64 = model::ModelParams<f64>;
pub type ModelParams32 = model::ModelParams<f32>;
pub type Checkpoint64 = model::Checkpoint<f64>;
pub type Checkpoint32 = model::Checkpoint<f32>;
