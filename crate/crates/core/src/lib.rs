//! From-scratch toolkit for a small tabular binary-classification pipeline
//! aimed at chronic kidney disease screening data.
//!
//! The crate is organized around one flow: obtain rows of ten clinical
//! features plus a binary label (either from a CSV file via [`data`] or
//! synthetically via [`synth`]), preprocess them (mean imputation,
//! standardization, stratified splitting), train a small feed-forward
//! network ([`nn`]), score it ([`metrics`]), and explain it
//! ([`importance`]). The dense matrix arithmetic underneath lives in
//! [`matrix`] and is written for reproducibility: identical inputs and seeds
//! produce bit-identical outputs on every run.

pub mod data;
pub mod error;
pub mod importance;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod synth;

mod seeding;

pub use error::{Error, Result};
pub use matrix::{ElemOp, Matrix};
