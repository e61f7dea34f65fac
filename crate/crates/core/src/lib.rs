//! Quantum convolutional neural networks on a dense state-vector simulator,
//! a classical CNN baseline, and the augmentation experiments comparing them
//! on tiny training sets.

pub mod augment;
pub mod cnn;
pub mod datasets;
pub mod embedding;
pub mod error;
pub mod harness;
pub mod qcnn;
pub mod seeding;
pub mod selftest;
pub mod simulator;
pub mod training;

pub use error::{Error, ErrorKind, Result};
