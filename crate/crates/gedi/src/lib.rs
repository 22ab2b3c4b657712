//! Joint generative and discriminative self-supervised training on 2-D
//! synthetic data.
//!
//! The crate couples an energy-based model trained with persistent
//! contrastive divergence to a prototype-clustering objective, ties the two
//! together through a manifold-following augmentation routine, and evaluates
//! the learned clusterings with normalized mutual information. Everything
//! runs on a small reverse-mode autodiff engine over dense `f64` matrices;
//! there is no external tensor runtime.
//!
//! Start from [`trainer::run_experiment`] for end-to-end runs, or browse the
//! `examples/` directory: each example exercises one capability (the tape,
//! the datasets, the losses, the sampler, the augmentation walk, full
//! training).

pub mod adam;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dam;
pub mod ebm;
pub mod error;
pub mod gradcheck;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod objectives;
pub mod report;
pub mod rng;
pub mod synthdata;
pub mod tape;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use tape::{NodeId, Tape};
