//! Core algorithms for iterated population based training (IPBT).
//!
//! Everything in this crate is pure computation on `alloc` collections:
//! hyperparameter spaces, a time-varying Gaussian process, the stagnation
//! detector, restart logic, the outer training loop and its baselines, and
//! the bootstrap statistics used to compare optimizers. File formats, the
//! thread pool and the command line live in the `ipbt` crate.
#![no_std]

extern crate alloc;

pub mod baselines;
pub mod engine;
mod error;
pub mod gp;
pub mod history;
pub mod hpspace;
pub mod linalg;
pub mod restart;
pub mod rng;
pub mod stagnation;
pub mod stats;
pub mod trainable;

pub use error::{Error, Result};
pub use hpspace::{Dimension, DimensionKind, HpVector, HyperparameterSpace};
pub use trainable::{Trainable, WeightState};
