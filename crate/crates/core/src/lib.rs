//! Daily streamflow forecasting toolkit.
//!
//! The crate bundles everything needed to rerun a rainfall-runoff model
//! comparison end to end:
//!
//! - [`numcore`]: dense row-major matrices and a seeded, portable RNG.
//! - [`convnet`]: multi-height 1-D convolution over a lookback window with
//!   global max pooling and a linear regression head.
//! - [`recurrent`]: stacked, optionally bidirectional LSTM with temporal max
//!   pooling and a linear head, trained by backpropagation through time.
//! - [`training`]: Huber loss, AdaDelta and the shared minibatch loop.
//! - [`baselines`]: least squares, gradient boosting and random forest.
//! - [`datapipe`]: CSV ingestion, z-scores, lookback windows, 7:1:2 splits
//!   and a synthetic hydro-climate generator.
//! - [`harness`]: relative error, the five-model comparison table and the
//!   lookback sweep.
//!
//! Model parameters and fitted ensembles are written with [`modelfile`].

pub mod baselines;
pub mod convnet;
pub mod datapipe;
mod error;
pub mod harness;
pub mod kv;
pub mod model;
pub mod modelfile;
pub mod numcore;
pub mod recurrent;
pub mod training;

pub use error::{Error, Result};
pub use numcore::{Matrix, SeededRng};
