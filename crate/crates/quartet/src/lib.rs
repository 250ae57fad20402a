//! Engineering toolkit for *Rashomon quartets*: four regression models from
//! different families (linear, tree, random forest, neural network) tied to
//! near-identical test performance on a crafted synthetic dataset, while
//! disagreeing in what they say about the data.
//!
//! The crate covers the full pipeline:
//!
//! * [`synth`] — correlated Gaussian design + sinusoidal target, CSV I/O;
//! * [`learners`] — the four model families behind one prediction interface;
//! * [`eval`] — R²/RMSE/MSE performance reports;
//! * [`explain`] — partial dependence profiles with bootstrap bands,
//!   permutation importance, residual analysis;
//! * [`couple`] — the analytic two-family instance (linear slope vs. sign
//!   stump) with provably equal population MSE;
//! * [`forge`] — the seed/θ search that engineers new quartets;
//! * [`svg`] — deterministic chart emitters for the standard figures.
//!
//! Everything randomized runs on seeded ChaCha8 substreams (see [`rng`]), so
//! results are byte-reproducible regardless of thread count. Data-parallel
//! inner loops (forest trees, bootstrap replicates, candidate sweeps) use
//! rayon when the default `parallel` feature is enabled and fall back to
//! sequential iteration without it.

pub mod couple;
pub mod data;
pub mod error;
pub mod eval;
pub mod exec;
pub mod explain;
pub mod forge;
pub mod learners;
pub mod matrix;
pub mod rng;
pub mod svg;
pub mod synth;

pub use data::Dataset;
pub use error::Error;
pub use matrix::Matrix;
