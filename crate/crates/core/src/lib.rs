//! Estimating the number of communities in weighted networks.
//!
//! The central procedure is stepwise variance-profile scaling (SVPS): for each
//! candidate count `m = 1, 2, ...` the network is clustered spectrally, a
//! weighted degree-corrected block model is fitted by plug-in estimates, the
//! fitted variance profile is scaled to doubly stochastic form, and the
//! `(m+1)`-th eigenvalue magnitude of the correspondingly scaled adjacency
//! matrix is compared against `2 + epsilon`.
//!
//! Score-based baselines (CBIC and ICL) and a Monte-Carlo harness for
//! accuracy studies are included.
//!
//! ```
//! use commscale::model::{simulation_params, VarianceFunction};
//! use commscale::network::WeightedAdjacency;
//! use commscale::select::{svps_select, SvpsConfig};
//! use rand::SeedableRng;
//!
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let model = simulation_params(3, 1.0, 2.0, &[50, 100, 150], &mut rng).unwrap();
//! let a = WeightedAdjacency::from_matrix(model.mean_matrix()).unwrap();
//! let trace = svps_select(&a, &SvpsConfig::default()).unwrap();
//! assert_eq!(trace.k_hat, Some(3));
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod fit;
pub mod model;
pub mod network;
pub mod par;
pub mod rng;
pub mod scaling;
pub mod select;
pub mod spectral;

pub use error::{Error, Result};
pub use par::Execution;
