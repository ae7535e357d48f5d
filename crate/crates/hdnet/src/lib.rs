//! Training-free estimation of causal effects on networked units.
//!
//! The pipeline: embed each unit's covariates into a high-dimensional bipolar
//! code with a random hyperplane tessellation, fold in one- and two-hop
//! network context by binding role vectors to bundled neighborhood codes,
//! then estimate potential outcomes by weighted nearest-neighbor matching on
//! Hamming distance against the opposite treatment arm. No model is trained
//! at any point; every step is a deterministic function of the data and a
//! seed.
//!
//! Modules, bottom up:
//! * [`rng`]: seeded generator with hierarchical stream splitting.
//! * [`hv`]: packed bipolar hypervectors; bundling, binding, Hamming.
//! * [`rhpt`]: covariates to hypervectors via random hyperplanes.
//! * [`graph`]: undirected graphs and edge-list parsing.
//! * [`graphenc`]: network-aware unit codes from hop aggregation.
//! * [`estimator`]: nearest-neighbor matching and effect estimates.
//! * [`datagen`]: synthetic networked datasets with known ground truth.
//! * [`metrics`] and [`experiment`]: error metrics, splits, runs, sweeps.
//! * [`io`]: on-disk formats shared with the command-line tool.

pub mod datagen;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod graph;
pub mod graphenc;
pub mod hv;
pub mod io;
pub mod metrics;
pub mod rhpt;
pub mod rng;

pub use datagen::{generate, GenConfig, GraphModel, KappaSpec, NetDataset};
pub use error::{Error, Result};
pub use estimator::{
    estimate_in_sample, estimate_out_of_sample, impute, knn_arm, Donor, EffectEstimate,
    MatchConfig, MatchPool, Weighting,
};
pub use experiment::{
    build_codes, make_split, run_experiment, sweep, EvalReport, RunParams, Split, SweepCell,
    SweepOutcome,
};
pub use graph::Graph;
pub use graphenc::{
    aggregate_1hop, aggregate_2hop, encode_graph, encode_graph_keyed, encode_node, HopDepth,
    RoleVectors,
};
pub use hv::{BundleAccumulator, Hypervector};
pub use metrics::{eps_ate, eps_pehe};
pub use rhpt::{standardize_columns, RhptEncoder};
pub use rng::HdRng;

/// The guide's code blocks double as doctests, so a chapter that drifts
/// from the library fails `cargo test` instead of quietly rotting.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../README.md")]
    pub mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/hypervectors.md")]
    pub mod hypervectors {}
    #[doc = include_str!("../../../book/src/covariate-codes.md")]
    pub mod covariate_codes {}
    #[doc = include_str!("../../../book/src/network-codes.md")]
    pub mod network_codes {}
    #[doc = include_str!("../../../book/src/matching.md")]
    pub mod matching {}
    #[doc = include_str!("../../../book/src/synthetic-data.md")]
    pub mod synthetic_data {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
