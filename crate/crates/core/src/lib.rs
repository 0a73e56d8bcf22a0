//! Interpretable classification by ellipsoidal partitioning.
//!
//! Training carves each class into minimum-volume ellipsoids that contain at
//! most `n_imp` points of the other class, using reduced-convex-hull
//! separating slabs to choose what to carve next. Prediction locates the
//! ellipsoid(s) holding a query point, labels it by the training counts in
//! that region, and reports a smoothed Bayesian posterior that doubles as a
//! trust score with an abstain option.

pub mod classifier;
pub mod classify;
pub mod config;
pub mod dataset;
pub mod ellipsoid;
pub mod error;
pub mod mve;
pub mod partition;
pub mod plot;
pub mod rch;
pub mod store;

pub use classifier::{evaluate, Classifier, EvalReport, Prediction};
pub use classify::{classify, locate, predict_multiclass, trust_score, CountScope, Region, RegionKind, Rule, TrustReport};
pub use config::Config;
pub use dataset::{LabeledDataset, OvrReport};
pub use ellipsoid::{intersects, Ellipsoid};
pub use error::{Error, Result};
pub use mve::{mve_fit, MveSolution};
pub use partition::{partition, refine_side, Counts, Label, IterationLog, Origin, Partition, PartitionModel, Refined};
pub use rch::{rch_step, solve_rch_qp, RchSolution, RchSplit};
