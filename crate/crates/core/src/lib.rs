//! Preference-data quality metrics, top-k selection, and a contextual-bandit
//! simulator for stochastic DPO under uniform and max-gap sampling.
//!
//! - [`metrics`]: explicit/implicit reward margins, `M_1`, `M_+`, the
//!   alignment potential and its z-score normalized form.
//! - [`selection`]: top-k, top-fraction and seeded uniform subsets.
//! - [`bandit`]: tabular softmax policy, residual/variance/distance tracking,
//!   fixed and optimal learning-rate steps, samplers, trial runner and the
//!   uniform-vs-adversarial iteration check.
//! - [`pipeline`]: evolve-then-select and select-then-evolve loops over a
//!   pluggable world, with a closed-loop bandit backend and a file backend.

pub mod bandit;
pub mod error;
pub mod io;
pub mod metrics;
pub mod numeric;
pub mod pipeline;
pub mod record;
pub mod selection;

pub use error::{Error, Result};
pub use metrics::{DatasetStats, ImplicitKind, Metric, MetricConfig, ScoredDataset};
pub use record::{LoadOptions, PreferenceRecord, Side};
pub use selection::SelectionResult;
