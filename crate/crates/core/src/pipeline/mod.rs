//! Graph pools, structure-shifted suites, the training schedule, baselines
//! and evaluation.

mod config;
mod pool;
mod split;
mod train;

pub use config::{Components, TrainConfig, Variant};
pub use pool::{build_graph_pool, make_sync_suite, PoolGraph, Strategy, SuiteGraph, SUITE_TOL};
pub use split::{random_split, TRAIN_FRACTION, VAL_FRACTION};
pub use train::{evaluate, evaluate_masked, train_baseline, train_fatragnn, EpochRecord, RunRecord, StepCounters};
