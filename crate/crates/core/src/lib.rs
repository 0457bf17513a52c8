//! Leja and symmetric Leja point sequences on the unit circle.

pub mod error;
pub mod greedy;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod pointset;
mod search;
pub mod verify;

pub use error::{Error, Result};
pub use greedy::{GreedyConfig, GreedyRun, Injection, InjectionSchedule, Mode, StepRecord};
pub use kernels::KernelKind;
pub use metrics::{MetricsRow, PrefixSelector};
pub use pointset::{CirclePointSet, Gap, Point, Provenance};
pub use verify::{Baseline, CheckReport};
