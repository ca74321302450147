//! Marginal contribution network (MCN) coalition games.
//!
//! * [`mcn`]: rule sets, coalitions and the characteristic function.
//! * [`exact`]: exact power indices by enumeration, used as ground truth.
//! * [`mc`]: seeded Monte-Carlo estimators and Hoeffding sample sizing.
//! * [`datagen`]: synthetic rule-set datasets, labeling and tensor files.
//! * [`nn`]: a small dense regressor for per-agent power indices.
//! * [`graph`]: agent co-occurrence graphs and rank correlation reports.

pub mod datagen;
pub mod error;
pub mod exact;
pub mod graph;
pub mod io;
pub mod mc;
pub mod mcn;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
pub use exact::{IndexKind, Method, PowerVector};
pub use mc::{McConfig, SampleBound};
pub use mcn::{AgentSet, Coalition, Rule, RuleSet, RuleSetDoc};
