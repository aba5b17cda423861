//! Influence diagram solvers: lazy propagation on a strong junction tree,
//! an eager HUGIN-style baseline, and exact reference oracles.

pub mod eliminate;
pub mod error;
pub mod format;
pub mod hugin;
pub mod jtree;
pub mod lazy;
pub mod model;
pub mod oracle;
pub mod potential;
pub mod random;
pub mod report;
pub mod relevance;
pub mod strategy;

pub use error::{Error, Result};
pub use model::{DiagramBuilder, Evidence, InfluenceDiagram, VarKind};
pub use potential::{Domain, OpCounter, Potential, VarId};
