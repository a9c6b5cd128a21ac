//! Partial information decomposition (redundancy, uniqueness, synergy) of
//! finite discrete distributions over two modalities and a label, with
//! semi-supervised synergy bounds and PID-based model selection.

pub mod bounds;
pub mod discretize;
pub mod dist;
pub mod error;
pub mod model_quant;
pub mod objective;
mod scaling;
pub mod solver;

pub use bounds::{DisagreementConfig, PerfBounds, SynergyBounds};
pub use discretize::{DiscretizeConfig, Features, SampleTable};
pub use dist::{Cardinalities, JointDist, Matrix, PairwiseMarginals, Var, VarSet};
pub use error::{Error, Result};
pub use model_quant::{ModelLibrary, NormalizedPid};
pub use solver::{PartialPid, PidResult, SolveTrace, SolverConfig};
