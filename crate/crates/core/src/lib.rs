//! Certified reduced-basis models on binary-tree partitions of the
//! parameter domain.

mod codec;
pub mod error;
pub mod fem;
pub mod harness;
pub mod hp;
pub mod param;
pub mod problem;
pub mod proximity;
pub mod rb;

pub use error::{Error, Result};
pub use hp::{build_library, HpConfig, Library};
pub use param::{Extent, Param, ParamBox, TrainingSet};
pub use problem::{AffineProblem, ConvDiffCase, ProblemConfig, ProblemKind};
pub use proximity::{build_library_proximity, ProximityTree};
