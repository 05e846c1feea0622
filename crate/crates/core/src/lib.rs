//! Finite-element solver for the Richards equation with a posteriori
//! controlled switching between the L-scheme and Newton's method.

pub mod cases;
pub mod constitutive;
pub mod driver;
pub mod eqflux;
pub mod error;
pub mod estimate;
pub mod fem;
pub mod linearize;
pub mod mesh;

pub use cases::{builtin_case, builtin_cases, case1, case2, case3, CaseSpec, DirichletCondition};
pub use constitutive::{Constitutive, ConstitutiveModel, LinearModel, VanGenuchtenParams};
pub use driver::{run_case, RunReport, RunStatus, SolverConfig, Strategy};
pub use error::{Error, Result};
pub use fem::{DiscreteField, FeSpace};
pub use linearize::SchemeKind;
pub use mesh::{BoundaryRegion, Mesh, Rect, Side};
