//! Stabilised nodal finite elements for the 2D Maxwell-type problem
//! ν ∇×∇×u + ∇p = f, ∇·u = 0, with Dirichlet data on the tangential trace
//! imposed weakly (Nitsche) or strongly.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod harness;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod sparse;

pub use analysis::{l2_errors, ErrorReport};
pub use assembly::{build_system, CornerStrategy, Formulation, LinearSystem, Params};
pub use error::{Error, Result};
pub use harness::{run_study, CaseSelector, MeshFamily, StudyConfig, StudyReport};
pub use linsolve::{solve, SolutionFields};
pub use mesh::{Domain, Mesh};
pub use problems::ProblemCase;
