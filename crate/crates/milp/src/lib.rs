//! Mixed-integer linear models with binary variables, a branch-and-bound
//! solver built on a bounded revised simplex, and LP-format export.

pub mod bnb;
pub mod error;
pub mod lp_format;
pub mod lu;
pub mod model;
pub mod presolve;
pub mod simplex;

pub use bnb::{Branching, solve_lp, solve_milp, SolveResult, SolveStats, SolveStatus, SolverOptions};
pub use error::{LpFormatError, ModelError};
pub use lp_format::{read_lp, write_lp};
pub use model::{LinConstraint, MilpModel, Sense, VarId, VarKind, Variable};
