//! Random-walk and front-fixing solvers for a diffusant penetrating a
//! sorbing medium behind a moving reaction front.

pub mod error;
pub mod io_cli;
pub mod model;
pub mod observables;
pub mod reference;
pub mod rng;
pub mod rwm;
pub mod trace;

pub use error::{Error, ModelError, ObservableError, SolverError};
pub use model::{nondimensionalize, DimensionlessProblem, PhysicalParameters};
pub use reference::{solve_reference, transform_problem, ReferenceMesh};
pub use rng::{RandomStream, WalkerDraws};
pub use rwm::{LeftBoundary, Numerics};
pub use trace::SolutionTrace;
