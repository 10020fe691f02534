//! Locational marginal prices across a multi-voltage network.
//!
//! The numeric kernels (`linalg`, `lpsolve`, `pflow`) are generic over
//! [`scalar::Scalar`] so they run in `f32` or `f64`. Dispatch, scenarios and
//! statistics work in `f64`; the aliases below name the `f64` forms.

pub mod linalg;
pub mod lpsolve;
pub mod netmodel;
pub mod opf;
pub mod pflow;
pub mod runner;
pub mod scalar;
pub mod scenario;
pub mod stats;

pub use netmodel::Network;
pub use opf::{decompose_lmp, solve_opf, DispatchProblem, OpfSolution};
pub use runner::ResultSet;
pub use scenario::{build_fixture, synthesize_year, CapacityCase, ProfileSet};

pub type LinearProgram = lpsolve::LinearProgram<f64>;
pub type LpSolution = lpsolve::LpSolution<f64>;
pub type PowerFlowModel<'a> = pflow::PowerFlowModel<'a, f64>;
pub type PowerFlowSolution = pflow::PowerFlowSolution<f64>;
pub type InjectionSet = pflow::InjectionSet<f64>;
pub type Matrix = linalg::Matrix<f64>;
