//! A convex nonlinear-programming solver built on continuous-time dynamics.
//!
//! The KKT conditions of `min f(x) s.t. g(x) <= 0, x >= 0` form a monotone
//! complementarity system; a homogeneous embedding with two extra scalars
//! `(tau, kappa)` makes that system always solvable, so every problem —
//! feasible or not — maps to an ODE that reaches equilibrium. The flow is a
//! Newton-type fixed-time-stable field whose settling time is prescribed
//! through its gain (`k = pi/(2 T_p)` at the default exponent), independent
//! of problem data and initial condition. Reading `tau` vs `kappa` off the
//! settled state either recovers an optimal point (`x* = x/tau`) or
//! certifies infeasibility (scaling by `1/kappa`).
//!
//! Crate layout:
//! * [`problem`]: program families (LP / QP / exp-sum / generic oracles),
//!   file format, infeasible augmentation, free-variable splitting;
//! * [`mcp`] and [`hmcp`]: the complementarity map, its homogeneous
//!   embedding, and outcome classification;
//! * [`flows`]: the fixed-time vector fields and gain prescriptions;
//! * [`integrator`]: adaptive implicit integration with settling events;
//! * [`solver`]: end-to-end solves, constrained and unconstrained;
//! * [`harness`]: reproducible benchmarks and reference oracles (fixed to
//!   [`Real`]).
//!
//! The numeric core is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below pin the default `f64` instantiation.

pub mod flows;
pub mod harness;
pub mod hmcp;
pub mod integrator;
pub mod linalg;
pub mod mcp;
pub mod problem;
pub mod scalar;
pub mod solver;

/// Default scalar type; every tolerance in the crate is calibrated for it.
pub type Real = f64;

/// Convex program at default precision.
pub type Program = problem::ConvexProgram<Real>;
/// Solver configuration at default precision.
pub type Config = solver::SolverConfig<Real>;
/// Solve report at default precision.
pub type Report = solver::SolveReport<Real>;

pub use hmcp::Outcome;
pub use problem::{parse_problem_file, to_problem_file, Family, ProblemError};
pub use solver::{solve, solve_unconstrained};
