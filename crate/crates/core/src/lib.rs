//! Generalized Legendre-Clairaut transform for Lagrangians with a possibly
//! degenerate velocity Hessian.
//!
//! The pipeline is: parse a Lagrangian ([`expr`]), split its velocities into
//! a regular block with nonsingular Hessian minor and a nonregular remainder
//! ([`partition`]), build the mixed Hamiltonian together with the primary
//! constraints ([`clairaut`]), and integrate the Lagrangian and mixed
//! Hamiltonian equations of motion side by side ([`dynamics`]).

pub mod clairaut;
pub mod dynamics;
pub mod expr;
pub(crate) mod linalg;
pub mod partition;
pub mod sampling;
pub mod system;

pub use clairaut::{EnvelopeSolver, InitialGuess, MixedHamiltonian, NewtonSettings, SolveError};
pub use dynamics::{GaugeChoice, Trajectory};
pub use expr::{Dual2, EvalError, Expression, ParseError};
pub use partition::{HessianPartition, PartitionError};
pub use system::{DomainBox, LagrangianSystem, SystemError};
