//! Two-type spatial population models with dormancy on a torus: migration
//! kernels, colony size fields, the two-particle dual walks and the forward
//! process, exact finite-state solvers, and Monte Carlo experiments.

pub mod cli;
pub mod colony;
pub mod dual;
pub mod experiments;
pub mod forward;
pub mod kernel;
pub mod oracle;
