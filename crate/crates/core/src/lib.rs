//! Gierer-Meinhardt activator-inhibitor simulator with local (Laplacian) and
//! nonlocal (convolution) diffusion on rectangular domains with zero-flux
//! boundaries.
//!
//! Fields live on a cell-centred [`grid::Grid`]. The time integrator in
//! [`stepper`] is explicit Euler; [`diagnostics`] evaluates the boundedness
//! functionals along a run, and [`experiments`] drives the pattern runs,
//! kernel sweeps and the diffusive-limit study.

pub mod cli;
pub mod diagnostics;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod model;
pub mod operators;
pub mod reaction;
pub mod stepper;

pub use grid::{Dimension, Field, Grid};
pub use kernels::{discretize_kernel, DiscreteKernel, KernelSpec};
pub use model::{InitialCondition, ModelParams};
pub use stepper::{run, OperatorKind, StepperConfig};
