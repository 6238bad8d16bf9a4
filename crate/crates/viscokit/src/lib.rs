//! Finite-strain viscoelastic material point solver.
//!
//! Stresses derive from generalized Seth-Hill strains with arbitrary scale
//! functions. Viscous branches evolve an SPD internal variable with a
//! midpoint rule; the point driver applies homogeneous loading programs.

pub mod calibrate;
pub mod cli;
pub mod config;
pub mod driver;
pub mod error;
pub mod hyperelastic;
pub mod kinbridge;
pub mod par;
pub mod projections;
pub mod spectral;
pub mod strains;
pub mod tensor;
pub mod verify;
pub mod viscoelastic;

pub use error::{Error, Result};
pub use strains::ScaleFunction;
pub use tensor::{SymTensor2, Tensor2, Tensor4, Tensor6};
