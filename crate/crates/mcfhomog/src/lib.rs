//! Numerical laboratory for the forced mean curvature flow `V = -eps*kappa + g(x/eps)`
//! with positive periodic Lipschitz forcing.
//!
//! Modules mirror the workflow: build a forcing field, evolve level sets or graphs,
//! solve obstacle problems, estimate head/tail speeds and check the structural
//! properties (Birkhoff monotonicity, inf-convolution, discrepancy bounds).

pub mod discrepancy;
pub mod error;
pub mod forcing;
pub mod io;
pub mod laminar;
pub mod levelset;
pub mod morphology;
pub mod obstacle;
pub mod speeds;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
