//! Mass-lumped P1 finite element schemes for the radially symmetric
//! semilinear heat equation
//!
//! ```text
//! u_t = u_xx + ((N-1)/x) u_x + f(u),   0 < x < 1,   u_x(0) = 0,   u(1) = 0.
//! ```

pub mod blowup;
pub mod error;
pub mod forms;
pub mod functionals;
pub mod initial;
pub mod mesh;
pub mod quadrature;
pub mod schemes;
pub mod spectral;
pub mod tridiag;

pub use blowup::{BlowupConfig, BlowupResult, Control, TauForm};
pub use error::{Error, Result};
pub use forms::{NodalFunction, WeightedForms};
pub use initial::InitialData;
pub use mesh::{Mesh, MeshFamily};
pub use schemes::{Nonlinearity, ProblemConfig, Scheme, State};
pub use spectral::{EigenPair, MassKind};
