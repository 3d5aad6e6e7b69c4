//! Mixed finite elements for non-selfadjoint, indefinite second-order elliptic
//! problems with rough coefficients.
//!
//! The crate discretizes `−∇·(A∇u + u b) + γu = f` (or its convective variant
//! `−∇·(A∇u) + b·∇u + γu = f`) in first-order form with Raviart–Thomas or BDM
//! fluxes and discontinuous scalars, and measures the discrete inf-sup constant
//! in the norm `‖τ‖²_{A⁻¹} + ‖div τ‖² + ‖v‖²`.

pub mod analysis;
pub mod assembly;
pub mod coefficients;
pub mod dense;
pub mod error;
pub mod fe_spaces;
pub mod linalg;
pub mod mesh;

pub use error::{FemError, Result};
pub use fe_spaces::{FeSpace, Quadrature, SpaceKind};
pub use mesh::{Point, Triangulation};
