//! Reference elements, Piola-mapped global spaces, quadrature and elementwise projections.

mod poly;
mod projection;
mod quadrature;
mod reference;
mod space;

pub use poly::{Poly, VecPoly};
pub use projection::{
    interpolate_best_flux, l2_project_pk, l2_project_pk_vector, BestFlux, LocalProjector,
};
pub(crate) use projection::{checked_inverse, weighted_flux_error};
pub use quadrature::{gauss_legendre_unit, Quadrature};
pub use reference::{
    edge_moment, legendre_unit, local_edge, FluxFamily, ReferenceFlux, ReferenceScalar,
    REFERENCE_VERTICES,
};
pub use space::{
    BasisValues, DiscreteValues, ElementMap, ElementTabulation, FeSpace, LocalDof, SpaceKind,
};
