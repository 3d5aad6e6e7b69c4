//! Fixtures shared by the benchmarks in `benches/`.

use std::sync::Arc;

use femlab::assembly::{assemble_b, AssembledSystem};
use femlab::coefficients::{CoefficientSet, Formulation};
use femlab::{FeSpace, Triangulation};

/// Flux and scalar spaces of degree `k` on the structured `m × m` mesh.
pub fn spaces(m: usize, k: usize) -> (FeSpace, FeSpace) {
    let mesh = Arc::new(Triangulation::structured(m).expect("m >= 1"));
    (
        FeSpace::raviart_thomas(mesh.clone(), k).expect("RT space"),
        FeSpace::discontinuous(mesh, k).expect("DG space"),
    )
}

/// Indefinite convection-reaction system in divergence form.
pub fn indefinite_system(m: usize, k: usize) -> AssembledSystem {
    let (flux, scalar) = spaces(m, k);
    assemble_b(&flux, &scalar, &CoefficientSet::indefinite(Formulation::Divergence)).expect("assembly")
}
