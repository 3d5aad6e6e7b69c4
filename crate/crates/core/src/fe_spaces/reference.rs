//! Shape functions on the reference triangle `(0,0), (1,0), (0,1)`.
//!
//! Flux elements are built as the dual basis of their degrees of freedom:
//! normal moments against shifted Legendre polynomials on each edge (edges
//! traversed counterclockwise, normal scaled by edge length) followed by
//! interior moments against the unit vectors (RT₁ only).

use super::poly::{Poly, VecPoly};
use super::quadrature::{gauss_legendre_unit, Quadrature};
use crate::error::{FemError, Result};
use crate::linalg::solve_small;
use crate::mesh::Point;

pub const REFERENCE_VERTICES: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FluxFamily {
    RaviartThomas,
    Bdm,
}

#[derive(Clone, Debug)]
pub struct ReferenceFlux {
    family: FluxFamily,
    degree: usize,
    shape: Vec<VecPoly>,
}

/// Shifted Legendre polynomial of degree `j` on `[0, 1]`.
pub fn legendre_unit(j: usize, s: f64) -> f64 {
    match j {
        0 => 1.0,
        1 => 2.0 * s - 1.0,
        _ => unreachable!("edge moments only up to degree one"),
    }
}

/// Start and end vertex of local edge `i` (opposite vertex `i`).
pub fn local_edge(i: usize) -> (usize, usize) {
    ((i + 1) % 3, (i + 2) % 3)
}

fn vec_x(p: Poly) -> VecPoly {
    VecPoly::new(p, Poly::zero())
}

fn vec_y(p: Poly) -> VecPoly {
    VecPoly::new(Poly::zero(), p)
}

fn full_linear() -> Vec<VecPoly> {
    [Poly::ONE, Poly::X, Poly::Y]
        .into_iter()
        .map(vec_x)
        .chain([Poly::ONE, Poly::X, Poly::Y].into_iter().map(vec_y))
        .collect()
}

/// Normal moment of `v` against the degree-`j` Legendre polynomial on local edge `i`.
pub fn edge_moment(v: &VecPoly, i: usize, j: usize) -> f64 {
    let (s, e) = local_edge(i);
    let (a, b) = (REFERENCE_VERTICES[s], REFERENCE_VERTICES[e]);
    let d = [b[0] - a[0], b[1] - a[1]];
    let scaled_normal = [d[1], -d[0]];
    gauss_legendre_unit()
        .iter()
        .map(|&(t, w)| {
            let val = v.eval([a[0] + t * d[0], a[1] + t * d[1]]);
            w * (val[0] * scaled_normal[0] + val[1] * scaled_normal[1]) * legendre_unit(j, t)
        })
        .sum()
}

impl ReferenceFlux {
    pub fn new(family: FluxFamily, degree: usize) -> Result<Self> {
        let primitives: Vec<VecPoly> = match (family, degree) {
            (FluxFamily::RaviartThomas, 0) => vec![
                vec_x(Poly::ONE),
                vec_y(Poly::ONE),
                VecPoly::new(Poly::X, Poly::Y),
            ],
            (FluxFamily::RaviartThomas, 1) => {
                let mut p = full_linear();
                let xx = Poly([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
                let xy = Poly([0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
                let yy = Poly([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
                p.push(VecPoly::new(xx, xy));
                p.push(VecPoly::new(xy, yy));
                p
            }
            (FluxFamily::Bdm, 1) => full_linear(),
            _ => {
                return Err(FemError::UnsupportedSpace(format!(
                    "{family:?} of degree {degree}"
                )))
            }
        };
        let n = primitives.len();
        let interior = if family == FluxFamily::RaviartThomas && degree == 1 { 2 } else { 0 };
        debug_assert_eq!(3 * (degree + 1) + interior, n);

        // dofs[d][p] = l_d(primitive_p)
        let quad = Quadrature::triangle_degree6();
        let mut dofs = Vec::with_capacity(n * n);
        for i in 0..3 {
            for j in 0..=degree {
                dofs.extend(primitives.iter().map(|p| edge_moment(p, i, j)));
            }
        }
        for c in 0..interior {
            dofs.extend(primitives.iter().map(|p| {
                quad.points()
                    .iter()
                    .zip(quad.weights())
                    .map(|(&x, w)| w * p.eval(x)[c])
                    .sum::<f64>()
            }));
        }

        // basis_i = sum_p coeff[p][i] primitive_p with l_d(basis_i) = delta_di
        let mut shape = Vec::with_capacity(n);
        for i in 0..n {
            let unit: Vec<f64> = (0..n).map(|d| if d == i { 1.0 } else { 0.0 }).collect();
            let coeff = solve_small(&dofs, n, &unit)
                .ok_or_else(|| FemError::UnsupportedSpace("dofs not unisolvent".into()))?;
            let f = primitives
                .iter()
                .zip(&coeff)
                .fold(VecPoly::default(), |acc, (p, &c)| acc.add(&p.scale(c)));
            shape.push(f);
        }
        Ok(Self { family, degree, shape })
    }

    pub fn family(&self) -> FluxFamily {
        self.family
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn dofs_per_edge(&self) -> usize {
        self.degree + 1
    }

    pub fn interior_dofs(&self) -> usize {
        self.dim() - 3 * self.dofs_per_edge()
    }

    pub fn shape(&self) -> &[VecPoly] {
        &self.shape
    }
}

/// Discontinuous P_k on the reference triangle, centered at the centroid.
#[derive(Clone, Debug)]
pub struct ReferenceScalar {
    degree: usize,
    shape: Vec<Poly>,
}

impl ReferenceScalar {
    pub fn new(degree: usize) -> Result<Self> {
        let third = 1.0 / 3.0;
        let shape = match degree {
            0 => vec![Poly::ONE],
            1 => vec![
                Poly::ONE,
                Poly([-third, 1.0, 0.0, 0.0, 0.0, 0.0]),
                Poly([-third, 0.0, 1.0, 0.0, 0.0, 0.0]),
            ],
            _ => {
                return Err(FemError::UnsupportedSpace(format!(
                    "discontinuous P{degree}"
                )))
            }
        };
        Ok(Self { degree, shape })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[Poly] {
        &self.shape
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_dimensions() {
        let rt0 = ReferenceFlux::new(FluxFamily::RaviartThomas, 0).unwrap();
        let rt1 = ReferenceFlux::new(FluxFamily::RaviartThomas, 1).unwrap();
        let bdm1 = ReferenceFlux::new(FluxFamily::Bdm, 1).unwrap();
        assert_eq!((rt0.dim(), rt1.dim(), bdm1.dim()), (3, 8, 6));
        assert_eq!((rt1.interior_dofs(), bdm1.interior_dofs()), (2, 0));
        assert!(ReferenceFlux::new(FluxFamily::Bdm, 0).is_err());
        assert!(ReferenceFlux::new(FluxFamily::RaviartThomas, 2).is_err());
        assert_eq!(ReferenceScalar::new(1).unwrap().dim(), 3);
        assert!(ReferenceScalar::new(2).is_err());
    }

    #[test]
    fn rt0_shape_functions_are_shifted_position_fields() {
        let rt0 = ReferenceFlux::new(FluxFamily::RaviartThomas, 0).unwrap();
        for (i, phi) in rt0.shape().iter().enumerate() {
            let p = REFERENCE_VERTICES[i];
            for x in [[0.2, 0.3], [0.7, 0.1], [0.0, 0.0]] {
                let v = phi.eval(x);
                assert!((v[0] - (x[0] - p[0])).abs() < 1e-14);
                assert!((v[1] - (x[1] - p[1])).abs() < 1e-14);
            }
            assert!((phi.div().eval([0.4, 0.4]) - 2.0).abs() < 1e-14);
            assert_eq!(phi.div().dx(), Poly::zero());
        }
    }

    #[test]
    fn shape_functions_are_dual_to_edge_moments() {
        for (family, degree) in [
            (FluxFamily::RaviartThomas, 0),
            (FluxFamily::RaviartThomas, 1),
            (FluxFamily::Bdm, 1),
        ] {
            let el = ReferenceFlux::new(family, degree).unwrap();
            for (b, phi) in el.shape().iter().enumerate() {
                for i in 0..3 {
                    for j in 0..=degree {
                        let d = i * (degree + 1) + j;
                        let expected = if d == b { 1.0 } else { 0.0 };
                        assert!((edge_moment(phi, i, j) - expected).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn rt1_divergence_is_linear() {
        let rt1 = ReferenceFlux::new(FluxFamily::RaviartThomas, 1).unwrap();
        for phi in rt1.shape() {
            let d = phi.div();
            assert!(d.0[3..].iter().all(|c| c.abs() < 1e-13));
        }
    }
}
