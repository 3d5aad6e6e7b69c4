use std::sync::Arc;

use super::quadrature::Quadrature;
use super::reference::{FluxFamily, ReferenceFlux, ReferenceScalar};
use crate::error::{FemError, Result};
use crate::linalg::{mat2_vec, Mat2};
use crate::mesh::{Point, Triangulation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    RaviartThomas,
    Bdm,
    Discontinuous,
}

impl SpaceKind {
    pub fn is_flux(self) -> bool {
        !matches!(self, SpaceKind::Discontinuous)
    }
}

impl std::fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpaceKind::RaviartThomas => "RT",
            SpaceKind::Bdm => "BDM",
            SpaceKind::Discontinuous => "P",
        })
    }
}

/// Affine map `x = origin + J x̂` from the reference triangle onto an element.
#[derive(Clone, Copy, Debug)]
pub struct ElementMap {
    pub origin: Point,
    pub jacobian: Mat2,
    pub det: f64,
}

impl ElementMap {
    pub fn new(mesh: &Triangulation, t: usize) -> Result<Self> {
        if t >= mesh.num_triangles() {
            return Err(FemError::ElementOutOfRange {
                index: t,
                count: mesh.num_triangles(),
            });
        }
        let [a, b, c] = mesh.triangle_vertices(t);
        let jacobian = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
        if !(det > 0.0) || !det.is_finite() {
            return Err(FemError::DegenerateElement {
                element: t,
                area: 0.5 * det,
            });
        }
        Ok(Self {
            origin: a,
            jacobian,
            det,
        })
    }

    pub fn map(&self, xhat: Point) -> Point {
        let v = mat2_vec(&self.jacobian, xhat);
        [self.origin[0] + v[0], self.origin[1] + v[1]]
    }

    pub fn inverse_map(&self, x: Point) -> Point {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let j = &self.jacobian;
        [
            (j[1][1] * d[0] - j[0][1] * d[1]) / self.det,
            (-j[1][0] * d[0] + j[0][0] * d[1]) / self.det,
        ]
    }

    /// Contravariant Piola transform of a reference vector.
    pub fn piola(&self, vhat: Point) -> Point {
        let v = mat2_vec(&self.jacobian, vhat);
        [v[0] / self.det, v[1] / self.det]
    }
}

/// Global index of a local shape function and the sign relating the two.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalDof {
    pub global: usize,
    pub sign: f64,
}

#[derive(Clone, Debug)]
enum Reference {
    Flux(ReferenceFlux),
    Scalar(ReferenceScalar),
}

/// Physical values of the global basis functions restricted to one element.
/// Indexing is `[local dof][point]`; signs are already applied.
#[derive(Clone, Debug)]
pub enum BasisValues {
    Flux {
        values: Vec<Vec<Point>>,
        divergence: Vec<Vec<f64>>,
    },
    Scalar {
        values: Vec<Vec<f64>>,
    },
}

/// Element quadrature in physical coordinates together with basis values.
#[derive(Clone, Debug)]
pub struct ElementTabulation {
    pub element: usize,
    pub points: Vec<Point>,
    /// Reference weights times `det J`.
    pub weights: Vec<f64>,
    pub dofs: Vec<LocalDof>,
    pub basis: BasisValues,
}

impl ElementTabulation {
    pub fn flux_values(&self) -> (&[Vec<Point>], &[Vec<f64>]) {
        match &self.basis {
            BasisValues::Flux { values, divergence } => (values, divergence),
            BasisValues::Scalar { .. } => panic!("scalar tabulation has no flux values"),
        }
    }

    pub fn scalar_values(&self) -> &[Vec<f64>] {
        match &self.basis {
            BasisValues::Scalar { values } => values,
            BasisValues::Flux { .. } => panic!("flux tabulation has no scalar values"),
        }
    }
}

/// RT_k, BDM_k or discontinuous P_k over a triangulation.
#[derive(Clone, Debug)]
pub struct FeSpace {
    kind: SpaceKind,
    degree: usize,
    mesh: Arc<Triangulation>,
    reference: Reference,
    dof_maps: Vec<Vec<LocalDof>>,
    dof_count: usize,
}

impl FeSpace {
    pub fn new(mesh: Arc<Triangulation>, kind: SpaceKind, degree: usize) -> Result<Self> {
        match kind {
            SpaceKind::Discontinuous => {
                let reference = ReferenceScalar::new(degree)?;
                let n = reference.dim();
                let dof_maps = (0..mesh.num_triangles())
                    .map(|t| {
                        (0..n)
                            .map(|l| LocalDof {
                                global: t * n + l,
                                sign: 1.0,
                            })
                            .collect()
                    })
                    .collect();
                Ok(Self {
                    kind,
                    degree,
                    dof_count: n * mesh.num_triangles(),
                    mesh,
                    reference: Reference::Scalar(reference),
                    dof_maps,
                })
            }
            SpaceKind::RaviartThomas | SpaceKind::Bdm => {
                let family = if kind == SpaceKind::Bdm {
                    FluxFamily::Bdm
                } else {
                    FluxFamily::RaviartThomas
                };
                let reference = ReferenceFlux::new(family, degree)?;
                let per_edge = reference.dofs_per_edge();
                let interior = reference.interior_dofs();
                let edge_block = per_edge * mesh.num_edges();
                let dof_maps = (0..mesh.num_triangles())
                    .map(|t| {
                        let tri = mesh.triangles()[t];
                        let edges = mesh.triangle_edges(t);
                        let mut dofs = Vec::with_capacity(reference.dim());
                        for i in 0..3 {
                            let along = if tri[(i + 1) % 3] < tri[(i + 2) % 3] { 1.0 } else { -1.0 };
                            let normal = mesh.edge_sign(t, i);
                            for j in 0..per_edge {
                                dofs.push(LocalDof {
                                    global: edges[i] * per_edge + j,
                                    // odd Legendre moments flip with the edge direction
                                    sign: normal * if j % 2 == 1 { along } else { 1.0 },
                                });
                            }
                        }
                        for l in 0..interior {
                            dofs.push(LocalDof {
                                global: edge_block + t * interior + l,
                                sign: 1.0,
                            });
                        }
                        dofs
                    })
                    .collect();
                Ok(Self {
                    kind,
                    degree,
                    dof_count: edge_block + interior * mesh.num_triangles(),
                    mesh,
                    reference: Reference::Flux(reference),
                    dof_maps,
                })
            }
        }
    }

    pub fn raviart_thomas(mesh: Arc<Triangulation>, degree: usize) -> Result<Self> {
        Self::new(mesh, SpaceKind::RaviartThomas, degree)
    }

    pub fn bdm(mesh: Arc<Triangulation>, degree: usize) -> Result<Self> {
        Self::new(mesh, SpaceKind::Bdm, degree)
    }

    pub fn discontinuous(mesh: Arc<Triangulation>, degree: usize) -> Result<Self> {
        Self::new(mesh, SpaceKind::Discontinuous, degree)
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn mesh(&self) -> &Arc<Triangulation> {
        &self.mesh
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    pub fn local_dim(&self) -> usize {
        match &self.reference {
            Reference::Flux(r) => r.dim(),
            Reference::Scalar(r) => r.dim(),
        }
    }

    pub fn element_dofs(&self, t: usize) -> &[LocalDof] {
        &self.dof_maps[t]
    }

    pub fn is_flux(&self) -> bool {
        self.kind.is_flux()
    }

    pub fn label(&self) -> String {
        format!("{}{}", self.kind, self.degree)
    }

    /// Evaluates the global basis functions supported on element `t` at the
    /// given reference points, mapped to physical coordinates.
    pub fn evaluate_basis(&self, t: usize, ref_points: &[Point]) -> Result<BasisValues> {
        let map = ElementMap::new(&self.mesh, t)?;
        if let Some(p) = ref_points
            .iter()
            .find(|p| p[0] < -1e-12 || p[1] < -1e-12 || p[0] + p[1] > 1.0 + 1e-12)
        {
            return Err(FemError::InvalidArgument(format!(
                "point {p:?} lies outside the reference triangle"
            )));
        }
        Ok(self.evaluate_mapped(&map, t, ref_points))
    }

    fn evaluate_mapped(&self, map: &ElementMap, t: usize, ref_points: &[Point]) -> BasisValues {
        let dofs = &self.dof_maps[t];
        match &self.reference {
            Reference::Flux(r) => {
                let mut values = Vec::with_capacity(r.dim());
                let mut divergence = Vec::with_capacity(r.dim());
                for (phi, dof) in r.shape().iter().zip(dofs) {
                    let div = phi.div();
                    values.push(
                        ref_points
                            .iter()
                            .map(|&p| {
                                let v = map.piola(phi.eval(p));
                                [dof.sign * v[0], dof.sign * v[1]]
                            })
                            .collect(),
                    );
                    divergence.push(
                        ref_points
                            .iter()
                            .map(|&p| dof.sign * div.eval(p) / map.det)
                            .collect(),
                    );
                }
                BasisValues::Flux { values, divergence }
            }
            Reference::Scalar(r) => BasisValues::Scalar {
                values: r
                    .shape()
                    .iter()
                    .map(|psi| ref_points.iter().map(|&p| psi.eval(p)).collect())
                    .collect(),
            },
        }
    }

    /// Basis values at the physical images of a reference quadrature rule.
    pub fn tabulate(&self, t: usize, quad: &Quadrature) -> Result<ElementTabulation> {
        let map = ElementMap::new(&self.mesh, t)?;
        Ok(ElementTabulation {
            element: t,
            points: quad.points().iter().map(|&p| map.map(p)).collect(),
            weights: quad.weights().iter().map(|w| w * map.det).collect(),
            dofs: self.dof_maps[t].clone(),
            basis: self.evaluate_mapped(&map, t, quad.points()),
        })
    }

    /// Values (and divergences, for flux spaces) of the discrete function with
    /// global coefficients `coeffs` at the points of a tabulation.
    pub fn eval_discrete(&self, tab: &ElementTabulation, coeffs: &[f64]) -> DiscreteValues {
        let nq = tab.points.len();
        match &tab.basis {
            BasisValues::Flux { values, divergence } => {
                let mut v = vec![[0.0; 2]; nq];
                let mut d = vec![0.0; nq];
                for (i, dof) in tab.dofs.iter().enumerate() {
                    let c = coeffs[dof.global];
                    for q in 0..nq {
                        v[q][0] += c * values[i][q][0];
                        v[q][1] += c * values[i][q][1];
                        d[q] += c * divergence[i][q];
                    }
                }
                DiscreteValues::Flux {
                    values: v,
                    divergence: d,
                }
            }
            BasisValues::Scalar { values } => {
                let mut v = vec![0.0; nq];
                for (i, dof) in tab.dofs.iter().enumerate() {
                    let c = coeffs[dof.global];
                    for q in 0..nq {
                        v[q] += c * values[i][q];
                    }
                }
                DiscreteValues::Scalar { values: v }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum DiscreteValues {
    Flux { values: Vec<Point>, divergence: Vec<f64> },
    Scalar { values: Vec<f64> },
}

impl DiscreteValues {
    pub fn flux(self) -> (Vec<Point>, Vec<f64>) {
        match self {
            DiscreteValues::Flux { values, divergence } => (values, divergence),
            DiscreteValues::Scalar { .. } => panic!("not a flux function"),
        }
    }

    pub fn scalar(self) -> Vec<f64> {
        match self {
            DiscreteValues::Scalar { values } => values,
            DiscreteValues::Flux { .. } => panic!("not a scalar function"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::quadrature::gauss_legendre_unit;
    use super::super::reference::legendre_unit;
    use super::*;

    fn spaces(mesh: &Arc<Triangulation>) -> Vec<FeSpace> {
        vec![
            FeSpace::raviart_thomas(mesh.clone(), 0).unwrap(),
            FeSpace::raviart_thomas(mesh.clone(), 1).unwrap(),
            FeSpace::bdm(mesh.clone(), 1).unwrap(),
        ]
    }

    #[test]
    fn dof_counts() {
        let mesh = Arc::new(Triangulation::structured(2).unwrap());
        let (ne, nt) = (mesh.num_edges(), mesh.num_triangles());
        let s = spaces(&mesh);
        assert_eq!(s[0].dof_count(), ne);
        assert_eq!(s[1].dof_count(), 2 * ne + 2 * nt);
        assert_eq!(s[2].dof_count(), 2 * ne);
        assert_eq!(FeSpace::discontinuous(mesh.clone(), 1).unwrap().dof_count(), 3 * nt);
        assert!(FeSpace::bdm(mesh, 0).is_err());
    }

    /// Physical normal moment of a global basis function on edge `e`, seen from element `t`.
    fn physical_edge_moment(space: &FeSpace, t: usize, local: usize, e: usize, j: usize) -> f64 {
        let mesh = space.mesh();
        let i = mesh.triangle_edges(t).iter().position(|&x| x == e).unwrap();
        let [lo, hi] = mesh.edges()[e];
        let (a, b) = (mesh.vertices()[lo], mesh.vertices()[hi]);
        let map = ElementMap::new(mesh, t).unwrap();
        let n = mesh.edge_normal(e);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let _ = i;
        gauss_legendre_unit()
            .iter()
            .map(|&(s, w)| {
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let xhat = map.inverse_map(x);
                let BasisValues::Flux { values, .. } = space.evaluate_mapped(&map, t, &[xhat]) else {
                    unreachable!()
                };
                let v = values[local][0];
                w * len * (v[0] * n[0] + v[1] * n[1]) * legendre_unit(j, s)
            })
            .sum()
    }

    #[test]
    fn global_basis_is_dual_to_global_edge_moments() {
        let mesh = Arc::new(Triangulation::structured(2).unwrap().refine_uniform());
        for space in spaces(&mesh) {
            let per_edge = space.degree() + 1;
            for t in [0, 5, 17, 31] {
                for (local, dof) in space.element_dofs(t).iter().enumerate() {
                    for e in mesh.triangle_edges(t) {
                        for j in 0..per_edge {
                            let m = physical_edge_moment(&space, t, local, e, j);
                            let expected = if dof.global == e * per_edge + j { 1.0 } else { 0.0 };
                            assert!((m - expected).abs() < 1e-12, "{} t={t} e={e}", space.label());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn normal_traces_agree_across_interior_edges() {
        let mesh = Arc::new(Triangulation::structured(3).unwrap());
        for space in spaces(&mesh) {
            for e in 0..mesh.num_edges() {
                let (t0, Some(t1)) = mesh.edge_triangles(e) else { continue };
                let [lo, hi] = mesh.edges()[e];
                let (a, b) = (mesh.vertices()[lo], mesh.vertices()[hi]);
                let n = mesh.edge_normal(e);
                for &(s, _) in &gauss_legendre_unit() {
                    let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                    let trace = |t: usize| -> Vec<(usize, f64)> {
                        let map = ElementMap::new(&mesh, t).unwrap();
                        let BasisValues::Flux { values, .. } =
                            space.evaluate_mapped(&map, t, &[map.inverse_map(x)])
                        else {
                            unreachable!()
                        };
                        space
                            .element_dofs(t)
                            .iter()
                            .zip(values)
                            .map(|(d, v)| (d.global, v[0][0] * n[0] + v[0][1] * n[1]))
                            .collect()
                    };
                    let (left, right) = (trace(t0), trace(t1));
                    let mut globals: Vec<usize> =
                        left.iter().chain(&right).map(|(g, _)| *g).collect();
                    globals.sort_unstable();
                    globals.dedup();
                    for g in globals {
                        let l = left.iter().find(|(x, _)| *x == g).map_or(0.0, |v| v.1);
                        let r = right.iter().find(|(x, _)| *x == g).map_or(0.0, |v| v.1);
                        assert!((l - r).abs() < 1e-12, "{} edge {e} dof {g}", space.label());
                    }
                }
            }
        }
    }

    #[test]
    fn rt0_signed_fluxes_cancel_on_interior_edges() {
        let mesh = Arc::new(Triangulation::structured(2).unwrap());
        let space = FeSpace::raviart_thomas(mesh.clone(), 0).unwrap();
        for e in 0..mesh.num_edges() {
            let (t0, Some(t1)) = mesh.edge_triangles(e) else { continue };
            // outward flux through e of the global basis function, seen from each side
            let outward = |t: usize| {
                let i = mesh.triangle_edges(t).iter().position(|&x| x == e).unwrap();
                space.element_dofs(t)[i].sign
            };
            assert_eq!(outward(t0) + outward(t1), 0.0);
        }
    }

    #[test]
    fn divergence_matches_divergence_theorem() {
        // integral of div over the element equals the total outward flux
        let mesh = Arc::new(Triangulation::structured(2).unwrap());
        let space = FeSpace::raviart_thomas(mesh.clone(), 0).unwrap();
        let quad = Quadrature::triangle_degree6();
        for t in 0..mesh.num_triangles() {
            let tab = space.tabulate(t, &quad).unwrap();
            let (_, div) = tab.flux_values();
            for (i, d) in div.iter().enumerate() {
                let integral: f64 = d.iter().zip(&tab.weights).map(|(d, w)| d * w).sum();
                assert!((integral - tab.dofs[i].sign).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn dg_p0_is_indicator() {
        let mesh = Arc::new(Triangulation::structured(2).unwrap());
        let space = FeSpace::discontinuous(mesh, 0).unwrap();
        let quad = Quadrature::triangle_degree6();
        let BasisValues::Scalar { values } = space.evaluate_basis(3, quad.points()).unwrap() else {
            panic!()
        };
        assert_eq!(values.len(), 1);
        assert!(values[0].iter().all(|&v| v == 1.0));
        assert!(space.evaluate_basis(3, &[[1.5, 0.2]]).is_err());
        assert!(space.evaluate_basis(99, &[[0.2, 0.2]]).is_err());
    }

    #[test]
    fn piola_preserves_edge_moments_on_a_skewed_element() {
        let mesh = Arc::new(
            Triangulation::from_parts(vec![[0.1, 0.2], [1.3, 0.5], [0.4, 1.1]], vec![[0, 1, 2]])
                .unwrap(),
        );
        for space in spaces(&mesh) {
            let per_edge = space.degree() + 1;
            for (local, dof) in space.element_dofs(0).iter().enumerate() {
                for e in 0..3 {
                    for j in 0..per_edge {
                        let m = physical_edge_moment(&space, 0, local, e, j);
                        let expected = if dof.global == e * per_edge + j { 1.0 } else { 0.0 };
                        assert!((m - expected).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
