use std::sync::Arc;

use rayon::prelude::*;

use super::quadrature::Quadrature;
use super::space::{ElementTabulation, FeSpace};
use crate::dense::{solve_spd, LocalBlock, Matrix};
use crate::error::{FemError, Result};
use crate::linalg::{mat2_inverse, mat2_vec, solve_small, sym2_eigenvalues, Mat2};
use crate::mesh::{Point, Triangulation};

/// Elementwise L² projection onto a local polynomial space sampled at quadrature points.
#[derive(Clone, Debug)]
pub struct LocalProjector {
    weights: Vec<f64>,
    basis: Vec<Vec<f64>>,
    gram: Vec<f64>,
}

impl LocalProjector {
    /// `basis[l][q]` is local basis function `l` at quadrature point `q`.
    pub fn new(weights: Vec<f64>, basis: Vec<Vec<f64>>) -> Self {
        let n = basis.len();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                gram[i * n + j] = weights
                    .iter()
                    .enumerate()
                    .map(|(q, w)| w * basis[i][q] * basis[j][q])
                    .sum();
            }
        }
        Self {
            weights,
            basis,
            gram,
        }
    }

    pub fn from_tabulation(tab: &ElementTabulation) -> Self {
        Self::new(tab.weights.clone(), tab.scalar_values().to_vec())
    }

    /// Local P_k projector on element `t` using the discontinuous basis.
    pub fn on_element(mesh: &Arc<Triangulation>, t: usize, k: usize, quad: &Quadrature) -> Result<Self> {
        let space = FeSpace::discontinuous(mesh.clone(), k)?;
        Ok(Self::from_tabulation(&space.tabulate(t, quad)?))
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coefficients(&self, values: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = self
            .basis
            .iter()
            .map(|b| {
                self.weights
                    .iter()
                    .zip(b)
                    .zip(values)
                    .map(|((w, b), v)| w * b * v)
                    .sum()
            })
            .collect();
        solve_small(&self.gram, self.dim(), &rhs).expect("local mass matrix is nonsingular")
    }

    /// Values of the projection at the quadrature points.
    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        let c = self.coefficients(values);
        (0..self.weights.len())
            .map(|q| c.iter().zip(&self.basis).map(|(c, b)| c * b[q]).sum())
            .collect()
    }

    /// `f − Π f` at the quadrature points.
    pub fn complement(&self, values: &[f64]) -> Vec<f64> {
        self.project(values)
            .iter()
            .zip(values)
            .map(|(p, v)| v - p)
            .collect()
    }

    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Squared L² norm of a sampled vector field.
    pub fn l2_norm_sq_vector(&self, values: &[Point]) -> f64 {
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * (v[0] * v[0] + v[1] * v[1]))
            .sum()
    }

    /// Componentwise `τ − Π τ` for a sampled vector field.
    pub fn complement_vector(&self, values: &[Point]) -> Vec<Point> {
        let x: Vec<f64> = values.iter().map(|v| v[0]).collect();
        let y: Vec<f64> = values.iter().map(|v| v[1]).collect();
        let (cx, cy) = (self.complement(&x), self.complement(&y));
        cx.into_iter().zip(cy).map(|(a, b)| [a, b]).collect()
    }
}

/// Elementwise L² projection onto discontinuous P_k; coefficients follow the
/// numbering of the discontinuous P_k space on `mesh`.
pub fn l2_project_pk<F>(f: F, mesh: &Arc<Triangulation>, k: usize) -> Result<Vec<f64>>
where
    F: Fn(Point) -> f64 + Sync,
{
    let space = FeSpace::discontinuous(mesh.clone(), k)?;
    let quad = Quadrature::triangle_degree6();
    let local: Vec<Vec<f64>> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let tab = space.tabulate(t, &quad)?;
            let values: Vec<f64> = tab.points.iter().map(|&p| f(p)).collect();
            Ok(LocalProjector::from_tabulation(&tab).coefficients(&values))
        })
        .collect::<Result<_>>()?;
    Ok(local.concat())
}

/// Componentwise projection of a vector field onto discontinuous P_k.
pub fn l2_project_pk_vector<F>(f: F, mesh: &Arc<Triangulation>, k: usize) -> Result<[Vec<f64>; 2]>
where
    F: Fn(Point) -> Point + Sync,
{
    Ok([
        l2_project_pk(|p| f(p)[0], mesh, k)?,
        l2_project_pk(|p| f(p)[1], mesh, k)?,
    ])
}

/// Best approximation in the `A⁻¹`-weighted L² norm.
#[derive(Clone, Debug)]
pub struct BestFlux {
    pub coefficients: Vec<f64>,
    pub distance: f64,
}

pub(crate) fn checked_inverse(a: &Mat2, element: usize) -> Result<Mat2> {
    let asym = (a[0][1] - a[1][0]).abs();
    if asym > 1e-12 * a[0][0].abs().max(a[1][1].abs()).max(1.0) {
        return Err(FemError::Asymmetric {
            element,
            asymmetry: asym,
        });
    }
    let lo = sym2_eigenvalues(a)[0];
    if !(lo > 0.0) {
        return Err(FemError::NotPositiveDefinite {
            element,
            min_eigenvalue: lo,
        });
    }
    mat2_inverse(a).ok_or(FemError::NotPositiveDefinite {
        element,
        min_eigenvalue: lo,
    })
}

/// Minimizes `‖σ − τ_h‖_{A⁻¹}` over a flux space. `weight(t, x)` returns the
/// diffusion matrix on element `t` at `x`.
pub fn interpolate_best_flux<S, W>(sigma: S, space: &FeSpace, weight: W) -> Result<BestFlux>
where
    S: Fn(Point) -> Point + Sync,
    W: Fn(usize, Point) -> Mat2 + Sync,
{
    if !space.is_flux() {
        return Err(FemError::UnsupportedSpace(format!(
            "{} is not a flux space",
            space.label()
        )));
    }
    let mesh = space.mesh();
    let quad = Quadrature::triangle_degree6();
    let n = space.dof_count();
    let local: Vec<(LocalBlock, Vec<f64>)> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let tab = space.tabulate(t, &quad)?;
            let (phi, _) = tab.flux_values();
            let globals: Vec<usize> = tab.dofs.iter().map(|d| d.global).collect();
            let mut block = LocalBlock::zeros(globals.clone(), globals);
            let mut rhs = vec![0.0; phi.len()];
            for q in 0..tab.points.len() {
                let a_inv = checked_inverse(&weight(t, tab.points[q]), t)?;
                let w = tab.weights[q];
                let s = mat2_vec(&a_inv, sigma(tab.points[q]));
                for i in 0..phi.len() {
                    let ai = mat2_vec(&a_inv, phi[i][q]);
                    rhs[i] += w * (s[0] * phi[i][q][0] + s[1] * phi[i][q][1]);
                    for j in 0..phi.len() {
                        block.add(i, j, w * (ai[0] * phi[j][q][0] + ai[1] * phi[j][q][1]));
                    }
                }
            }
            Ok((block, rhs))
        })
        .collect::<Result<_>>()?;
    let mut gram = Matrix::zeros(n, n);
    let mut rhs = vec![0.0; n];
    for (block, r) in &local {
        block.scatter_into(&mut gram, 0, 0);
        for (i, &g) in block.rows.iter().enumerate() {
            rhs[g] += r[i];
        }
    }
    let coefficients = solve_spd(&gram, &rhs)?;
    let distance = weighted_flux_error(&sigma, space, &coefficients, &weight)?;
    Ok(BestFlux {
        coefficients,
        distance,
    })
}

/// `‖σ − σ_h‖_{A⁻¹}` by quadrature.
pub(crate) fn weighted_flux_error<S, W>(
    sigma: &S,
    space: &FeSpace,
    coeffs: &[f64],
    weight: &W,
) -> Result<f64>
where
    S: Fn(Point) -> Point + Sync,
    W: Fn(usize, Point) -> Mat2 + Sync,
{
    let quad = Quadrature::triangle_degree6();
    let parts: Vec<f64> = (0..space.mesh().num_triangles())
        .into_par_iter()
        .map(|t| {
            let tab = space.tabulate(t, &quad)?;
            let (vals, _) = space.eval_discrete(&tab, coeffs).flux();
            let mut s = 0.0;
            for q in 0..tab.points.len() {
                let a_inv = checked_inverse(&weight(t, tab.points[q]), t)?;
                let exact = sigma(tab.points[q]);
                let e = [exact[0] - vals[q][0], exact[1] - vals[q][1]];
                let ae = mat2_vec(&a_inv, e);
                s += tab.weights[q] * (e[0] * ae[0] + e[1] * ae[1]);
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum::<f64>().max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::IDENTITY2;
    use std::f64::consts::PI;

    fn reference_mesh() -> Arc<Triangulation> {
        Arc::new(
            Triangulation::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]])
                .unwrap(),
        )
    }

    #[test]
    fn mean_of_first_coordinate() {
        let c = l2_project_pk(|p| p[0], &reference_mesh(), 0).unwrap();
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constants_and_linears_are_fixed() {
        let mesh = Arc::new(Triangulation::structured(2).unwrap());
        let c = l2_project_pk(|_| 2.5, &mesh, 1).unwrap();
        for t in 0..mesh.num_triangles() {
            assert!((c[3 * t] - 2.5).abs() < 1e-13);
            assert!(c[3 * t + 1].abs() < 1e-13 && c[3 * t + 2].abs() < 1e-13);
        }
        let quad = Quadrature::triangle_degree6();
        let proj = LocalProjector::on_element(&mesh, 3, 1, &quad).unwrap();
        let space = FeSpace::discontinuous(mesh.clone(), 1).unwrap();
        let tab = space.tabulate(3, &quad).unwrap();
        let lin: Vec<f64> = tab.points.iter().map(|p| 1.0 + 2.0 * p[0] - p[1]).collect();
        let r = proj.complement(&lin);
        assert!(r.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn residual_is_orthogonal() {
        let mesh = Arc::new(Triangulation::structured(1).unwrap());
        let quad = Quadrature::triangle_degree6();
        let space = FeSpace::discontinuous(mesh.clone(), 1).unwrap();
        let f = |p: Point| (3.0 * p[0]).sin() * p[1].exp();
        for t in 0..mesh.num_triangles() {
            let tab = space.tabulate(t, &quad).unwrap();
            let proj = LocalProjector::from_tabulation(&tab);
            let vals: Vec<f64> = tab.points.iter().map(|&p| f(p)).collect();
            let res = proj.complement(&vals);
            for b in tab.scalar_values() {
                let ip: f64 = (0..quad.len()).map(|q| tab.weights[q] * res[q] * b[q]).sum();
                assert!(ip.abs() <= 1e-12 * proj.l2_norm(&vals) * proj.l2_norm(b));
            }
        }
    }

    #[test]
    fn best_flux_recovers_members_of_the_space() {
        let mesh = Arc::new(Triangulation::structured(2).unwrap());
        let space = FeSpace::raviart_thomas(mesh.clone(), 0).unwrap();
        // (1 + x, 2 + y) lies in RT0 globally
        let best = interpolate_best_flux(|p| [1.0 + p[0], 2.0 + p[1]], &space, |_, _| IDENTITY2)
            .unwrap();
        assert!(best.distance < 1e-12);
    }

    #[test]
    fn weight_scaling() {
        let mesh = Arc::new(Triangulation::structured(2).unwrap());
        let space = FeSpace::raviart_thomas(mesh, 0).unwrap();
        let sigma = |p: Point| [(PI * p[0]).cos(), p[0] * p[1]];
        let one = interpolate_best_flux(sigma, &space, |_, _| IDENTITY2).unwrap();
        let two = interpolate_best_flux(sigma, &space, |_, _| [[2.0, 0.0], [0.0, 2.0]]).unwrap();
        assert!((two.distance - one.distance / 2f64.sqrt()).abs() < 1e-13 * one.distance);
    }

    #[test]
    fn rt0_best_approximation_is_first_order() {
        let grad = |p: Point| {
            [
                PI * (PI * p[0]).cos() * (PI * p[1]).sin(),
                PI * (PI * p[0]).sin() * (PI * p[1]).cos(),
            ]
        };
        let d: Vec<f64> = [2, 4, 8]
            .iter()
            .map(|&m| {
                let mesh = Arc::new(Triangulation::structured(m).unwrap());
                let space = FeSpace::raviart_thomas(mesh, 0).unwrap();
                interpolate_best_flux(grad, &space, |_, _| IDENTITY2).unwrap().distance
            })
            .collect();
        let slope = (d[1] / d[2]).log2();
        assert!((slope - 1.0).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn indefinite_weight_is_rejected() {
        let mesh = Arc::new(Triangulation::structured(1).unwrap());
        let space = FeSpace::raviart_thomas(mesh, 0).unwrap();
        let r = interpolate_best_flux(|_| [1.0, 0.0], &space, |_, _| [[1.0, 2.0], [2.0, 1.0]]);
        assert!(matches!(r, Err(FemError::NotPositiveDefinite { .. })));
    }
}
