use rayon::prelude::*;

use crate::coefficients::CoefficientSet;
use crate::dense::{LocalBlock, LuSolver, Matrix};
use crate::error::{FemError, Result};
use crate::fe_spaces::{interpolate_best_flux, weighted_flux_error, FeSpace, LocalProjector, Quadrature};
use crate::linalg::mat2_vec;
use crate::mesh::Point;

use super::errors::diffusion;

/// Flux approximation with prescribed projected divergence.
#[derive(Clone, Debug)]
pub struct ConstrainedProjection {
    pub coefficients: Vec<f64>,
    /// `‖p − p_h‖_{A⁻¹}`
    pub distance: f64,
    /// Largest coefficient difference between `div p_h` and `Π_k div p`.
    pub constraint_residual: f64,
    /// Unconstrained `min ‖p − q_h‖_{A⁻¹}`.
    pub best_distance: f64,
    /// `‖h_T (1 − Π_k) div p‖`
    pub oscillation: f64,
}

impl ConstrainedProjection {
    /// `‖p − p_h‖ / (dist(p, M_k) + ‖h_T (1 − Π_k) div p‖)`.
    pub fn ratio(&self) -> f64 {
        self.distance / (self.best_distance + self.oscillation)
    }
}

struct ElementPart {
    gram: LocalBlock,
    constraint: LocalBlock,
    load: Vec<f64>,
    div_load: Vec<f64>,
}

/// Minimizes `‖p − p_h‖_{A⁻¹}` over the flux space subject to
/// `div p_h = Π_k div p`, with `k` the degree of the flux space, by solving
/// the saddle-point (KKT) system of the constrained least-squares problem.
///
/// Fails with [`FemError::SingularConstraint`] when the divergence of the flux
/// space does not fill `P_k`.
pub fn constrained_flux_projection<P, D>(
    p: P,
    div_p: D,
    flux: &FeSpace,
    coeffs: &CoefficientSet,
) -> Result<ConstrainedProjection>
where
    P: Fn(Point) -> Point + Sync,
    D: Fn(Point) -> f64 + Sync,
{
    if !flux.is_flux() {
        return Err(FemError::UnsupportedSpace(format!("{} is not a flux space", flux.label())));
    }
    let mesh = flux.mesh().clone();
    coeffs.check_mesh(&mesh)?;
    let k = flux.degree();
    let scalar = FeSpace::discontinuous(mesh.clone(), k)?;
    let quad = Quadrature::triangle_degree6();
    let parts: Vec<ElementPart> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let tf = flux.tabulate(t, &quad)?;
            let ts = scalar.tabulate(t, &quad)?;
            let (phi, div) = tf.flux_values();
            let psi = ts.scalar_values();
            let fg: Vec<usize> = tf.dofs.iter().map(|d| d.global).collect();
            let sg: Vec<usize> = ts.dofs.iter().map(|d| d.global).collect();
            let mut gram = LocalBlock::zeros(fg.clone(), fg.clone());
            let mut constraint = LocalBlock::zeros(sg, fg);
            let mut load = vec![0.0; phi.len()];
            let mut div_load = vec![0.0; psi.len()];
            for (q, &x) in tf.points.iter().enumerate() {
                let w = tf.weights[q];
                let a_inv = coeffs.a_inverse(&mesh, t, x)?;
                let ap = mat2_vec(&a_inv, p(x));
                let dp = div_p(x);
                for i in 0..phi.len() {
                    let ai = mat2_vec(&a_inv, phi[i][q]);
                    load[i] += w * (ap[0] * phi[i][q][0] + ap[1] * phi[i][q][1]);
                    for j in 0..phi.len() {
                        gram.add(i, j, w * (ai[0] * phi[j][q][0] + ai[1] * phi[j][q][1]));
                    }
                }
                for (s, ps) in psi.iter().enumerate() {
                    div_load[s] += w * ps[q] * dp;
                    for j in 0..phi.len() {
                        constraint.add(s, j, w * ps[q] * div[j][q]);
                    }
                }
            }
            Ok(ElementPart {
                gram,
                constraint,
                load,
                div_load,
            })
        })
        .collect::<Result<_>>()?;

    let (nf, ns) = (flux.dof_count(), scalar.dof_count());
    let mut kkt = Matrix::zeros(nf + ns, nf + ns);
    let mut rhs = vec![0.0; nf + ns];
    let mut d = Matrix::zeros(ns, nf);
    for part in &parts {
        part.gram.scatter_into(&mut kkt, 0, 0);
        part.constraint.scatter_into(&mut kkt, nf, 0);
        part.constraint.scatter_into(&mut d, 0, 0);
        for (i, &g) in part.gram.rows.iter().enumerate() {
            rhs[g] += part.load[i];
        }
        for (s, &g) in part.constraint.rows.iter().enumerate() {
            rhs[nf + g] += part.div_load[s];
        }
    }
    for i in 0..ns {
        for j in 0..nf {
            kkt[(j, nf + i)] = kkt[(nf + i, j)];
        }
    }
    let sv = d.singular_values().map_err(|_| FemError::EigenSolve)?;
    let (smax, smin) = (sv[0], sv[sv.len() - 1]);
    if ns > nf || smin <= 1e-10 * smax {
        return Err(FemError::SingularConstraint(format!(
            "divergence of {} does not span discontinuous P{k} (smallest singular value {smin:e})",
            flux.label()
        )));
    }
    let (sol, _) = LuSolver::new(&kkt)?.solve(&rhs);
    let coefficients = sol[..nf].to_vec();

    // compare P_k coefficients of div p_h and Π_k div p element by element
    let residuals: Vec<f64> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let tf = flux.tabulate(t, &quad)?;
            let ts = scalar.tabulate(t, &quad)?;
            let proj = LocalProjector::from_tabulation(&ts);
            let (_, dh) = flux.eval_discrete(&tf, &coefficients).flux();
            let exact: Vec<f64> = tf.points.iter().map(|&x| div_p(x)).collect();
            let (a, b) = (proj.coefficients(&dh), proj.coefficients(&exact));
            Ok(a.iter().zip(&b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
        })
        .collect::<Result<_>>()?;
    let oscillation = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let ts = scalar.tabulate(t, &quad)?;
            let proj = LocalProjector::from_tabulation(&ts);
            let exact: Vec<f64> = ts.points.iter().map(|&x| div_p(x)).collect();
            Ok(mesh.diameter(t).powi(2) * proj.l2_norm(&proj.complement(&exact)).powi(2))
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>()
        .sqrt();

    let weight = diffusion(coeffs, mesh.clone());
    let distance = weighted_flux_error(&p, flux, &coefficients, &weight)?;
    let best_distance = interpolate_best_flux(&p, flux, &weight)?.distance;
    Ok(ConstrainedProjection {
        coefficients,
        distance,
        constraint_residual: residuals.iter().fold(0.0, |m: f64, r| m.max(*r)),
        best_distance,
        oscillation,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::mesh::Triangulation;

    fn rt(m: usize, k: usize) -> FeSpace {
        FeSpace::raviart_thomas(Arc::new(Triangulation::structured(m).unwrap()), k).unwrap()
    }

    #[test]
    fn members_of_the_space_are_fixed() {
        let c = CoefficientSet::laplace();
        let r = constrained_flux_projection(|x| [x[0] - 1.0, x[1] + 2.0], |_| 2.0, &rt(2, 0), &c).unwrap();
        assert!(r.distance < 1e-12 && r.constraint_residual < 1e-12);
    }

    #[test]
    fn smooth_gradient_satisfies_constraint() {
        let p = |x: Point| {
            [
                PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
            ]
        };
        let div = |x: Point| -2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin();
        let c = CoefficientSet::checkerboard(1.0, 10.0, 2);
        for k in [0, 1] {
            let r = constrained_flux_projection(p, div, &rt(4, k), &c).unwrap();
            assert!(r.constraint_residual < 1e-11, "{}", r.constraint_residual);
            assert!(r.distance >= r.best_distance - 1e-12);
            assert!(r.ratio() < 10.0);
        }
    }

    #[test]
    fn bdm_with_matching_scalar_degree_is_singular() {
        let mesh = Arc::new(Triangulation::structured(2).unwrap());
        let bdm = FeSpace::bdm(mesh, 1).unwrap();
        let r = constrained_flux_projection(|x| [x[0], 0.0], |_| 1.0, &bdm, &CoefficientSet::laplace());
        assert!(matches!(r, Err(FemError::SingularConstraint(_))));
    }
}
