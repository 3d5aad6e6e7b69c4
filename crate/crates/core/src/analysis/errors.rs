use std::sync::Arc;

use rayon::prelude::*;

use crate::assembly::{AssembledSystem, ManufacturedProblem};
use crate::coefficients::CoefficientSet;
use crate::error::{FemError, Result};
use crate::fe_spaces::{interpolate_best_flux, weighted_flux_error, FeSpace, LocalProjector, Quadrature};
use crate::linalg::Mat2;
use crate::mesh::{Point, Triangulation};

/// Discretization errors, best approximation and oscillation terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    /// `‖σ − σ_h‖_{A⁻¹}`
    pub flux_error: f64,
    /// `‖u − u_h‖`
    pub scalar_error: f64,
    /// `min ‖σ − τ_h‖_{A⁻¹}` over the flux space
    pub best_flux: f64,
    /// `‖u − Π_k u‖`
    pub proj_error_u: f64,
    /// `‖h_T (1 − Π_k) div σ‖`
    pub osc_div: f64,
    /// `‖h_T (u − Π_k u)‖`
    pub osc_u: f64,
    pub h_max: f64,
}

#[derive(Default)]
struct ElementErrors {
    scalar: f64,
    proj_u: f64,
    osc_div: f64,
    osc_u: f64,
}

pub(crate) fn diffusion(coeffs: &CoefficientSet, mesh: Arc<Triangulation>) -> impl Fn(usize, Point) -> Mat2 + Sync + '_ {
    move |t, x| coeffs.a(&mesh, t, x)
}

/// Evaluates every functional of [`ErrorReport`] by elementwise quadrature.
/// `x_h` holds flux coefficients followed by scalar coefficients.
pub fn compute_errors(
    x_h: &[f64],
    exact: &ManufacturedProblem,
    sys: &AssembledSystem,
    coeffs: &CoefficientSet,
) -> Result<ErrorReport> {
    if x_h.len() != sys.dim() {
        return Err(FemError::InvalidArgument(format!(
            "coefficient vector has length {}, system has {} unknowns",
            x_h.len(),
            sys.dim()
        )));
    }
    let (flux, scalar) = (&sys.flux_space, &sys.scalar_space);
    let mesh = flux.mesh().clone();
    let (xf, xs) = x_h.split_at(sys.n_flux);
    let weight = diffusion(coeffs, mesh.clone());
    let sigma = |x: Point| (exact.sigma)(x);
    let flux_error = weighted_flux_error(&sigma, flux, xf, &weight)?;
    let best_flux = interpolate_best_flux(sigma, flux, &weight)?.distance;

    let quad = Quadrature::triangle_degree6();
    let parts: Vec<ElementErrors> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let tab = scalar.tabulate(t, &quad)?;
            let proj = LocalProjector::from_tabulation(&tab);
            let uh = scalar.eval_discrete(&tab, xs).scalar();
            let u: Vec<f64> = tab.points.iter().map(|&p| (exact.u)(p)).collect();
            let div: Vec<f64> = tab.points.iter().map(|&p| (exact.div_sigma)(p)).collect();
            let e: Vec<f64> = u.iter().zip(&uh).map(|(a, b)| a - b).collect();
            let h2 = mesh.diameter(t).powi(2);
            let pu = proj.l2_norm(&proj.complement(&u)).powi(2);
            Ok(ElementErrors {
                scalar: proj.l2_norm(&e).powi(2),
                proj_u: pu,
                osc_div: h2 * proj.l2_norm(&proj.complement(&div)).powi(2),
                osc_u: h2 * pu,
            })
        })
        .collect::<Result<_>>()?;
    let total = parts.iter().fold(ElementErrors::default(), |a, p| ElementErrors {
        scalar: a.scalar + p.scalar,
        proj_u: a.proj_u + p.proj_u,
        osc_div: a.osc_div + p.osc_div,
        osc_u: a.osc_u + p.osc_u,
    });
    Ok(ErrorReport {
        flux_error,
        scalar_error: total.scalar.sqrt(),
        best_flux,
        proj_error_u: total.proj_u.sqrt(),
        osc_div: total.osc_div.sqrt(),
        osc_u: total.osc_u.sqrt(),
        h_max: mesh.h_max(),
    })
}

/// `‖(1 − Π_k) div p‖ / ‖g‖` for `p = ∇φ`, `g = −Δφ + b·∇φ + γφ` and
/// `φ = sin(Kπx₁) sin(Kπx₂)`.
///
/// On a fixed mesh this tends to one as the frequency `K` grows: the
/// divergence of the flux is not approximated uniformly in the data.
pub fn divergence_approximation_gap(
    mesh: &Arc<Triangulation>,
    k: usize,
    frequency: usize,
    b: Point,
    gamma: f64,
) -> Result<f64> {
    use std::f64::consts::PI;
    let w = frequency as f64 * PI;
    let phi = move |x: Point| (w * x[0]).sin() * (w * x[1]).sin();
    let grad = move |x: Point| {
        [
            w * (w * x[0]).cos() * (w * x[1]).sin(),
            w * (w * x[0]).sin() * (w * x[1]).cos(),
        ]
    };
    let laplace = move |x: Point| -2.0 * w * w * phi(x);
    let g = move |x: Point| {
        let d = grad(x);
        -laplace(x) + b[0] * d[0] + b[1] * d[1] + gamma * phi(x)
    };
    // resolve the oscillation inside each element
    let levels = ((frequency as f64 * mesh.h_max()).log2().ceil().max(0.0) as usize + 2).min(6);
    let quad = Quadrature::composite(levels);
    let space = FeSpace::discontinuous(mesh.clone(), k)?;
    let (mut num, mut den) = (0.0, 0.0);
    for t in 0..mesh.num_triangles() {
        let tab = space.tabulate(t, &quad)?;
        let proj = LocalProjector::from_tabulation(&tab);
        let div: Vec<f64> = tab.points.iter().map(|&p| laplace(p)).collect();
        let gv: Vec<f64> = tab.points.iter().map(|&p| g(p)).collect();
        num += proj.l2_norm(&proj.complement(&div)).powi(2);
        den += proj.l2_norm(&gv).powi(2);
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::solve_mixed;
    use crate::assembly::{assemble_b, manufactured_problem, ExactScalar};
    use crate::coefficients::Formulation;

    /// Solves with the exact solution as Dirichlet data.
    fn run(m: usize, k: usize, u: &ExactScalar, c: &CoefficientSet) -> ErrorReport {
        let mesh = Arc::new(Triangulation::structured(m).unwrap());
        let f = FeSpace::raviart_thomas(mesh.clone(), k).unwrap();
        let s = FeSpace::discontinuous(mesh, k).unwrap();
        let p = manufactured_problem(u, c).unwrap();
        let sys = assemble_b(&f, &s, c)
            .unwrap()
            .with_load(|x| (p.f)(x))
            .unwrap()
            .with_boundary_values(|x| (p.u)(x))
            .unwrap();
        let x = solve_mixed(&sys).unwrap();
        compute_errors(&x, &p, &sys, c).unwrap()
    }

    #[test]
    fn exact_discrete_solution_has_no_error() {
        let mut c = CoefficientSet::laplace();
        c.gamma = crate::coefficients::Field::Constant(1.0);
        let r = run(2, 1, &ExactScalar::affine([1.0, -0.5, 2.0]), &c);
        for v in [r.flux_error, r.scalar_error, r.best_flux, r.proj_error_u, r.osc_div, r.osc_u] {
            assert!(v < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn best_flux_bounds_flux_error() {
        let c = CoefficientSet::indefinite(Formulation::Divergence);
        let r = run(4, 0, &ExactScalar::sin_sin(), &c);
        assert!(r.best_flux <= r.flux_error + 1e-12);
        assert!(r.osc_div > 0.0 && r.osc_u > 0.0);
    }

    #[test]
    fn constant_divergence_has_no_oscillation() {
        // u = x₁² + x₂² gives div σ = −4 for A = I, b = 0
        let u = ExactScalar::new(
            |x| x[0] * x[0] + x[1] * x[1],
            |x| [2.0 * x[0], 2.0 * x[1]],
            |_| [[2.0, 0.0], [0.0, 2.0]],
        );
        let r = run(2, 0, &u, &CoefficientSet::laplace());
        assert!(r.osc_div < 1e-13);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let mesh = Arc::new(Triangulation::structured(1).unwrap());
        let f = FeSpace::raviart_thomas(mesh.clone(), 0).unwrap();
        let s = FeSpace::discontinuous(mesh, 0).unwrap();
        let c = CoefficientSet::laplace();
        let sys = assemble_b(&f, &s, &c).unwrap();
        let p = manufactured_problem(&ExactScalar::sin_sin(), &c).unwrap();
        assert!(compute_errors(&[0.0; 3], &p, &sys, &c).is_err());
    }

    #[test]
    fn divergence_gap_grows_with_frequency() {
        let mesh = Arc::new(Triangulation::structured(1).unwrap());
        let low = divergence_approximation_gap(&mesh, 0, 1, [0.0, 0.0], 0.0).unwrap();
        let high = divergence_approximation_gap(&mesh, 0, 8, [0.0, 0.0], 0.0).unwrap();
        assert!(high > 0.9 && high > low, "{low} {high}");
    }
}
