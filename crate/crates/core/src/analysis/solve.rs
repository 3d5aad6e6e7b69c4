use crate::assembly::AssembledSystem;
use crate::dense::LuSolver;
use crate::error::{FemError, Result};

/// Solution of `B x = rhs` with diagnostics.
#[derive(Clone, Debug)]
pub struct MixedSolution {
    pub x: Vec<f64>,
    pub backward_error: f64,
    pub condition_estimate: f64,
}

impl MixedSolution {
    pub fn flux<'a>(&'a self, sys: &AssembledSystem) -> &'a [f64] {
        &self.x[..sys.n_flux]
    }

    pub fn scalar<'a>(&'a self, sys: &AssembledSystem) -> &'a [f64] {
        &self.x[sys.n_flux..]
    }
}

/// Largest accepted normwise backward error.
pub const SOLVE_TOLERANCE: f64 = 1e-11;

/// Solves the discrete mixed problem by LU with partial pivoting and one step
/// of iterative refinement.
pub fn solve_mixed_detailed(sys: &AssembledSystem) -> Result<MixedSolution> {
    let lu = LuSolver::new(&sys.b)?;
    let (x, backward_error) = lu.solve(&sys.rhs);
    if !(backward_error <= SOLVE_TOLERANCE) {
        return Err(FemError::SingularSystem {
            condition: lu.condition_estimate,
        });
    }
    Ok(MixedSolution {
        x,
        backward_error,
        condition_estimate: lu.condition_estimate,
    })
}

pub fn solve_mixed(sys: &AssembledSystem) -> Result<Vec<f64>> {
    Ok(solve_mixed_detailed(sys)?.x)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::assembly::{assemble_b, ExactScalar, manufactured_problem};
    use crate::coefficients::{CoefficientSet, Field};
    use crate::fe_spaces::{l2_project_pk, FeSpace, Quadrature};
    use crate::mesh::Triangulation;

    fn system(m: usize, k: usize, c: &CoefficientSet) -> AssembledSystem {
        let mesh = Arc::new(Triangulation::structured(m).unwrap());
        let f = FeSpace::raviart_thomas(mesh.clone(), k).unwrap();
        let s = FeSpace::discontinuous(mesh, k).unwrap();
        assemble_b(&f, &s, c).unwrap()
    }

    #[test]
    fn zero_load_gives_zero_solution() {
        let sys = system(2, 0, &CoefficientSet::laplace());
        let x = solve_mixed(&sys).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn divergence_equals_projected_source() {
        for k in [0, 1] {
            let f = |p: [f64; 2]| (3.0 * p[0]).exp() * (2.0 * p[1]).cos();
            let sys = system(3, k, &CoefficientSet::laplace()).with_load(f).unwrap();
            let sol = solve_mixed_detailed(&sys).unwrap();
            assert!(sol.backward_error < 1e-11);
            let target = l2_project_pk(f, sys.flux_space.mesh(), k).unwrap();
            // P_k coefficients of div σ_h, which lies in P_k
            let quad = Quadrature::triangle_degree6();
            let mesh = sys.flux_space.mesh().clone();
            let mut actual = Vec::new();
            for t in 0..mesh.num_triangles() {
                let tab = sys.flux_space.tabulate(t, &quad).unwrap();
                let (_, div) = sys.flux_space.eval_discrete(&tab, sol.flux(&sys)).flux();
                let proj = crate::fe_spaces::LocalProjector::on_element(&mesh, t, k, &quad).unwrap();
                actual.extend(proj.coefficients(&div));
            }
            for (a, b) in actual.iter().zip(&target) {
                assert!((a - b).abs() < 1e-11, "k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn polynomial_solutions_are_reproduced() {
        // u affine and σ = −∇u constant lie in RT1 × P1; u ≠ 0 on the boundary
        let mut c = CoefficientSet::laplace();
        c.gamma = Field::Constant(2.0);
        let u = ExactScalar::affine([0.5, 1.0, -2.0]);
        let p = manufactured_problem(&u, &c).unwrap();
        let sys = system(2, 1, &c)
            .with_load(|x| (p.f)(x))
            .unwrap()
            .with_boundary_values(|x| (p.u)(x))
            .unwrap();
        let x = solve_mixed(&sys).unwrap();
        let exact = l2_project_pk(|x| (p.u)(x), sys.flux_space.mesh(), 1).unwrap();
        for (a, b) in x[sys.n_flux..].iter().zip(&exact) {
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn singular_system_is_reported() {
        let mut sys = system(1, 0, &CoefficientSet::laplace());
        let n = sys.dim();
        for j in 0..n {
            sys.b[(n - 1, j)] = 0.0;
        }
        assert!(matches!(solve_mixed(&sys), Err(FemError::SingularSystem { .. })));
    }
}
