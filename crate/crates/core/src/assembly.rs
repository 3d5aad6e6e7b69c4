//! Dense assembly of the mixed bilinear form, the Gram matrices of the
//! `H(div) × L²` norm and load vectors.
//!
//! Unknowns are ordered flux first, then scalar. Row `i` of `B` belongs to
//! test function `i`, column `j` to trial function `j`:
//!
//! ```text
//! b((σ,u),(τ,v)) = (A⁻¹σ,τ) − (u, div τ) + (v, div σ) + (u, b₁·τ) − (v, b₂·σ) + (γu, v)
//! ```

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::coefficients::{CoefficientSet, Field, FormulationKind};
use crate::dense::{cholesky_lower, to_matrix_market, LocalBlock, Matrix};
use crate::error::{FemError, Result};
use crate::fe_spaces::{gauss_legendre_unit, BasisValues, ElementMap, FeSpace, Quadrature};
use crate::linalg::{mat2_vec, Mat2};
use crate::mesh::Point;

/// Global matrices of one discretization.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    /// `B[i][j] = b(φ_j, φ_i)`.
    pub b: Matrix,
    /// Gram matrix of `‖τ‖²_{A⁻¹} + ‖div τ‖² + ‖v‖²`.
    pub m_h: Matrix,
    /// Gram matrix of `‖τ‖²_{A⁻¹} + ‖v‖²`.
    pub m_l: Matrix,
    pub rhs: Vec<f64>,
    pub n_flux: usize,
    pub n_scalar: usize,
    pub h_max: f64,
    pub formulation: FormulationKind,
    pub flux_space: FeSpace,
    pub scalar_space: FeSpace,
}

impl AssembledSystem {
    pub fn dim(&self) -> usize {
        self.n_flux + self.n_scalar
    }

    pub fn block_sizes(&self) -> (usize, usize) {
        (self.n_flux, self.n_scalar)
    }

    /// Replaces the load vector by `(f, v_i)` on the scalar block.
    pub fn set_load<F>(&mut self, f: F) -> Result<()>
    where
        F: Fn(Point) -> f64 + Sync,
    {
        let load = assemble_rhs(&self.scalar_space, f)?;
        self.rhs = vec![0.0; self.n_flux];
        self.rhs.extend(load);
        Ok(())
    }

    pub fn with_load<F>(mut self, f: F) -> Result<Self>
    where
        F: Fn(Point) -> f64 + Sync,
    {
        self.set_load(f)?;
        Ok(self)
    }

    /// Adds the boundary term `−⟨g, τ·n⟩` of a nonzero Dirichlet value `u = g`
    /// to the flux block of the load vector.
    pub fn add_boundary_values<G>(&mut self, g: G) -> Result<()>
    where
        G: Fn(Point) -> f64 + Sync,
    {
        let load = assemble_boundary_load(&self.flux_space, g)?;
        for (r, l) in self.rhs.iter_mut().zip(load) {
            *r += l;
        }
        Ok(())
    }

    pub fn with_boundary_values<G>(mut self, g: G) -> Result<Self>
    where
        G: Fn(Point) -> f64 + Sync,
    {
        self.add_boundary_values(g)?;
        Ok(self)
    }

    /// Spectral condition number of `M_H`.
    pub fn gram_condition(&self) -> Result<f64> {
        cholesky_lower(&self.m_h)?;
        let ev = self
            .m_h
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|_| FemError::EigenSolve)?;
        Ok(ev[ev.len() - 1] / ev[0])
    }

    /// Writes `B.mtx`, `MH.mtx`, `ML.mtx` and `rhs.mtx` into `dir`.
    pub fn export_matrix_market(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("B.mtx"), to_matrix_market(&self.b))?;
        std::fs::write(dir.join("MH.mtx"), to_matrix_market(&self.m_h))?;
        std::fs::write(dir.join("ML.mtx"), to_matrix_market(&self.m_l))?;
        let rhs = Matrix::from_fn(self.rhs.len(), 1, |i, _| self.rhs[i]);
        std::fs::write(dir.join("rhs.mtx"), to_matrix_market(&rhs))?;
        Ok(())
    }
}

struct ElementMatrices {
    flux_flux: LocalBlock,
    div_div: LocalBlock,
    /// flux test rows, scalar trial columns
    flux_scalar: LocalBlock,
    /// scalar test rows, flux trial columns
    scalar_flux: LocalBlock,
    reaction: LocalBlock,
    scalar_mass: LocalBlock,
}

fn element_matrices(
    flux: &FeSpace,
    scalar: &FeSpace,
    coeffs: &CoefficientSet,
    quad: &Quadrature,
    t: usize,
) -> Result<ElementMatrices> {
    let mesh = flux.mesh();
    let tf = flux.tabulate(t, quad)?;
    let ts = scalar.tabulate(t, quad)?;
    let (phi, div) = tf.flux_values();
    let psi = ts.scalar_values();
    let fg: Vec<usize> = tf.dofs.iter().map(|d| d.global).collect();
    let sg: Vec<usize> = ts.dofs.iter().map(|d| d.global).collect();
    let (nf, ns) = (fg.len(), sg.len());

    let mut ff = LocalBlock::zeros(fg.clone(), fg.clone());
    let mut dd = LocalBlock::zeros(fg.clone(), fg.clone());
    let mut fs = LocalBlock::zeros(fg.clone(), sg.clone());
    let mut sf = LocalBlock::zeros(sg.clone(), fg.clone());
    let mut rr = LocalBlock::zeros(sg.clone(), sg.clone());
    let mut mm = LocalBlock::zeros(sg.clone(), sg);

    for (q, &x) in tf.points.iter().enumerate() {
        let w = tf.weights[q];
        let a_inv = coeffs.a_inverse(mesh, t, x)?;
        let b1 = coeffs.b1(mesh, t, x)?;
        let b2 = coeffs.b2(mesh, t, x)?;
        let gamma = coeffs.gamma(mesh, t, x);
        let a_phi: Vec<Point> = (0..nf).map(|j| mat2_vec(&a_inv, phi[j][q])).collect();
        for i in 0..nf {
            for j in i..nf {
                let m = w * (phi[i][q][0] * a_phi[j][0] + phi[i][q][1] * a_phi[j][1]);
                let d = w * div[i][q] * div[j][q];
                ff.add(i, j, m);
                dd.add(i, j, d);
                if i != j {
                    ff.add(j, i, m);
                    dd.add(j, i, d);
                }
            }
        }
        for (s, psi_s) in psi.iter().enumerate() {
            let wp = w * psi_s[q];
            for f in 0..nf {
                let c = wp * div[f][q];
                let v = phi[f][q];
                // identical expressions for both couplings keep the
                // conservative/divergence transposition exact
                let e1 = wp * (b1[0] * v[0] + b1[1] * v[1]);
                let e2 = wp * (b2[0] * v[0] + b2[1] * v[1]);
                fs.add(f, s, -(c - e1));
                sf.add(s, f, c - e2);
            }
            for r in s..ns {
                let m = wp * psi[r][q];
                let g = gamma * m;
                mm.add(s, r, m);
                rr.add(s, r, g);
                if r != s {
                    mm.add(r, s, m);
                    rr.add(r, s, g);
                }
            }
        }
    }
    Ok(ElementMatrices {
        flux_flux: ff,
        div_div: dd,
        flux_scalar: fs,
        scalar_flux: sf,
        reaction: rr,
        scalar_mass: mm,
    })
}

fn check_pair(flux: &FeSpace, scalar: &FeSpace) -> Result<()> {
    if !flux.is_flux() || scalar.is_flux() {
        return Err(FemError::UnsupportedSpace(format!(
            "expected a flux space and a discontinuous space, got {} and {}",
            flux.label(),
            scalar.label()
        )));
    }
    if !Arc::ptr_eq(flux.mesh(), scalar.mesh()) && **flux.mesh() != **scalar.mesh() {
        return Err(FemError::SpaceMismatch);
    }
    Ok(())
}

/// Assembles `B`, `M_H` and `M_L` by elementwise quadrature; the load vector is zero.
///
/// Element contributions are computed in parallel and summed in element
/// order, so the result does not depend on the number of workers.
pub fn assemble_b(flux: &FeSpace, scalar: &FeSpace, coeffs: &CoefficientSet) -> Result<AssembledSystem> {
    check_pair(flux, scalar)?;
    let mesh = flux.mesh();
    coeffs.check_mesh(mesh)?;
    let quad = Quadrature::triangle_degree6();
    let locals: Vec<ElementMatrices> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| element_matrices(flux, scalar, coeffs, &quad, t))
        .collect::<Result<_>>()?;

    let (nf, ns) = (flux.dof_count(), scalar.dof_count());
    let n = nf + ns;
    let mut b = Matrix::zeros(n, n);
    let mut m_h = Matrix::zeros(n, n);
    let mut m_l = Matrix::zeros(n, n);
    for e in &locals {
        e.flux_flux.scatter_into(&mut b, 0, 0);
        e.flux_scalar.scatter_into(&mut b, 0, nf);
        e.scalar_flux.scatter_into(&mut b, nf, 0);
        e.reaction.scatter_into(&mut b, nf, nf);

        e.flux_flux.scatter_into(&mut m_l, 0, 0);
        e.scalar_mass.scatter_into(&mut m_l, nf, nf);

        e.flux_flux.scatter_into(&mut m_h, 0, 0);
        e.div_div.scatter_into(&mut m_h, 0, 0);
        e.scalar_mass.scatter_into(&mut m_h, nf, nf);
    }
    Ok(AssembledSystem {
        b,
        m_h,
        m_l,
        rhs: vec![0.0; n],
        n_flux: nf,
        n_scalar: ns,
        h_max: mesh.h_max(),
        formulation: coeffs.formulation_kind(),
        flux_space: flux.clone(),
        scalar_space: scalar.clone(),
    })
}

/// Load vector `(f, v_i)` over a discontinuous space.
pub fn assemble_rhs<F>(scalar: &FeSpace, f: F) -> Result<Vec<f64>>
where
    F: Fn(Point) -> f64 + Sync,
{
    if scalar.is_flux() {
        return Err(FemError::UnsupportedSpace(format!(
            "{} is not a discontinuous space",
            scalar.label()
        )));
    }
    let quad = Quadrature::triangle_degree6();
    let locals: Vec<(Vec<usize>, Vec<f64>)> = (0..scalar.mesh().num_triangles())
        .into_par_iter()
        .map(|t| {
            let tab = scalar.tabulate(t, &quad)?;
            let fx: Vec<f64> = tab.points.iter().map(|&p| f(p)).collect();
            let values = tab
                .scalar_values()
                .iter()
                .map(|psi| (0..fx.len()).map(|q| tab.weights[q] * fx[q] * psi[q]).sum())
                .collect();
            Ok((tab.dofs.iter().map(|d| d.global).collect(), values))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; scalar.dof_count()];
    for (g, v) in locals {
        for (i, val) in g.into_iter().zip(v) {
            out[i] += val;
        }
    }
    Ok(out)
}

/// Flux load `−∫_∂Ω g φ_i·n ds` for Dirichlet data `g`.
pub fn assemble_boundary_load<G>(flux: &FeSpace, g: G) -> Result<Vec<f64>>
where
    G: Fn(Point) -> f64 + Sync,
{
    if !flux.is_flux() {
        return Err(FemError::UnsupportedSpace(format!("{} is not a flux space", flux.label())));
    }
    let mesh = flux.mesh();
    let rule = gauss_legendre_unit();
    let mut out = vec![0.0; flux.dof_count()];
    for e in 0..mesh.num_edges() {
        if !mesh.is_boundary_edge(e) {
            continue;
        }
        let (t, _) = mesh.edge_triangles(e);
        let map = ElementMap::new(mesh, t)?;
        let [lo, hi] = mesh.edges()[e];
        let (a, b) = (mesh.vertices()[lo], mesh.vertices()[hi]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let n = mesh.edge_normal(e);
        let xs: Vec<Point> = rule
            .iter()
            .map(|&(s, _)| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])])
            .collect();
        let refs: Vec<Point> = xs
            .iter()
            .map(|&x| {
                let r = map.inverse_map(x);
                // clamp rounding just outside the reference triangle
                [r[0].max(0.0), r[1].max(0.0)]
            })
            .collect();
        let BasisValues::Flux { values, .. } = flux.evaluate_basis(t, &refs)? else {
            unreachable!("flux space yields flux values")
        };
        for (i, dof) in flux.element_dofs(t).iter().enumerate() {
            let v: f64 = rule
                .iter()
                .zip(&xs)
                .enumerate()
                .map(|(q, (&(_, w), &x))| w * len * g(x) * (values[i][q][0] * n[0] + values[i][q][1] * n[1]))
                .sum();
            out[dof.global] -= v;
        }
    }
    Ok(out)
}

type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;
type MatrixFn = Arc<dyn Fn(Point) -> Mat2 + Send + Sync>;

/// A scalar field with first and (optionally) second derivatives.
#[derive(Clone)]
pub struct ExactScalar {
    pub value: ScalarFn,
    pub gradient: VectorFn,
    pub hessian: Option<MatrixFn>,
}

impl std::fmt::Debug for ExactScalar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExactScalar")
            .field("hessian", &self.hessian.is_some())
            .finish_non_exhaustive()
    }
}

impl ExactScalar {
    pub fn new(
        value: impl Fn(Point) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(Point) -> Point + Send + Sync + 'static,
        hessian: impl Fn(Point) -> Mat2 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Some(Arc::new(hessian)),
        }
    }

    /// `sin(πx₁) sin(πx₂)`.
    pub fn sin_sin() -> Self {
        use std::f64::consts::PI;
        Self::new(
            |x| (PI * x[0]).sin() * (PI * x[1]).sin(),
            |x| {
                [
                    PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                    PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
                ]
            },
            |x| {
                let (s0, c0) = (PI * x[0]).sin_cos();
                let (s1, c1) = (PI * x[1]).sin_cos();
                let p2 = PI * PI;
                [[-p2 * s0 * s1, p2 * c0 * c1], [p2 * c0 * c1, -p2 * s0 * s1]]
            },
        )
    }

    /// `x₁(1−x₁)x₂(1−x₂)`.
    pub fn bubble() -> Self {
        Self::new(
            |x| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]),
            |x| {
                [
                    (1.0 - 2.0 * x[0]) * x[1] * (1.0 - x[1]),
                    x[0] * (1.0 - x[0]) * (1.0 - 2.0 * x[1]),
                ]
            },
            |x| {
                let xy = (1.0 - 2.0 * x[0]) * (1.0 - 2.0 * x[1]);
                [
                    [-2.0 * x[1] * (1.0 - x[1]), xy],
                    [xy, -2.0 * x[0] * (1.0 - x[0])],
                ]
            },
        )
    }

    /// `c₀ + c₁x₁ + c₂x₂`.
    pub fn affine(c: [f64; 3]) -> Self {
        Self::new(
            move |x| c[0] + c[1] * x[0] + c[2] * x[1],
            move |_| [c[1], c[2]],
            |_| [[0.0; 2]; 2],
        )
    }
}

/// Exact data of a manufactured problem.
#[derive(Clone)]
pub struct ManufacturedProblem {
    pub u: ScalarFn,
    pub grad_u: VectorFn,
    pub sigma: VectorFn,
    pub div_sigma: ScalarFn,
    pub f: ScalarFn,
}

impl std::fmt::Debug for ManufacturedProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedProblem").finish_non_exhaustive()
    }
}

fn pointwise<T: Copy + Send + Sync + 'static>(
    field: &Field<T>,
    name: &str,
) -> Result<Arc<dyn Fn(Point) -> T + Send + Sync>> {
    match field {
        Field::Constant(v) => {
            let v = *v;
            Ok(Arc::new(move |_| v))
        }
        Field::Cellwise(f) | Field::Smooth(f) => Ok(f.clone()),
        Field::PerElement(_) => Err(FemError::InvalidArgument(format!(
            "{name} given per element cannot be evaluated pointwise"
        ))),
    }
}

/// Flux, divergence and source term for the exact solution `u` under the
/// formulation of `coeffs`. `A` and `b` must be constant; `γ` may vary.
///
/// Conservative: `σ = −A∇u − u b`, `div σ = f − γu`.
/// Divergence: `σ = −A∇u`, `div σ = f − b·∇u − γu`.
pub fn manufactured_problem(u: &ExactScalar, coeffs: &CoefficientSet) -> Result<ManufacturedProblem> {
    let hessian = u
        .hessian
        .clone()
        .ok_or_else(|| FemError::MissingDerivative("second derivatives of u".into()))?;
    let a = coeffs
        .a
        .constant_value()
        .ok_or_else(|| FemError::MissingDerivative("derivatives of a non-constant A".into()))?;
    let b = coeffs
        .b
        .constant_value()
        .ok_or_else(|| FemError::MissingDerivative("derivatives of a non-constant b".into()))?;
    let gamma = pointwise(&coeffs.gamma, "gamma")?;
    let conservative = match coeffs.formulation_kind() {
        FormulationKind::Conservative => true,
        FormulationKind::Divergence => false,
        FormulationKind::General => {
            return Err(FemError::InvalidArgument(
                "manufactured solutions need the conservative or divergence formulation".into(),
            ))
        }
    };
    let (uv, grad) = (u.value.clone(), u.gradient.clone());

    let sigma: VectorFn = {
        let (uv, grad) = (uv.clone(), grad.clone());
        Arc::new(move |x| {
            let g = mat2_vec(&a, grad(x));
            if conservative {
                let v = uv(x);
                [-g[0] - v * b[0], -g[1] - v * b[1]]
            } else {
                [-g[0], -g[1]]
            }
        })
    };
    let div_sigma: ScalarFn = {
        let grad = grad.clone();
        let hessian = hessian.clone();
        Arc::new(move |x| {
            let h = hessian(x);
            let a_h = a[0][0] * h[0][0] + a[0][1] * h[1][0] + a[1][0] * h[0][1] + a[1][1] * h[1][1];
            let g = grad(x);
            if conservative {
                -a_h - (b[0] * g[0] + b[1] * g[1])
            } else {
                -a_h
            }
        })
    };
    let f: ScalarFn = {
        let (uv, grad, div_sigma) = (uv.clone(), grad.clone(), div_sigma.clone());
        Arc::new(move |x| {
            let base = div_sigma(x) + gamma(x) * uv(x);
            if conservative {
                base
            } else {
                let g = grad(x);
                base + b[0] * g[0] + b[1] * g[1]
            }
        })
    };
    Ok(ManufacturedProblem {
        u: uv,
        grad_u: grad,
        sigma,
        div_sigma,
        f,
    })
}
