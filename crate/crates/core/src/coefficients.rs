//! PDE data `(A, b, γ)`: representation, evaluation at quadrature points and
//! sampled diagnostics of the uniform ellipticity and boundedness assumptions.

use std::fmt;
use std::sync::Arc;

use crate::error::{FemError, Result};
use crate::fe_spaces::{ElementMap, Quadrature};
use crate::linalg::{mat2_inverse, mat2_vec, sym2_eigenvalues, Mat2, IDENTITY2};
use crate::mesh::{Point, Triangulation};

/// An `L∞` field given as a global constant, mesh-aligned piecewise constant
/// or a pointwise callback.
#[derive(Clone)]
pub enum Field<T> {
    Constant(T),
    /// One value per element of a specific mesh.
    PerElement(Vec<T>),
    /// Piecewise constant, evaluated at the element centroid; survives refinement
    /// as long as discontinuities stay mesh-aligned.
    Cellwise(Arc<dyn Fn(Point) -> T + Send + Sync>),
    Smooth(Arc<dyn Fn(Point) -> T + Send + Sync>),
}

impl<T: Copy> Field<T> {
    pub fn cellwise(f: impl Fn(Point) -> T + Send + Sync + 'static) -> Self {
        Field::Cellwise(Arc::new(f))
    }

    pub fn smooth(f: impl Fn(Point) -> T + Send + Sync + 'static) -> Self {
        Field::Smooth(Arc::new(f))
    }

    /// Value on element `t` at the physical point `x`.
    pub fn eval(&self, mesh: &Triangulation, t: usize, x: Point) -> T {
        match self {
            Field::Constant(v) => *v,
            Field::PerElement(v) => v[t],
            Field::Cellwise(f) => f(mesh.centroid(t)),
            Field::Smooth(f) => f(x),
        }
    }

    /// Whether the field is constant on every element.
    pub fn is_elementwise_constant(&self) -> bool {
        !matches!(self, Field::Smooth(_))
    }

    pub fn constant_value(&self) -> Option<T> {
        match self {
            Field::Constant(v) => Some(*v),
            _ => None,
        }
    }

    fn check_mesh(&self, mesh: &Triangulation, name: &str) -> Result<()> {
        match self {
            Field::PerElement(v) if v.len() != mesh.num_triangles() => {
                Err(FemError::InvalidArgument(format!(
                    "{name} has {} element values for a mesh with {} elements",
                    v.len(),
                    mesh.num_triangles()
                )))
            }
            _ => Ok(()),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Field<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Constant(v) => write!(f, "Constant({v:?})"),
            Field::PerElement(v) => write!(f, "PerElement({} values)", v.len()),
            Field::Cellwise(_) => f.write_str("Cellwise(..)"),
            Field::Smooth(_) => f.write_str("Smooth(..)"),
        }
    }
}

/// Where the first-order term couples in the mixed system.
#[derive(Clone, Debug)]
pub enum Formulation {
    /// `−∇·(A∇u + u b) + γu`: `b₁ = A⁻¹b`, `b₂ = 0`.
    Conservative,
    /// `−∇·(A∇u) + b·∇u + γu`: `b₁ = 0`, `b₂ = A⁻¹b`.
    Divergence,
    /// Explicit `b₁`, `b₂`.
    General { b1: Field<Point>, b2: Field<Point> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormulationKind {
    Conservative,
    Divergence,
    General,
}

impl Formulation {
    pub fn kind(&self) -> FormulationKind {
        match self {
            Formulation::Conservative => FormulationKind::Conservative,
            Formulation::Divergence => FormulationKind::Divergence,
            Formulation::General { .. } => FormulationKind::General,
        }
    }
}

impl fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FormulationKind::Conservative => "conservative",
            FormulationKind::Divergence => "divergence",
            FormulationKind::General => "general",
        })
    }
}

impl std::str::FromStr for Formulation {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "conservative" => Ok(Formulation::Conservative),
            "divergence" => Ok(Formulation::Divergence),
            other => Err(FemError::InvalidArgument(format!(
                "unknown formulation `{other}` (expected conservative or divergence)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoefficientSet {
    pub a: Field<Mat2>,
    pub b: Field<Point>,
    pub gamma: Field<f64>,
    pub formulation: Formulation,
}

impl CoefficientSet {
    pub fn new(a: Field<Mat2>, b: Field<Point>, gamma: Field<f64>, formulation: Formulation) -> Self {
        Self {
            a,
            b,
            gamma,
            formulation,
        }
    }

    /// `A = I`, `b = 0`, `γ = 0`.
    pub fn laplace() -> Self {
        Self::new(
            Field::Constant(IDENTITY2),
            Field::Constant([0.0, 0.0]),
            Field::Constant(0.0),
            Formulation::Conservative,
        )
    }

    /// `A = I`, `b = (1, 1)`, `γ = −10`: non-selfadjoint and indefinite.
    pub fn indefinite(formulation: Formulation) -> Self {
        Self::new(
            Field::Constant(IDENTITY2),
            Field::Constant([1.0, 1.0]),
            Field::Constant(-10.0),
            formulation,
        )
    }

    /// `A = low·I` and `A = high·I` alternating on a `blocks × blocks` grid of the unit square.
    pub fn checkerboard(low: f64, high: f64, blocks: usize) -> Self {
        Self::new(
            checkerboard_field(low, high, blocks),
            Field::Constant([0.0, 0.0]),
            Field::Constant(0.0),
            Formulation::Conservative,
        )
    }

    pub fn with_formulation(mut self, formulation: Formulation) -> Self {
        self.formulation = formulation;
        self
    }

    pub fn formulation_kind(&self) -> FormulationKind {
        self.formulation.kind()
    }

    pub fn check_mesh(&self, mesh: &Triangulation) -> Result<()> {
        self.a.check_mesh(mesh, "A")?;
        self.b.check_mesh(mesh, "b")?;
        self.gamma.check_mesh(mesh, "gamma")?;
        if let Formulation::General { b1, b2 } = &self.formulation {
            b1.check_mesh(mesh, "b1")?;
            b2.check_mesh(mesh, "b2")?;
        }
        Ok(())
    }

    pub fn a(&self, mesh: &Triangulation, t: usize, x: Point) -> Mat2 {
        self.a.eval(mesh, t, x)
    }

    /// `A⁻¹` with symmetry and definiteness checked.
    pub fn a_inverse(&self, mesh: &Triangulation, t: usize, x: Point) -> Result<Mat2> {
        crate::fe_spaces::checked_inverse(&self.a(mesh, t, x), t)
    }

    pub fn b(&self, mesh: &Triangulation, t: usize, x: Point) -> Point {
        self.b.eval(mesh, t, x)
    }

    pub fn gamma(&self, mesh: &Triangulation, t: usize, x: Point) -> f64 {
        self.gamma.eval(mesh, t, x)
    }

    /// `A⁻¹b`, computed identically for both formulations.
    fn a_inv_b(&self, mesh: &Triangulation, t: usize, x: Point) -> Result<Point> {
        Ok(mat2_vec(&self.a_inverse(mesh, t, x)?, self.b(mesh, t, x)))
    }

    pub fn b1(&self, mesh: &Triangulation, t: usize, x: Point) -> Result<Point> {
        match &self.formulation {
            Formulation::Conservative => self.a_inv_b(mesh, t, x),
            Formulation::Divergence => Ok([0.0, 0.0]),
            Formulation::General { b1, .. } => Ok(b1.eval(mesh, t, x)),
        }
    }

    pub fn b2(&self, mesh: &Triangulation, t: usize, x: Point) -> Result<Point> {
        match &self.formulation {
            Formulation::Conservative => Ok([0.0, 0.0]),
            Formulation::Divergence => self.a_inv_b(mesh, t, x),
            Formulation::General { b2, .. } => Ok(b2.eval(mesh, t, x)),
        }
    }
}

pub fn checkerboard_field(low: f64, high: f64, blocks: usize) -> Field<Mat2> {
    let blocks = blocks.max(1);
    Field::cellwise(move |c: Point| {
        let n = blocks as f64;
        let i = ((c[0] * n).floor() as i64).clamp(0, blocks as i64 - 1);
        let j = ((c[1] * n).floor() as i64).clamp(0, blocks as i64 - 1);
        let v = if (i + j) % 2 == 0 { low } else { high };
        [[v, 0.0], [0.0, v]]
    })
}

/// `γ(x) = 1 + x₁`.
pub fn lipschitz_reaction() -> Field<f64> {
    Field::smooth(|x: Point| 1.0 + x[0])
}

/// Sampled bounds of the data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientDiagnostics {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub b_sup: f64,
    pub gamma_sup: f64,
}

fn for_each_sample(
    mesh: &Triangulation,
    quad: &Quadrature,
    mut f: impl FnMut(usize, Point) -> Result<()>,
) -> Result<()> {
    for t in 0..mesh.num_triangles() {
        let map = ElementMap::new(mesh, t)?;
        for &p in quad.points() {
            f(t, map.map(p))?;
        }
    }
    Ok(())
}

/// Samples `A`, `b`, `γ` at every quadrature point and checks that `A` is
/// symmetric positive definite there.
pub fn validate_assumption_a(
    c: &CoefficientSet,
    mesh: &Triangulation,
    quad: &Quadrature,
) -> Result<CoefficientDiagnostics> {
    c.check_mesh(mesh)?;
    let mut d = CoefficientDiagnostics {
        alpha_lo: f64::INFINITY,
        alpha_hi: 0.0,
        b_sup: 0.0,
        gamma_sup: 0.0,
    };
    for_each_sample(mesh, quad, |t, x| {
        let a = c.a(mesh, t, x);
        let asymmetry = (a[0][1] - a[1][0]).abs();
        if asymmetry > 1e-12 {
            return Err(FemError::Asymmetric {
                element: t,
                asymmetry,
            });
        }
        let [lo, hi] = sym2_eigenvalues(&a);
        if !(lo > 0.0) {
            return Err(FemError::NotPositiveDefinite {
                element: t,
                min_eigenvalue: lo,
            });
        }
        let b = c.b(mesh, t, x);
        d.alpha_lo = d.alpha_lo.min(lo);
        d.alpha_hi = d.alpha_hi.max(hi);
        d.b_sup = d.b_sup.max(b[0].hypot(b[1]));
        d.gamma_sup = d.gamma_sup.max(c.gamma(mesh, t, x).abs());
        Ok(())
    })?;
    Ok(d)
}

/// Sampled supremum of `sqrt(|A^{-1/2} b|² + |γ − 1|² + 1)`.
pub fn coefficient_bound_m1(c: &CoefficientSet, mesh: &Triangulation, quad: &Quadrature) -> Result<f64> {
    c.check_mesh(mesh)?;
    let mut sup = 1.0f64;
    for_each_sample(mesh, quad, |t, x| {
        let a_inv = mat2_inverse(&c.a(mesh, t, x)).ok_or(FemError::NotPositiveDefinite {
            element: t,
            min_eigenvalue: 0.0,
        })?;
        let b = c.b(mesh, t, x);
        let ab = mat2_vec(&a_inv, b);
        let g = c.gamma(mesh, t, x) - 1.0;
        sup = sup.max((b[0] * ab[0] + b[1] * ab[1] + g * g + 1.0).sqrt());
        Ok(())
    })?;
    Ok(sup)
}

fn parse_call<'a>(s: &'a str, name: &str) -> Option<Vec<&'a str>> {
    let rest = s.strip_prefix(name)?.trim_start();
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    Some(inner.split(',').map(str::trim).collect())
}

fn parse_numbers(parts: &[&str], expected: usize, what: &str) -> Result<Vec<f64>> {
    if parts.len() != expected {
        return Err(FemError::InvalidArgument(format!(
            "{what} expects {expected} arguments, got {}",
            parts.len()
        )));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| FemError::InvalidArgument(format!("{what}: `{p}` is not a number")))
        })
        .collect()
}

/// `identity | diag(a11,a22) | checkerboard(v1,v2,blocks)`.
pub fn parse_diffusion(s: &str) -> Result<Field<Mat2>> {
    let s = s.trim();
    if s == "identity" {
        return Ok(Field::Constant(IDENTITY2));
    }
    if let Some(parts) = parse_call(s, "diag") {
        let v = parse_numbers(&parts, 2, "diag")?;
        return Ok(Field::Constant([[v[0], 0.0], [0.0, v[1]]]));
    }
    if let Some(parts) = parse_call(s, "checkerboard") {
        let v = parse_numbers(&parts, 3, "checkerboard")?;
        if v[2] < 1.0 || v[2].fract() != 0.0 {
            return Err(FemError::InvalidArgument(
                "checkerboard block count must be a positive integer".into(),
            ));
        }
        return Ok(checkerboard_field(v[0], v[1], v[2] as usize));
    }
    Err(FemError::InvalidArgument(format!("unknown diffusion `{s}`")))
}

/// `(bx,by)` or one of the presets `zero`, `diagonal` (= (1,1)), `rotating` (= (−x₂, x₁)).
pub fn parse_convection(s: &str) -> Result<Field<Point>> {
    let s = s.trim();
    match s {
        "zero" => return Ok(Field::Constant([0.0, 0.0])),
        "diagonal" => return Ok(Field::Constant([1.0, 1.0])),
        "rotating" => return Ok(Field::smooth(|x: Point| [-x[1], x[0]])),
        _ => {}
    }
    if let Some(parts) = parse_call(s, "") {
        let v = parse_numbers(&parts, 2, "b")?;
        return Ok(Field::Constant([v[0], v[1]]));
    }
    Err(FemError::InvalidArgument(format!("unknown convection `{s}`")))
}

/// `const(c)` or `lipschitz_preset` (= 1 + x₁).
pub fn parse_reaction(s: &str) -> Result<Field<f64>> {
    let s = s.trim();
    if s == "lipschitz_preset" {
        return Ok(lipschitz_reaction());
    }
    if let Some(parts) = parse_call(s, "const") {
        let v = parse_numbers(&parts, 1, "const")?;
        return Ok(Field::Constant(v[0]));
    }
    Err(FemError::InvalidArgument(format!("unknown reaction `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh() -> Triangulation {
        Triangulation::structured(4).unwrap()
    }

    #[test]
    fn identity_bounds() {
        let d = validate_assumption_a(&CoefficientSet::laplace(), &mesh(), &Quadrature::default()).unwrap();
        assert_eq!((d.alpha_lo, d.alpha_hi, d.b_sup, d.gamma_sup), (1.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn checkerboard_bounds() {
        let c = CoefficientSet::checkerboard(1.0, 100.0, 2);
        let d = validate_assumption_a(&c, &mesh(), &Quadrature::default()).unwrap();
        assert_eq!((d.alpha_lo, d.alpha_hi), (1.0, 100.0));
    }

    #[test]
    fn indefinite_matrix_fails_validation() {
        let mut c = CoefficientSet::laplace();
        c.a = Field::Constant([[1.0, 2.0], [2.0, 1.0]]);
        let err = validate_assumption_a(&c, &mesh(), &Quadrature::default()).unwrap_err();
        match err {
            FemError::NotPositiveDefinite {
                element,
                min_eigenvalue,
            } => {
                assert_eq!(element, 0);
                assert!((min_eigenvalue + 1.0).abs() < 1e-15);
            }
            e => panic!("unexpected {e}"),
        }
        c.a = Field::Constant([[1.0, 0.5], [0.0, 1.0]]);
        assert!(matches!(
            validate_assumption_a(&c, &mesh(), &Quadrature::default()),
            Err(FemError::Asymmetric { .. })
        ));
    }

    #[test]
    fn m1_examples() {
        let q = Quadrature::default();
        let mut c = CoefficientSet::laplace();
        c.gamma = Field::Constant(1.0);
        assert_eq!(coefficient_bound_m1(&c, &mesh(), &q).unwrap(), 1.0);
        c.b = Field::Constant([1.0, 0.0]);
        c.gamma = Field::Constant(0.0);
        assert!((coefficient_bound_m1(&c, &mesh(), &q).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        c.a = Field::Constant([[4.0, 0.0], [0.0, 4.0]]);
        c.b = Field::Constant([2.0, 0.0]);
        c.gamma = Field::Constant(1.0);
        assert!((coefficient_bound_m1(&c, &mesh(), &q).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn formulations_swap_first_order_terms() {
        let m = mesh();
        let a = Field::smooth(|x: Point| [[2.0 + x[0], 0.3], [0.3, 1.0 + x[1]]]);
        let cons = CoefficientSet::new(a, parse_convection("rotating").unwrap(), Field::Constant(0.0), Formulation::Conservative);
        let div = cons.clone().with_formulation(Formulation::Divergence);
        let q = Quadrature::default();
        for t in 0..m.num_triangles() {
            let map = ElementMap::new(&m, t).unwrap();
            for &p in q.points() {
                let x = map.map(p);
                assert_eq!(cons.b1(&m, t, x).unwrap(), div.b2(&m, t, x).unwrap());
                assert_eq!(cons.b2(&m, t, x).unwrap(), div.b1(&m, t, x).unwrap());
            }
        }
    }

    #[test]
    fn per_element_values_are_reproduced() {
        let m = mesh();
        let values: Vec<f64> = (0..m.num_triangles()).map(|t| t as f64).collect();
        let f = Field::PerElement(values);
        let q = Quadrature::default();
        for t in 0..m.num_triangles() {
            let map = ElementMap::new(&m, t).unwrap();
            for &p in q.points() {
                assert_eq!(f.eval(&m, t, map.map(p)), t as f64);
            }
        }
        let mut c = CoefficientSet::laplace();
        c.gamma = Field::PerElement(vec![1.0; 3]);
        assert!(validate_assumption_a(&c, &m, &q).is_err());
    }

    #[test]
    fn parsing() {
        assert_eq!(
            parse_diffusion("diag(2, 3)").unwrap().constant_value(),
            Some([[2.0, 0.0], [0.0, 3.0]])
        );
        assert!(parse_diffusion("checkerboard(1,100,2)").is_ok());
        assert!(parse_diffusion("checkerboard(1,100,0)").is_err());
        assert!(parse_diffusion("diag(1)").is_err());
        assert_eq!(parse_convection("(1, -2)").unwrap().constant_value(), Some([1.0, -2.0]));
        assert_eq!(parse_reaction("const(-10)").unwrap().constant_value(), Some(-10.0));
        let g = parse_reaction("lipschitz_preset").unwrap();
        assert_eq!(g.eval(&mesh(), 0, [0.25, 0.0]), 1.25);
        assert!("upwind".parse::<Formulation>().is_err());
    }
}
