//! Inner approximation of Raviart–Thomas fields by componentwise polynomial
//! projection, `‖τ − Π_k τ‖ ≤ 2/(3(2+k)) ‖h_T div τ‖` on triangles, and the
//! search for fields that violate it.

use std::sync::Arc;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FemError, Result};
use crate::fe_spaces::{FeSpace, LocalProjector, Quadrature};
use crate::mesh::{triangle_shape_ratio, Point, Triangulation};

/// Constant of the estimate in two dimensions, `n / ((n+1)(n+k))` with `n = 2`.
pub fn lemma4_constant(k: usize) -> f64 {
    2.0 / (3.0 * (2 + k) as f64)
}

/// A finite family of vector fields on one triangle, sampled at quadrature
/// points together with their divergences, and the local `P_k` projector.
#[derive(Clone, Debug)]
pub struct LocalFieldBasis {
    vertices: [Point; 3],
    k: usize,
    points: Vec<Point>,
    values: Vec<Vec<Point>>,
    divergence: Vec<Vec<f64>>,
    projector: LocalProjector,
    diameter: f64,
    centroid: Point,
}

/// Result of checking the estimate on one field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lemma4Check {
    /// `‖τ − Π_k τ‖`
    pub lhs: f64,
    /// `2/(3(2+k)) h_T ‖div τ‖`
    pub rhs: f64,
    /// `lhs / rhs`; infinite when `rhs = 0 < lhs`, zero when both vanish.
    pub ratio: f64,
    /// Largest deviation from `(2+k)(1−Π_k)τ = (1−Π_k)((div τ)(x − c))` at the quadrature points.
    pub identity_residual: f64,
}

fn single_triangle(vertices: [Point; 3]) -> Result<Arc<Triangulation>> {
    let [a, b, c] = vertices;
    let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let tri = if cross >= 0.0 { [0, 1, 2] } else { [0, 2, 1] };
    Ok(Arc::new(Triangulation::from_parts(vertices.to_vec(), vec![tri])?))
}

impl LocalFieldBasis {
    /// Raviart–Thomas `RT_k` on the triangle with projection degree `k`.
    pub fn raviart_thomas(vertices: [Point; 3], k: usize) -> Result<Self> {
        let mesh = single_triangle(vertices)?;
        let space = FeSpace::raviart_thomas(mesh.clone(), k)?;
        let quad = Quadrature::triangle_degree6();
        let tab = space.tabulate(0, &quad)?;
        let (values, divergence) = tab.flux_values();
        Ok(Self {
            vertices,
            k,
            points: tab.points.clone(),
            values: values.to_vec(),
            divergence: divergence.to_vec(),
            projector: LocalProjector::on_element(&mesh, 0, k, &quad)?,
            diameter: mesh.diameter(0),
            centroid: mesh.centroid(0),
        })
    }

    /// The BDM fields whose divergence lies in `P_k`, i.e. all of `P_{k+1}²`,
    /// with projection degree `k`.
    pub fn bdm(vertices: [Point; 3], k: usize) -> Result<Self> {
        if k > 1 {
            return Err(FemError::UnsupportedSpace(format!("BDM fields with divergence in P{k}")));
        }
        let mesh = single_triangle(vertices)?;
        let quad = Quadrature::triangle_degree6();
        let space = FeSpace::discontinuous(mesh.clone(), k)?;
        let tab = space.tabulate(0, &quad)?;
        let c = mesh.centroid(0);
        let h = mesh.diameter(0);
        let degree = k as i32 + 1;
        let mut values = Vec::new();
        let mut divergence = Vec::new();
        for comp in 0..2 {
            for total in 0..=degree {
                for a in 0..=total {
                    let b = total - a;
                    let mut v = Vec::with_capacity(tab.points.len());
                    let mut d = Vec::with_capacity(tab.points.len());
                    for &x in &tab.points {
                        let (s, t) = ((x[0] - c[0]) / h, (x[1] - c[1]) / h);
                        let m = s.powi(a) * t.powi(b);
                        // derivative of the active component along its own axis
                        let dm = if comp == 0 {
                            if a == 0 { 0.0 } else { a as f64 * s.powi(a - 1) * t.powi(b) / h }
                        } else if b == 0 {
                            0.0
                        } else {
                            b as f64 * s.powi(a) * t.powi(b - 1) / h
                        };
                        v.push(if comp == 0 { [m, 0.0] } else { [0.0, m] });
                        d.push(dm);
                    }
                    values.push(v);
                    divergence.push(d);
                }
            }
        }
        Ok(Self {
            vertices,
            k,
            points: tab.points.clone(),
            values,
            divergence,
            projector: LocalProjector::from_tabulation(&tab),
            diameter: h,
            centroid: c,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn projection_degree(&self) -> usize {
        self.k
    }

    pub fn vertices(&self) -> [Point; 3] {
        self.vertices
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Values and divergence of `Σ c_i φ_i` at the quadrature points.
    pub fn evaluate(&self, coeffs: &[f64]) -> (Vec<Point>, Vec<f64>) {
        assert_eq!(coeffs.len(), self.dim());
        let nq = self.points.len();
        let mut v = vec![[0.0; 2]; nq];
        let mut d = vec![0.0; nq];
        for (i, &c) in coeffs.iter().enumerate() {
            for q in 0..nq {
                v[q][0] += c * self.values[i][q][0];
                v[q][1] += c * self.values[i][q][1];
                d[q] += c * self.divergence[i][q];
            }
        }
        (v, d)
    }

    /// Checks the estimate and the identity for `Σ c_i φ_i`, with the identity
    /// evaluated about the point `center`.
    pub fn check_about(&self, coeffs: &[f64], center: Point) -> Lemma4Check {
        let (tau, div) = self.evaluate(coeffs);
        let p = &self.projector;
        let defect = p.complement_vector(&tau);
        let lhs = p.l2_norm_sq_vector(&defect).max(0.0).sqrt();
        let rhs = lemma4_constant(self.k) * self.diameter * p.l2_norm(&div);
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let moment: Vec<Point> = self
            .points
            .iter()
            .zip(&div)
            .map(|(x, d)| [d * (x[0] - center[0]), d * (x[1] - center[1])])
            .collect();
        let moment_defect = p.complement_vector(&moment);
        let scale = (2 + self.k) as f64;
        let identity_residual = defect
            .iter()
            .zip(&moment_defect)
            .map(|(a, b)| (scale * a[0] - b[0]).abs().max((scale * a[1] - b[1]).abs()))
            .fold(0.0, f64::max);
        Lemma4Check {
            lhs,
            rhs,
            ratio,
            identity_residual,
        }
    }
}

/// Checks the estimate for one field, with the identity taken about the centroid.
pub fn verify_lemma4(basis: &LocalFieldBasis, coeffs: &[f64]) -> Lemma4Check {
    basis.check_about(coeffs, basis.centroid)
}

/// Random triangle with vertices in the unit square and shape ratio at most `max_shape`.
pub fn random_triangle(rng: &mut impl Rng, max_shape: f64) -> [Point; 3] {
    loop {
        let mut v = [[0.0; 2]; 3];
        for p in &mut v {
            *p = [rng.random::<f64>(), rng.random::<f64>()];
        }
        if let Some(r) = triangle_shape_ratio(v[0], v[1], v[2]) {
            if r <= max_shape {
                return v;
            }
        }
    }
}

fn random_coefficients(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Summary of a randomized sweep of the estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub samples: usize,
    pub max_ratio: f64,
    pub max_identity_residual: f64,
    /// Samples with `lhs > rhs + 1e-12`.
    pub violations: usize,
}

/// Shape bound for random triangles in sweeps.
pub const SWEEP_MAX_SHAPE: f64 = 8.0;

/// Random `RT_k` fields on random well-shaped triangles.
pub fn lemma4_sweep(k: usize, samples: usize, seed: u64) -> Result<SweepReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SweepReport {
        samples,
        max_ratio: 0.0,
        max_identity_residual: 0.0,
        violations: 0,
    };
    for _ in 0..samples {
        let tri = random_triangle(&mut rng, SWEEP_MAX_SHAPE);
        let basis = LocalFieldBasis::raviart_thomas(tri, k)?;
        let c = random_coefficients(&mut rng, basis.dim());
        let r = verify_lemma4(&basis, &c);
        report.max_ratio = report.max_ratio.max(r.ratio);
        report.max_identity_residual = report.max_identity_residual.max(r.identity_residual);
        if r.lhs > r.rhs + 1e-12 {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// A divergence-free field with a nonzero non-polynomial part.
#[derive(Clone, Debug)]
pub struct Witness {
    pub coefficients: Vec<f64>,
    pub lhs: f64,
    pub div_norm: f64,
}

#[derive(Clone, Debug)]
pub struct CounterexampleReport {
    pub trials: usize,
    /// Largest `‖τ − Π_k τ‖ / (c_k ‖h_T div τ‖ + tiny)`; infinite when a witness exists.
    pub best_ratio: f64,
    /// Largest ratio among the random samples alone.
    pub best_sampled_ratio: f64,
    pub best_coefficients: Vec<f64>,
    pub witness: Option<Witness>,
}

const TINY: f64 = 1e-300;

/// Looks for fields in the span of `basis` that violate the estimate: the
/// divergence-free subspace is computed exactly (as a null space of the
/// sampled divergence) and `trials` random fields are drawn.
pub fn counterexample_search(basis: &LocalFieldBasis, trials: usize, seed: u64) -> Result<CounterexampleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_sampled_ratio = 0.0f64;
    let mut best_coefficients = vec![0.0; basis.dim()];
    for _ in 0..trials {
        let c = random_coefficients(&mut rng, basis.dim());
        let r = verify_lemma4(basis, &c);
        let ratio = r.lhs / (r.rhs + TINY);
        if ratio > best_sampled_ratio {
            best_sampled_ratio = ratio;
            best_coefficients = c;
        }
    }

    let nq = basis.points.len();
    let n = basis.dim();
    let div = Mat::from_fn(nq.max(n), n, |q, i| if q < nq { basis.divergence[i][q] } else { 0.0 });
    let svd = div.svd().map_err(|_| FemError::EigenSolve)?;
    let s = svd.S().column_vector();
    let smax = s[0];
    let mut witness: Option<Witness> = None;
    for j in 0..n {
        let sj = if j < s.nrows() { s[j] } else { 0.0 };
        if sj > 1e-12 * smax {
            continue;
        }
        let c: Vec<f64> = (0..n).map(|i| svd.V()[(i, j)]).collect();
        let r = verify_lemma4(basis, &c);
        let (_, d) = basis.evaluate(&c);
        let div_norm = basis.projector.l2_norm(&d);
        if r.lhs > 1e-10 && witness.as_ref().is_none_or(|w| r.lhs > w.lhs) {
            witness = Some(Witness {
                coefficients: c,
                lhs: r.lhs,
                div_norm,
            });
        }
    }
    Ok(CounterexampleReport {
        trials,
        best_ratio: if witness.is_some() { f64::INFINITY } else { best_sampled_ratio },
        best_sampled_ratio,
        best_coefficients,
        witness,
    })
}

/// Counterexample search over the BDM fields with divergence in `P_1`.
pub fn bdm_counterexample_search(vertices: [Point; 3], trials: usize, seed: u64) -> Result<CounterexampleReport> {
    counterexample_search(&LocalFieldBasis::bdm(vertices, 1)?, trials, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    const REF: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    /// Coefficients of `τ(x) = x` in the local basis, by least squares on the samples.
    fn position_field(basis: &LocalFieldBasis) -> Vec<f64> {
        let n = basis.dim();
        let nq = basis.points.len();
        let mut ata = vec![0.0; n * n];
        let mut atb = vec![0.0; n];
        for q in 0..nq {
            for i in 0..n {
                let vi = basis.values[i][q];
                atb[i] += vi[0] * basis.points[q][0] + vi[1] * basis.points[q][1];
                for j in 0..n {
                    let vj = basis.values[j][q];
                    ata[i * n + j] += vi[0] * vj[0] + vi[1] * vj[1];
                }
            }
        }
        crate::linalg::solve_small(&ata, n, &atb).unwrap()
    }

    #[test]
    fn position_field_on_reference_triangle() {
        let basis = LocalFieldBasis::raviart_thomas(REF, 0).unwrap();
        let c = position_field(&basis);
        let r = verify_lemma4(&basis, &c);
        assert!((r.lhs - 1.0 / 18f64.sqrt()).abs() < 1e-14);
        assert!((r.rhs - 2.0 / 3.0).abs() < 1e-14);
        assert!(r.identity_residual < 1e-14);
    }

    #[test]
    fn constant_fields_have_no_defect() {
        let basis = LocalFieldBasis::raviart_thomas(REF, 0).unwrap();
        // (1, 0) has edge moments 0, −1 ... find it by least squares against a constant
        let n = basis.dim();
        let (v, _) = basis.evaluate(&vec![1.0; n]);
        let _ = v;
        let mut best = vec![0.0; n];
        // constant e_x: RT0 moments are the normal components times edge lengths
        best[0] = 1.0;
        best[1] = -1.0;
        best[2] = 0.0;
        let (v, d) = basis.evaluate(&best);
        assert!(d.iter().all(|x| x.abs() < 1e-14));
        assert!(v.iter().all(|p| (p[0] - v[0][0]).abs() < 1e-14 && (p[1] - v[0][1]).abs() < 1e-14));
        let r = verify_lemma4(&basis, &best);
        assert!(r.lhs < 1e-15 && r.ratio == 0.0);
    }

    #[test]
    fn identity_holds_about_any_center() {
        let tri = [[0.1, 0.2], [0.9, 0.3], [0.4, 0.8]];
        for k in [0, 1] {
            let basis = LocalFieldBasis::raviart_thomas(tri, k).unwrap();
            let c: Vec<f64> = (0..basis.dim()).map(|i| (i as f64 * 0.7).sin()).collect();
            for center in [[0.0, 0.0], [3.0, -2.0]] {
                assert!(basis.check_about(&c, center).identity_residual < 1e-12);
            }
        }
    }

    #[test]
    fn sweep_is_reproducible_and_holds() {
        for k in [0, 1] {
            let a = lemma4_sweep(k, 300, 7).unwrap();
            assert_eq!(a, lemma4_sweep(k, 300, 7).unwrap());
            assert_eq!(a.violations, 0);
            assert!(a.max_ratio <= 1.0 && a.max_identity_residual < 1e-12);
        }
    }

    #[test]
    fn bdm_has_divergence_free_witness() {
        let r = bdm_counterexample_search(REF, 200, 1).unwrap();
        let w = r.witness.expect("witness");
        assert!(w.lhs > 1e-3 && w.div_norm < 1e-12);
        assert_eq!(r.best_ratio, f64::INFINITY);
        let r0 = counterexample_search(&LocalFieldBasis::bdm(REF, 0).unwrap(), 10, 1).unwrap();
        assert!(r0.witness.is_some());
    }

    #[test]
    fn rt_search_finds_nothing() {
        let basis = LocalFieldBasis::raviart_thomas([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]], 1).unwrap();
        let r = counterexample_search(&basis, 2000, 3).unwrap();
        assert!(r.witness.is_none());
        assert!(r.best_ratio <= 1.0 + 1e-10);
        let again = counterexample_search(&basis, 2000, 3).unwrap();
        assert_eq!(again.best_ratio, r.best_ratio);
    }

    #[test]
    fn bdm_basis_divergence_is_consistent() {
        let basis = LocalFieldBasis::bdm([[0.2, 0.1], [1.0, 0.4], [0.1, 0.9]], 1).unwrap();
        assert_eq!(basis.dim(), 12);
        let c: Vec<f64> = (0..12).map(|i| (i as f64).cos()).collect();
        let (_, d) = basis.evaluate(&c);
        // divergence lies in P1, so projecting onto P1 changes nothing
        let res = basis.projector.complement(&d);
        assert!(res.iter().all(|v| v.abs() < 1e-12));
    }
}
