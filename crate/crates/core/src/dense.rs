//! Dense global matrices and the factorizations used by assembly and analysis.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Mat, Side};

use crate::error::{FemError, Result};

pub type Matrix = Mat<f64>;

/// Element contribution with global row/column indices and a row-major block.
#[derive(Clone, Debug)]
pub(crate) struct LocalBlock {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
}

impl LocalBlock {
    pub fn zeros(rows: Vec<usize>, cols: Vec<usize>) -> Self {
        let n = rows.len() * cols.len();
        Self {
            rows,
            cols,
            values: vec![0.0; n],
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let n = self.cols.len();
        self.values[i * n + j] += v;
    }

    pub fn scatter_into(&self, target: &mut Matrix, row_offset: usize, col_offset: usize) {
        let n = self.cols.len();
        for (i, &r) in self.rows.iter().enumerate() {
            for (j, &c) in self.cols.iter().enumerate() {
                target[(row_offset + r, col_offset + c)] += self.values[i * n + j];
            }
        }
    }
}

pub fn mat_vec(m: &Matrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(m.ncols(), x.len());
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum())
        .collect()
}

pub fn mat_t_vec(m: &Matrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(m.nrows(), x.len());
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)] * x[i]).sum())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `sqrt(xᵀ M x)`, clamped at zero against rounding.
pub fn energy_norm(m: &Matrix, x: &[f64]) -> f64 {
    dot(x, &mat_vec(m, x)).max(0.0).sqrt()
}

/// Largest absolute entry of `M − Mᵀ`, relative to the largest entry of `M`.
pub fn symmetry_defect(m: &Matrix) -> f64 {
    let mut scale = 0.0f64;
    let mut defect = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            scale = scale.max(m[(i, j)].abs());
            defect = defect.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        defect / scale
    }
}

pub fn column(x: &[f64]) -> Matrix {
    Mat::from_fn(x.len(), 1, |i, _| x[i])
}

pub fn column_to_vec(m: &Matrix) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(m: &Matrix) -> Result<Matrix> {
    let llt = m
        .llt(Side::Lower)
        .map_err(|e| FemError::InvalidGram(format!("{e:?}")))?;
    Ok(llt.L().to_owned())
}

/// Solves `M x = b` for symmetric positive definite `M`.
pub fn solve_spd(m: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let llt = m
        .llt(Side::Lower)
        .map_err(|e| FemError::InvalidGram(format!("{e:?}")))?;
    let mut rhs = column(b);
    llt.solve_in_place(rhs.as_mut());
    Ok(column_to_vec(&rhs))
}

/// `‖A x − b‖∞ / (‖A‖∞ ‖x‖∞ + ‖b‖∞)`; zero when both sides vanish.
pub fn backward_error(a: &Matrix, x: &[f64], b: &[f64]) -> f64 {
    let r = mat_vec(a, x);
    let res = r.iter().zip(b).fold(0.0f64, |m, (r, b)| m.max((r - b).abs()));
    let a_norm = (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let x_norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let b_norm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let denom = a_norm * x_norm + b_norm;
    if denom == 0.0 {
        0.0
    } else {
        res / denom
    }
}

/// LU factorization with partial pivoting and a pivot-ratio condition estimate.
pub struct LuSolver {
    lu: PartialPivLu<f64>,
    matrix: Matrix,
    pub condition_estimate: f64,
}

impl LuSolver {
    /// Fails with [`FemError::SingularSystem`] when the smallest pivot is
    /// below `1e-14` times the largest.
    pub fn new(a: &Matrix) -> Result<Self> {
        let lu = a.partial_piv_lu();
        let u = lu.U();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..u.nrows() {
            let d = u[(i, i)].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let condition_estimate = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition_estimate < 1e14) {
            return Err(FemError::SingularSystem {
                condition: condition_estimate,
            });
        }
        Ok(Self {
            lu,
            matrix: a.clone(),
            condition_estimate,
        })
    }

    fn refine(&self, b: &[f64], transpose: bool) -> (Vec<f64>, f64) {
        let solve = |r: &[f64]| {
            let mut c = column(r);
            if transpose {
                self.lu.solve_transpose_in_place(c.as_mut());
            } else {
                self.lu.solve_in_place(c.as_mut());
            }
            column_to_vec(&c)
        };
        let apply = |x: &[f64]| {
            if transpose {
                mat_t_vec(&self.matrix, x)
            } else {
                mat_vec(&self.matrix, x)
            }
        };
        let mut x = solve(b);
        // one step of iterative refinement
        let r: Vec<f64> = apply(&x).iter().zip(b).map(|(ax, b)| b - ax).collect();
        let dx = solve(&r);
        for (x, d) in x.iter_mut().zip(dx) {
            *x += d;
        }
        let err = if transpose {
            let t = self.matrix.transpose().to_owned();
            backward_error(&t, &x, b)
        } else {
            backward_error(&self.matrix, &x, b)
        };
        (x, err)
    }

    /// Solves `A x = b`, returning the solution and its backward error.
    pub fn solve(&self, b: &[f64]) -> (Vec<f64>, f64) {
        self.refine(b, false)
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> (Vec<f64>, f64) {
        self.refine(b, true)
    }
}

/// Matrix-market style coordinate dump of a dense matrix (nonzeros only, 1-based).
pub fn to_matrix_market(m: &Matrix) -> String {
    let mut entries = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                entries.push(format!("{} {} {:.17e}", i + 1, j + 1, v));
            }
        }
    }
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", m.nrows(), m.ncols(), entries.len()));
    for e in entries {
        out.push_str(&e);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_solve_and_norms() {
        let m = Mat::from_fn(3, 3, |i, j| if i == j { 4.0 } else { 1.0 });
        let x = solve_spd(&m, &[6.0, 6.0, 6.0]).unwrap();
        for v in &x {
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert!((energy_norm(&m, &x) - 18f64.sqrt()).abs() < 1e-13);
        let l = cholesky_lower(&m).unwrap();
        assert!((l[(0, 0)] - 2.0).abs() < 1e-15);
        assert_eq!(symmetry_defect(&m), 0.0);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let m = Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 2.0 });
        assert!(matches!(cholesky_lower(&m), Err(FemError::InvalidGram(_))));
    }

    #[test]
    fn transpose_product() {
        let m = Mat::from_fn(2, 3, |i, j| (i * 3 + j) as f64);
        assert_eq!(mat_t_vec(&m, &[1.0, 1.0]), vec![3.0, 5.0, 7.0]);
        assert_eq!(mat_vec(&m, &[1.0, 0.0, 0.0]), vec![0.0, 3.0]);
    }

    #[test]
    fn lu_solves_and_detects_singularity() {
        let a = Mat::from_fn(3, 3, |i, j| [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]][i][j] + if j == 0 { 0.5 } else { 0.0 });
        let lu = LuSolver::new(&a).unwrap();
        let (x, err) = lu.solve(&[1.0, 2.0, 3.0]);
        assert!(err < 1e-15);
        assert!(backward_error(&a, &x, &[1.0, 2.0, 3.0]) < 1e-15);
        let (y, _) = lu.solve_transpose(&[1.0, 0.0, 0.0]);
        let r = mat_t_vec(&a, &y);
        assert!((r[0] - 1.0).abs() < 1e-14 && r[1].abs() < 1e-14);
        let s = Mat::from_fn(2, 2, |_, _| 1.0);
        assert!(matches!(LuSolver::new(&s), Err(FemError::SingularSystem { .. })));
    }

    #[test]
    fn matrix_market_header() {
        let m = Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let s = to_matrix_market(&m);
        assert!(s.lines().nth(1).unwrap() == "2 2 2");
        assert!(s.contains("2 2 1.00000000000000000e0"));
    }
}
