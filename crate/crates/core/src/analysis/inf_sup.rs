use faer::{Mat, Side};

use crate::assembly::AssembledSystem;
use crate::coefficients::FormulationKind;
use crate::dense::{cholesky_lower, Matrix};
use crate::error::{FemError, Result};

/// Discrete inf-sup constant of one assembled system.
#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub level: usize,
    pub h_max: f64,
    pub n_dof: usize,
    pub beta_h: f64,
    /// Largest singular value of the whitened operator (continuity constant).
    pub norm: f64,
    pub formulation: FormulationKind,
    /// `‖N v − λ v‖ / λ_max` for the smallest eigenpair of the whitened normal matrix.
    pub eigenvalue_residual: f64,
    /// Trial vector of unit `H`-norm attaining the infimum.
    pub extremal_trial: Vec<f64>,
}

impl StabilityReport {
    pub fn at_level(mut self, level: usize) -> Self {
        self.level = level;
        self
    }
}

/// Smallest singular value of `B` between the norms induced by `M`.
#[derive(Clone, Debug)]
pub struct InfSup {
    pub beta: f64,
    pub norm: f64,
    pub residual: f64,
    pub extremal_trial: Vec<f64>,
}

/// `β = σ_min(L⁻¹ B L⁻ᵀ)` with `M = L Lᵀ`, where `B[i][j] = b(φ_j, φ_i)`.
///
/// The square of `β` is the smallest eigenvalue of the symmetric matrix
/// `WᵀW`, `W = L⁻¹ B L⁻ᵀ`; it is clamped at zero when rounding makes it negative.
pub fn inf_sup_constant(b: &Matrix, m: &Matrix) -> Result<InfSup> {
    let n = b.nrows();
    if b.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(FemError::InvalidArgument(
            "inf-sup needs square matrices of equal size".into(),
        ));
    }
    let l = cholesky_lower(m)?;
    // X = L⁻¹ B, then Wᵀ = L⁻¹ Xᵀ
    let mut x = b.clone();
    l.as_ref().solve_lower_triangular_in_place(x.as_mut());
    let mut wt = x.transpose().to_owned();
    drop(x);
    l.as_ref().solve_lower_triangular_in_place(wt.as_mut());
    let normal: Matrix = &wt * wt.transpose();
    drop(wt);
    let evd = normal
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| FemError::EigenSolve)?;
    let s = evd.S().column_vector();
    let lambda_max = s[n - 1].max(0.0);
    let lambda_min = s[0];
    if lambda_min < -1e-12 * lambda_max.max(1.0) {
        return Err(FemError::EigenSolve);
    }
    let lambda_min = lambda_min.max(0.0);
    let v: Vec<f64> = (0..n).map(|i| evd.U()[(i, 0)]).collect();
    let nv = crate::dense::mat_vec(&normal, &v);
    let residual = nv
        .iter()
        .zip(&v)
        .map(|(a, b)| (a - s[0] * b).powi(2))
        .sum::<f64>()
        .sqrt()
        / lambda_max.max(f64::MIN_POSITIVE);
    // x = L⁻ᵀ v has unit M-norm
    let mut trial = Mat::from_fn(n, 1, |i, _| v[i]);
    l.as_ref()
        .transpose()
        .solve_upper_triangular_in_place(trial.as_mut());
    Ok(InfSup {
        beta: lambda_min.sqrt(),
        norm: lambda_max.sqrt(),
        residual,
        extremal_trial: (0..n).map(|i| trial[(i, 0)]).collect(),
    })
}

/// Discrete inf-sup constant of `b(·,·)` on `V_h × V_h` in the `H`-norm.
pub fn compute_inf_sup(sys: &AssembledSystem) -> Result<StabilityReport> {
    let r = inf_sup_constant(&sys.b, &sys.m_h)?;
    Ok(StabilityReport {
        level: 0,
        h_max: sys.h_max,
        n_dof: sys.dim(),
        beta_h: r.beta,
        norm: r.norm,
        formulation: sys.formulation,
        eigenvalue_residual: r.residual,
        extremal_trial: r.extremal_trial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::energy_norm;

    fn spd(n: usize) -> Matrix {
        Mat::from_fn(n, n, |i, j| {
            if i == j {
                4.0 + i as f64
            } else {
                1.0 / (1.0 + (i + j) as f64)
            }
        })
    }

    #[test]
    fn gram_itself_has_unit_constant() {
        let m = spd(6);
        let r = inf_sup_constant(&m, &m).unwrap();
        assert!((r.beta - 1.0).abs() < 1e-13 && (r.norm - 1.0).abs() < 1e-13);
    }

    #[test]
    fn homogeneous_in_b() {
        let m = spd(5);
        let b = Mat::from_fn(5, 5, |i, j| ((3 * i + 7 * j) % 5) as f64 - 2.0 + if i == j { 3.0 } else { 0.0 });
        let one = inf_sup_constant(&b, &m).unwrap();
        let b3 = Mat::from_fn(5, 5, |i, j| 3.0 * b[(i, j)]);
        let three = inf_sup_constant(&b3, &m).unwrap();
        assert!((three.beta - 3.0 * one.beta).abs() < 1e-12 * one.beta.max(1.0));
        assert!(one.residual < 1e-12);
        assert!((energy_norm(&m, &one.extremal_trial) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_operator_has_zero_constant() {
        let m = spd(4);
        let b = Mat::from_fn(4, 4, |i, j| (i + 1) as f64 * (j + 1) as f64);
        let r = inf_sup_constant(&b, &m).unwrap();
        assert!(r.beta < 1e-7);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let m = spd(4);
        let b = Mat::zeros(3, 3);
        assert!(inf_sup_constant(&b, &m).is_err());
    }
}
