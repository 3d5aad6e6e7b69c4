use crate::assembly::AssembledSystem;
use crate::dense::{energy_norm, mat_vec, LuSolver};
use crate::error::Result;

/// Solution of the discrete dual problem `⟨x, ·⟩_H = b(·, y)`.
#[derive(Clone, Debug)]
pub struct DualCheck {
    pub y: Vec<f64>,
    pub y_norm: f64,
    pub x_norm: f64,
}

impl DualCheck {
    /// `‖y‖_H / ‖x‖_H`, bounded by `1/β_h`.
    pub fn norm_ratio(&self) -> f64 {
        self.y_norm / self.x_norm
    }
}

/// Solves `Bᵀ y = M_H x` and reports `‖y‖_H`.
pub fn discrete_dual_check(sys: &AssembledSystem, x: &[f64]) -> Result<DualCheck> {
    discrete_dual_check_with(&LuSolver::new(&sys.b)?, sys, x)
}

/// As [`discrete_dual_check`], reusing a factorization of `B`.
pub fn discrete_dual_check_with(lu: &LuSolver, sys: &AssembledSystem, x: &[f64]) -> Result<DualCheck> {
    let rhs = mat_vec(&sys.m_h, x);
    let (y, _) = lu.solve_transpose(&rhs);
    Ok(DualCheck {
        y_norm: energy_norm(&sys.m_h, &y),
        x_norm: energy_norm(&sys.m_h, x),
        y,
    })
}
