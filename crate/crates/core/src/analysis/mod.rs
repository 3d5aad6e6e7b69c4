//! Stability constants, solves, error functionals and the local approximation checks.

mod constrained;
mod dual;
mod errors;
mod inf_sup;
mod lemma4;
mod solve;

pub use constrained::{constrained_flux_projection, ConstrainedProjection};
pub use dual::{discrete_dual_check, discrete_dual_check_with, DualCheck};
pub use errors::{compute_errors, divergence_approximation_gap, ErrorReport};
pub use inf_sup::{compute_inf_sup, inf_sup_constant, InfSup, StabilityReport};
pub use lemma4::{
    bdm_counterexample_search, counterexample_search, lemma4_constant, lemma4_sweep,
    random_triangle, verify_lemma4, CounterexampleReport, Lemma4Check, LocalFieldBasis,
    SweepReport, Witness, SWEEP_MAX_SHAPE,
};
pub use solve::{solve_mixed, solve_mixed_detailed, MixedSolution, SOLVE_TOLERANCE};

/// Least-squares slope of `log y` against `log x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    #[test]
    fn slope_of_power_law() {
        let h = [0.5, 0.25, 0.125];
        let e: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((super::fit_slope(&h, &e) - 2.0).abs() < 1e-13);
    }
}
