//! Campaign execution: one CSV row per mesh level, plus summary lines and
//! assertion failures.

use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use femlab::analysis::{
    compute_errors, compute_inf_sup, constrained_flux_projection, fit_slope, lemma4_sweep, solve_mixed,
};
use femlab::assembly::{assemble_b, manufactured_problem, AssembledSystem, ExactScalar};
use femlab::coefficients::{CoefficientSet, Formulation};
use femlab::{FeSpace, Triangulation};
use rayon::prelude::*;

use crate::config::{Campaign, CampaignKind, MeshSource, Range, Solution};
use crate::table::{num, Row};

/// Default tolerances for checks that are intrinsic to a campaign kind.
const IDENTITY_TOL: f64 = 1e-12;
const ENTRY_TOL: f64 = 1e-13;
const BETA_TOL: f64 = 1e-9;
const CONSTRAINT_TOL: f64 = 1e-11;

/// Levels used for slope fits.
const FIT_LEVELS: usize = 3;

#[derive(Debug, Default)]
pub struct CampaignOutcome {
    pub name: String,
    pub rows: Vec<Row>,
    pub summary: Vec<String>,
    pub failures: Vec<String>,
}

impl CampaignOutcome {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Self::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn check(&mut self, ok: bool, message: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(message());
        }
    }
}

fn meshes(c: &Campaign) -> anyhow::Result<Vec<Arc<Triangulation>>> {
    match &c.mesh {
        MeshSource::Structured(m) => (0..c.levels)
            .map(|l| {
                let cells = m << l;
                Ok(Arc::new(Triangulation::structured(cells)?))
            })
            .collect(),
        MeshSource::File(path) => {
            let mut mesh = Triangulation::read(path).with_context(|| format!("reading mesh {}", path.display()))?;
            let mut out = Vec::with_capacity(c.levels);
            for l in 0..c.levels {
                if l > 0 {
                    mesh = mesh.refine_uniform();
                }
                out.push(Arc::new(mesh.clone()));
            }
            Ok(out)
        }
    }
}

fn system(c: &Campaign, mesh: Arc<Triangulation>, coeffs: &CoefficientSet) -> femlab::Result<AssembledSystem> {
    let flux = FeSpace::new(mesh.clone(), c.space, c.degree)?;
    let scalar = FeSpace::discontinuous(mesh, c.degree)?;
    assemble_b(&flux, &scalar, coeffs)
}

fn exact(c: &Campaign) -> ExactScalar {
    match c.solution {
        Solution::SinSin => ExactScalar::sin_sin(),
        Solution::Bubble => ExactScalar::bubble(),
    }
}

/// Runs `work` on every level in parallel and returns the rows in level order.
fn per_level<F>(c: &Campaign, work: F) -> anyhow::Result<Vec<Row>>
where
    F: Fn(usize, Arc<Triangulation>) -> anyhow::Result<Row> + Sync,
{
    let meshes = meshes(c)?;
    meshes
        .into_par_iter()
        .enumerate()
        .map(|(level, mesh)| {
            let start = Instant::now();
            let mut row = work(level, mesh).with_context(|| format!("campaign [{}] level {level}", c.name))?;
            if c.record_runtime {
                row.runtime_s = Some(start.elapsed().as_secs_f64());
            }
            Ok(row)
        })
        .collect()
}

pub fn run_campaign(c: &Campaign) -> anyhow::Result<CampaignOutcome> {
    let mut out = CampaignOutcome::new(&c.name);
    out.summary.push(match c.kind {
        CampaignKind::Lemma4 => format!(
            "[{}] lemma4, RT{}, {} samples, seed {}",
            c.name, c.degree, c.samples, c.seed
        ),
        _ => format!(
            "[{}] {}, {}, {} levels, A = {}, b = {}, gamma = {}, {} form",
            c.name,
            c.kind,
            c.space_label(),
            c.levels,
            c.diffusion,
            c.convection,
            c.reaction,
            c.formulation.kind()
        ),
    });
    match c.kind {
        CampaignKind::Stability => stability(c, &mut out)?,
        CampaignKind::Convergence => convergence(c, &mut out)?,
        CampaignKind::Lemma4 => lemma4(c, &mut out)?,
        CampaignKind::Duality => duality(c, &mut out)?,
        CampaignKind::BestApprox => best_approximation(c, &mut out)?,
    }
    Ok(out)
}

fn stability(c: &Campaign, out: &mut CampaignOutcome) -> anyhow::Result<()> {
    let coeffs = c.coefficients()?;
    out.rows = per_level(c, |level, mesh| {
        let sys = system(c, mesh, &coeffs)?;
        let r = compute_inf_sup(&sys)?;
        Ok(Row {
            h_max: Some(sys.h_max),
            n_dof: Some(sys.dim()),
            beta_h: Some(r.beta_h),
            ..Row::new(&c.name, level)
        })
    })?;
    let betas: Vec<f64> = out.rows.iter().map(|r| r.beta_h.unwrap_or(f64::NAN)).collect();
    for (level, b) in betas.iter().enumerate() {
        out.summary.push(format!("  level {level}: beta_h = {}", num(*b)));
    }
    if let Some(min) = c.assertions.beta_min {
        for (level, &b) in betas.iter().enumerate() {
            out.check(b > min, || format!("level {level}: beta_h = {} not above {}", num(b), num(min)));
        }
    }
    if let Some(limit) = c.assertions.beta_change {
        for level in 1..betas.len() {
            let change = (betas[level] - betas[level - 1]).abs() / betas[level - 1];
            out.check(change <= limit, || {
                format!("level {level}: relative change of beta_h {} exceeds {}", num(change), num(limit))
            });
        }
    }
    Ok(())
}

fn slope_of(rows: &[Row], value: impl Fn(&Row) -> Option<f64>) -> Option<f64> {
    let tail = &rows[rows.len().saturating_sub(FIT_LEVELS)..];
    if tail.len() < 2 {
        return None;
    }
    let h: Vec<f64> = tail.iter().map(|r| r.h_max.unwrap_or(f64::NAN)).collect();
    let e: Vec<f64> = tail.iter().map(|r| value(r).unwrap_or(f64::NAN)).collect();
    Some(fit_slope(&h, &e))
}

fn check_slope(out: &mut CampaignOutcome, label: &str, slope: Option<f64>, range: Option<Range>) {
    let Some(range) = range else { return };
    match slope {
        Some(s) => out.check(range.contains(s), || {
            format!("{label} slope {} outside [{}, {}]", num(s), num(range.lo), num(range.hi))
        }),
        None => out.failures.push(format!("{label} slope needs at least two levels")),
    }
}

fn convergence(c: &Campaign, out: &mut CampaignOutcome) -> anyhow::Result<()> {
    let coeffs = c.coefficients()?;
    let problem = manufactured_problem(&exact(c), &coeffs)?;
    out.rows = per_level(c, |level, mesh| {
        let sys = system(c, mesh, &coeffs)?.with_load(|x| (problem.f)(x))?;
        let x = solve_mixed(&sys)?;
        let e = compute_errors(&x, &problem, &sys, &coeffs)?;
        Ok(Row {
            h_max: Some(sys.h_max),
            n_dof: Some(sys.dim()),
            flux_err: Some(e.flux_error),
            scalar_err: Some(e.scalar_error),
            best_flux: Some(e.best_flux),
            osc_div: Some(e.osc_div),
            osc_u: Some(e.osc_u),
            ..Row::new(&c.name, level)
        })
    })?;
    let flux = slope_of(&out.rows, |r| r.flux_err);
    let scalar = slope_of(&out.rows, |r| r.scalar_err);
    let best = slope_of(&out.rows, |r| r.best_flux);
    let osc_div = slope_of(&out.rows, |r| r.osc_div);
    let osc_u = slope_of(&out.rows, |r| r.osc_u);
    if let Some(flux) = flux {
        out.summary.push(format!(
            "  slopes over the last {} levels: flux {}, scalar {}, best flux {}, osc_div {}, osc_u {}",
            out.rows.len().min(FIT_LEVELS),
            num(flux),
            num(scalar.unwrap_or(f64::NAN)),
            num(best.unwrap_or(f64::NAN)),
            num(osc_div.unwrap_or(f64::NAN)),
            num(osc_u.unwrap_or(f64::NAN)),
        ));
    }
    check_slope(out, "flux", flux, c.assertions.flux_slope);
    check_slope(out, "scalar", scalar, c.assertions.scalar_slope);
    if let Some(excess) = c.assertions.osc_excess {
        for (label, osc) in [("osc_div", osc_div), ("osc_u", osc_u)] {
            match (flux, osc) {
                (Some(f), Some(o)) => out.check(o >= f + excess, || {
                    format!("{label} slope {} below flux slope {} + {}", num(o), num(f), num(excess))
                }),
                _ => out.failures.push(format!("{label} slope needs at least two levels")),
            }
        }
    }
    Ok(())
}

/// Local-bound sweeps have no mesh levels: one row at level 0 whose `flux_err`
/// cell holds the largest observed ratio `‖τ − Π_k τ‖ / (C_k ‖h_T div τ‖)`.
pub fn lemma4_outcome(name: &str, k: usize, samples: usize, seed: u64, c: Option<&Campaign>) -> anyhow::Result<CampaignOutcome> {
    if k > 1 {
        bail!("lemma4 sweeps support k = 0 or 1, got {k}");
    }
    let mut out = CampaignOutcome::new(name);
    let start = Instant::now();
    let r = lemma4_sweep(k, samples, seed)?;
    let mut row = Row {
        flux_err: Some(r.max_ratio),
        ..Row::new(name, 0)
    };
    if c.is_some_and(|c| c.record_runtime) {
        row.runtime_s = Some(start.elapsed().as_secs_f64());
    }
    out.rows.push(row);
    out.summary.push(format!(
        "  k = {k}: max ratio {}, violations {}, identity residual {}",
        num(r.max_ratio),
        r.violations,
        num(r.max_identity_residual)
    ));
    out.check(r.violations == 0, || format!("{} of {samples} samples violate the bound", r.violations));
    let identity_tol = c.and_then(|c| c.assertions.identity_tol).unwrap_or(IDENTITY_TOL);
    out.check(r.max_identity_residual <= identity_tol, || {
        format!("identity residual {} exceeds {}", num(r.max_identity_residual), num(identity_tol))
    });
    if let Some(limit) = c.and_then(|c| c.assertions.max_ratio) {
        out.check(r.max_ratio <= limit, || format!("max ratio {} exceeds {}", num(r.max_ratio), num(limit)));
    }
    Ok(out)
}

fn lemma4(c: &Campaign, out: &mut CampaignOutcome) -> anyhow::Result<()> {
    let r = lemma4_outcome(&c.name, c.degree, c.samples, c.seed, Some(c))?;
    out.rows = r.rows;
    out.summary.extend(r.summary);
    out.failures = r.failures;
    Ok(())
}

/// Compares the conservative and divergence forms of the campaign's
/// coefficients; `beta_h` reports the conservative form.
fn duality(c: &Campaign, out: &mut CampaignOutcome) -> anyhow::Result<()> {
    let coeffs = c.coefficients()?;
    let cons_coeffs = coeffs.clone().with_formulation(Formulation::Conservative);
    let div_coeffs = coeffs.with_formulation(Formulation::Divergence);
    let details = std::sync::Mutex::new(vec![(0.0, 0.0, 0.0); c.levels]);
    out.rows = per_level(c, |level, mesh| {
        let cons = system(c, mesh.clone(), &cons_coeffs)?;
        let div = system(c, mesh, &div_coeffs)?;
        let nf = cons.n_flux;
        let sign = |i: usize| if i < nf { 1.0 } else { -1.0 };
        let mut entry = 0.0f64;
        for i in 0..cons.dim() {
            for j in 0..cons.dim() {
                entry = entry.max((div.b[(i, j)] - sign(i) * sign(j) * cons.b[(j, i)]).abs());
            }
        }
        let beta_cons = compute_inf_sup(&cons)?.beta_h;
        let beta_div = compute_inf_sup(&div)?.beta_h;
        details.lock().unwrap()[level] = (entry, beta_cons, beta_div);
        Ok(Row {
            h_max: Some(cons.h_max),
            n_dof: Some(cons.dim()),
            beta_h: Some(beta_cons),
            ..Row::new(&c.name, level)
        })
    })?;
    let entry_tol = c.assertions.entry_tol.unwrap_or(ENTRY_TOL);
    let beta_tol = c.assertions.beta_tol.unwrap_or(BETA_TOL);
    for (level, (entry, bc, bd)) in details.into_inner().unwrap().into_iter().enumerate() {
        out.summary.push(format!(
            "  level {level}: max |B_div - S B_cons^T S| = {}, beta_h conservative {}, divergence {}",
            num(entry),
            num(bc),
            num(bd)
        ));
        out.check(entry <= entry_tol, || {
            format!("level {level}: duality defect {} exceeds {}", num(entry), num(entry_tol))
        });
        let gap = (bc - bd).abs();
        out.check(gap <= beta_tol, || {
            format!("level {level}: |beta_cons - beta_div| = {} exceeds {}", num(gap), num(beta_tol))
        });
    }
    Ok(())
}

/// Divergence-constrained projection of `p = −∇u`, measured in the campaign's
/// `A⁻¹` norm (so any diffusion works): `flux_err` is the constrained
/// distance, `best_flux` the unconstrained one and `osc_div` the divergence
/// oscillation.
fn best_approximation(c: &Campaign, out: &mut CampaignOutcome) -> anyhow::Result<()> {
    let coeffs = c.coefficients()?;
    let u = exact(c);
    let hessian = u.hessian.clone().context("exact solution lacks second derivatives")?;
    let p = |x| {
        let g = (u.gradient)(x);
        [-g[0], -g[1]]
    };
    let div_p = |x| {
        let h = hessian(x);
        -(h[0][0] + h[1][1])
    };
    let residuals = std::sync::Mutex::new(vec![0.0; c.levels]);
    out.rows = per_level(c, |level, mesh| {
        let flux = FeSpace::new(mesh, c.space, c.degree)?;
        let r = constrained_flux_projection(p, div_p, &flux, &coeffs)?;
        residuals.lock().unwrap()[level] = r.constraint_residual;
        Ok(Row {
            h_max: Some(flux.mesh().h_max()),
            n_dof: Some(flux.dof_count()),
            flux_err: Some(r.distance),
            best_flux: Some(r.best_distance),
            osc_div: Some(r.oscillation),
            ..Row::new(&c.name, level)
        })
    })?;
    let tol = c.assertions.constraint_tol.unwrap_or(CONSTRAINT_TOL);
    for (level, (row, res)) in out.rows.iter().zip(residuals.into_inner().unwrap()).enumerate() {
        let (d, best, osc) = (
            row.flux_err.unwrap_or(f64::NAN),
            row.best_flux.unwrap_or(f64::NAN),
            row.osc_div.unwrap_or(f64::NAN),
        );
        let ratio = d / (best + osc);
        out.summary.push(format!(
            "  level {level}: constraint residual {}, ratio {}",
            num(res),
            num(ratio)
        ));
        if res > tol {
            out.failures.push(format!("level {level}: constraint residual {} exceeds {}", num(res), num(tol)));
        }
        if let Some(limit) = c.assertions.ratio_max {
            if ratio.is_nan() || ratio > limit {
                out.failures.push(format!("level {level}: ratio {} exceeds {}", num(ratio), num(limit)));
            }
        }
    }
    Ok(())
}
