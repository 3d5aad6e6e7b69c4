//! Experiment driver for femlab: parses campaign configs, runs them and
//! writes CSV tables plus a human-readable summary.

pub mod campaign;
pub mod config;
pub mod table;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use femlab::Triangulation;

pub use campaign::{lemma4_outcome, run_campaign, CampaignOutcome};
pub use config::{parse_config, read_config, Campaign, CampaignKind, ConfigError};
pub use table::{Row, HEADER};

/// Environment variable capping the worker pool.
pub const WORKERS_ENV: &str = "FEMLAB_WORKERS";

/// Sizes the global rayon pool from `FEMLAB_WORKERS`, if set.
pub fn configure_workers() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow::anyhow!("{WORKERS_ENV} must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

pub struct RunReport {
    pub outcomes: Vec<CampaignOutcome>,
    /// CSV files written, in order of first use.
    pub written: Vec<PathBuf>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(CampaignOutcome::passed)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for o in &self.outcomes {
            for line in &o.summary {
                let _ = writeln!(out, "{line}");
            }
            if o.passed() {
                let _ = writeln!(out, "  PASS");
            } else {
                for f in &o.failures {
                    let _ = writeln!(out, "  FAIL {f}");
                }
            }
        }
        for path in &self.written {
            let _ = writeln!(out, "wrote {}", path.display());
        }
        out
    }
}

/// Runs campaigns in order. Campaigns sharing an output path share one CSV.
pub fn run_campaigns(campaigns: &[Campaign]) -> anyhow::Result<RunReport> {
    let outcomes = campaigns.iter().map(run_campaign).collect::<anyhow::Result<Vec<_>>>()?;
    let mut files: Vec<(PathBuf, Vec<Row>)> = Vec::new();
    for (c, o) in campaigns.iter().zip(&outcomes) {
        match files.iter_mut().find(|(p, _)| *p == c.output) {
            Some((_, rows)) => rows.extend(o.rows.iter().cloned()),
            None => files.push((c.output.clone(), o.rows.clone())),
        }
    }
    for (path, rows) in &files {
        table::write_csv(path, rows).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    }
    Ok(RunReport {
        outcomes,
        written: files.into_iter().map(|(p, _)| p).collect(),
    })
}

pub fn run_config(path: &Path) -> anyhow::Result<RunReport> {
    run_campaigns(&read_config(path)?)
}

/// Runs the duality comparison on every campaign of a config, whatever its
/// kind. Nothing is written unless `output` is given.
pub fn run_duality(path: &Path, output: Option<&Path>) -> anyhow::Result<RunReport> {
    let mut campaigns = read_config(path)?;
    for c in &mut campaigns {
        c.kind = CampaignKind::Duality;
    }
    let outcomes = campaigns.iter().map(run_campaign).collect::<anyhow::Result<Vec<_>>>()?;
    let mut written = Vec::new();
    if let Some(path) = output {
        let rows: Vec<Row> = outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect();
        table::write_csv(path, &rows).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
        written.push(path.to_path_buf());
    }
    Ok(RunReport { outcomes, written })
}

pub fn mesh_info(mesh: &Triangulation) -> femlab::Result<String> {
    let boundary = mesh.boundary_edge_flags().iter().filter(|&&b| b).count();
    let min_h = mesh.diameters().iter().copied().fold(f64::INFINITY, f64::min);
    let mut out = String::new();
    let _ = writeln!(out, "vertices          {}", mesh.num_vertices());
    let _ = writeln!(out, "triangles         {}", mesh.num_triangles());
    let _ = writeln!(out, "edges             {}", mesh.num_edges());
    let _ = writeln!(out, "boundary edges    {boundary}");
    let _ = writeln!(out, "area              {}", table::num(mesh.total_area()));
    let _ = writeln!(out, "h_max             {}", table::num(mesh.h_max()));
    let _ = writeln!(out, "h_min             {}", table::num(min_h));
    let _ = writeln!(out, "shape regularity  {}", table::num(mesh.shape_regularity()?));
    Ok(out)
}
