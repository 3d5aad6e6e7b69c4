//! CSV rows shared by every campaign kind.

use std::fmt::Write as _;
use std::path::Path;

pub const HEADER: &str =
    "campaign,level,h_max,n_dof,beta_h,flux_err,scalar_err,best_flux,osc_div,osc_u,runtime_s";

/// Twelve significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.11e}")
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Row {
    pub campaign: String,
    pub level: usize,
    pub h_max: Option<f64>,
    pub n_dof: Option<usize>,
    pub beta_h: Option<f64>,
    pub flux_err: Option<f64>,
    pub scalar_err: Option<f64>,
    pub best_flux: Option<f64>,
    pub osc_div: Option<f64>,
    pub osc_u: Option<f64>,
    pub runtime_s: Option<f64>,
}

impl Row {
    pub fn new(campaign: &str, level: usize) -> Self {
        Self {
            campaign: campaign.to_string(),
            level,
            ..Self::default()
        }
    }

    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map(num).unwrap_or_default();
        let mut line = format!("{},{},{}", self.campaign, self.level, cell(self.h_max));
        let _ = write!(line, ",{}", self.n_dof.map(|n| n.to_string()).unwrap_or_default());
        for v in [
            self.beta_h,
            self.flux_err,
            self.scalar_err,
            self.best_flux,
            self.osc_div,
            self.osc_u,
            self.runtime_s,
        ] {
            let _ = write!(line, ",{}", cell(v));
        }
        line
    }
}

pub fn render(rows: &[Row]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, rows: &[Row]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, render(rows))
}
