//! Plain-text campaign configs.
//!
//! A config is a list of `[name]` sections, each holding `key = value` lines.
//! `#` and `;` start comments. Every section describes one campaign.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use femlab::coefficients::{parse_convection, parse_diffusion, parse_reaction, CoefficientSet, Formulation};
use femlab::SpaceKind;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn error(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CampaignKind {
    Stability,
    Convergence,
    Lemma4,
    Duality,
    BestApprox,
}

impl FromStr for CampaignKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stability" => Ok(Self::Stability),
            "convergence" => Ok(Self::Convergence),
            "lemma4" => Ok(Self::Lemma4),
            "duality" => Ok(Self::Duality),
            "bestapprox" => Ok(Self::BestApprox),
            _ => Err(format!(
                "unknown campaign kind `{s}` (expected stability, convergence, lemma4, duality or bestapprox)"
            )),
        }
    }
}

impl fmt::Display for CampaignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Stability => "stability",
            Self::Convergence => "convergence",
            Self::Lemma4 => "lemma4",
            Self::Duality => "duality",
            Self::BestApprox => "bestapprox",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    /// Structured `m × m` mesh of the unit square.
    Structured(usize),
    /// Mesh file, uniformly refined for each further level.
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solution {
    SinSin,
    Bubble,
}

/// Inclusive bounds on a fitted slope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Optional checks; a campaign fails only on the ones that are set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assertions {
    pub beta_min: Option<f64>,
    pub beta_change: Option<f64>,
    pub flux_slope: Option<Range>,
    pub scalar_slope: Option<Range>,
    pub osc_excess: Option<f64>,
    pub max_ratio: Option<f64>,
    pub identity_tol: Option<f64>,
    pub entry_tol: Option<f64>,
    pub beta_tol: Option<f64>,
    pub constraint_tol: Option<f64>,
    pub ratio_max: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Campaign {
    pub name: String,
    /// Line of the section header, for error messages.
    pub line: usize,
    pub kind: CampaignKind,
    pub mesh: MeshSource,
    pub levels: usize,
    pub space: SpaceKind,
    pub degree: usize,
    pub diffusion: String,
    pub convection: String,
    pub reaction: String,
    pub formulation: Formulation,
    pub solution: Solution,
    pub output: PathBuf,
    pub seed: u64,
    pub samples: usize,
    pub record_runtime: bool,
    pub assertions: Assertions,
}

impl Campaign {
    pub fn coefficients(&self) -> femlab::Result<CoefficientSet> {
        Ok(CoefficientSet::new(
            parse_diffusion(&self.diffusion)?,
            parse_convection(&self.convection)?,
            parse_reaction(&self.reaction)?,
            self.formulation.clone(),
        ))
    }

    pub fn space_label(&self) -> String {
        format!("{}{} x P{}", self.space, self.degree, self.degree)
    }
}

const KEYS: &[&str] = &[
    "kind",
    "m",
    "mesh",
    "levels",
    "space",
    "degree",
    "A",
    "b",
    "gamma",
    "formulation",
    "solution",
    "output",
    "seed",
    "samples",
    "record_runtime",
    "assert_beta_min",
    "assert_beta_change",
    "assert_flux_slope",
    "assert_scalar_slope",
    "assert_osc_excess",
    "assert_max_ratio",
    "assert_identity_tol",
    "assert_entry_tol",
    "assert_beta_tol",
    "assert_constraint_tol",
    "assert_ratio_max",
];

struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, (usize, String)>,
}

impl Section {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.entries.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn parse<T: FromStr>(&self, key: &str, default: Option<T>) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            Some((line, v)) => v
                .parse()
                .map_err(|e| error(line, format!("invalid value for `{key}`: {e}"))),
            None => default.ok_or_else(|| error(self.line, format!("section [{}] is missing `{key}`", self.name))),
        }
    }

    fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.raw(key).map(|_| self.parse(key, None)).transpose()
    }

    fn range(&self, key: &str) -> Result<Option<Range>, ConfigError> {
        let Some((line, v)) = self.raw(key) else {
            return Ok(None);
        };
        let parts: Vec<&str> = v.split(',').map(str::trim).collect();
        let bad = || error(line, format!("`{key}` expects `lo, hi`, got `{v}`"));
        if parts.len() != 2 {
            return Err(bad());
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(error(line, format!("`{key}` has lo > hi")));
        }
        Ok(Some(Range { lo, hi }))
    }
}

fn split_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| error(line, "unterminated section header"))?
                .trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                return Err(error(line, format!("invalid section name `{name}`")));
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(error(line, format!("duplicate section [{name}]")));
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| error(line, format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let section = sections
            .last_mut()
            .ok_or_else(|| error(line, "key outside of any section"))?;
        if !KEYS.contains(&key) {
            return Err(error(line, format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(error(line, format!("empty value for `{key}`")));
        }
        if section.entries.insert(key.to_string(), (line, value.to_string())).is_some() {
            return Err(error(line, format!("duplicate key `{key}` in [{}]", section.name)));
        }
    }
    if sections.is_empty() {
        return Err(error(1, "config defines no campaign sections"));
    }
    Ok(sections)
}

fn campaign(section: &Section, base_dir: &Path) -> Result<Campaign, ConfigError> {
    let kind: CampaignKind = section.parse("kind", None)?;
    let mesh = match (section.raw("m"), section.raw("mesh")) {
        (Some(_), Some((line, _))) => return Err(error(line, "`m` and `mesh` are mutually exclusive")),
        (_, Some((_, path))) => MeshSource::File(base_dir.join(path)),
        _ => {
            let m: usize = section.parse("m", Some(2))?;
            if m == 0 {
                return Err(error(section.raw("m").map_or(section.line, |r| r.0), "`m` must be at least 1"));
            }
            MeshSource::Structured(m)
        }
    };
    let levels: usize = section.parse("levels", Some(3))?;
    if levels == 0 {
        return Err(error(section.raw("levels").map_or(section.line, |r| r.0), "`levels` must be at least 1"));
    }
    let space = match section.raw("space") {
        None | Some((_, "RT")) => SpaceKind::RaviartThomas,
        Some((_, "BDM")) => SpaceKind::Bdm,
        Some((line, other)) => return Err(error(line, format!("unknown space `{other}` (expected RT or BDM)"))),
    };
    let degree: usize = section.parse("degree", Some(0))?;
    let degree_line = section.raw("degree").map_or(section.line, |r| r.0);
    if space == SpaceKind::Bdm && degree == 0 {
        return Err(error(degree_line, "BDM requires degree >= 1"));
    }
    let max_degree = if kind == CampaignKind::Lemma4 { 1 } else { 3 };
    if degree > max_degree {
        return Err(error(degree_line, format!("degree {degree} not supported (at most {max_degree})")));
    }

    let text = |key: &str, default: &str| section.raw(key).map_or(default, |r| r.1).to_string();
    let (diffusion, convection, reaction) = (text("A", "identity"), text("b", "(0,0)"), text("gamma", "const(0)"));
    // Validate coefficient strings now so errors carry their line.
    for (key, value) in [("A", &diffusion), ("b", &convection), ("gamma", &reaction)] {
        let checked = match key {
            "A" => parse_diffusion(value).map(drop),
            "b" => parse_convection(value).map(drop),
            _ => parse_reaction(value).map(drop),
        };
        checked.map_err(|e| error(section.raw(key).map_or(section.line, |r| r.0), e.to_string()))?;
    }
    let formulation: Formulation = section.parse("formulation", Some(Formulation::Conservative))?;

    let solution = match section.raw("solution") {
        None | Some((_, "sin_sin")) => Solution::SinSin,
        Some((_, "bubble")) => Solution::Bubble,
        Some((line, other)) => return Err(error(line, format!("unknown solution `{other}` (expected sin_sin or bubble)"))),
    };
    let output = base_dir.join(section.raw("output").map_or_else(|| format!("{}.csv", section.name), |r| r.1.to_string()));

    let samples: usize = section.parse("samples", Some(10_000))?;
    if samples == 0 {
        return Err(error(section.raw("samples").map_or(section.line, |r| r.0), "`samples` must be positive"));
    }
    let assertions = Assertions {
        beta_min: section.optional("assert_beta_min")?,
        beta_change: section.optional("assert_beta_change")?,
        flux_slope: section.range("assert_flux_slope")?,
        scalar_slope: section.range("assert_scalar_slope")?,
        osc_excess: section.optional("assert_osc_excess")?,
        max_ratio: section.optional("assert_max_ratio")?,
        identity_tol: section.optional("assert_identity_tol")?,
        entry_tol: section.optional("assert_entry_tol")?,
        beta_tol: section.optional("assert_beta_tol")?,
        constraint_tol: section.optional("assert_constraint_tol")?,
        ratio_max: section.optional("assert_ratio_max")?,
    };
    Ok(Campaign {
        name: section.name.clone(),
        line: section.line,
        kind,
        mesh,
        levels,
        space,
        degree,
        diffusion,
        convection,
        reaction,
        formulation,
        solution,
        output,
        seed: section.parse("seed", Some(0))?,
        samples,
        record_runtime: section.parse("record_runtime", Some(false))?,
        assertions,
    })
}

/// Parses a config. Relative paths inside it resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<Vec<Campaign>, ConfigError> {
    split_sections(text)?.iter().map(|s| campaign(s, base_dir)).collect()
}

pub fn read_config(path: &Path) -> anyhow::Result<Vec<Campaign>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<Campaign>, ConfigError> {
        parse_config(text, Path::new("/work"))
    }

    #[test]
    fn defaults_fill_missing_keys() {
        let c = &parse("[poisson]\nkind = stability\n").unwrap()[0];
        assert_eq!(c.kind, CampaignKind::Stability);
        assert_eq!(c.mesh, MeshSource::Structured(2));
        assert_eq!((c.levels, c.degree, c.space), (3, 0, SpaceKind::RaviartThomas));
        assert_eq!(c.output, PathBuf::from("/work/poisson.csv"));
        assert!(!c.record_runtime);
        assert_eq!(c.assertions, Assertions::default());
    }

    #[test]
    fn full_section_round_trips() {
        let text = "\
# comment
[conv]
kind = convergence   ; trailing comment
m = 4
levels = 4
space = BDM
degree = 1
A = diag(1, 2)
b = (1, 1)
gamma = lipschitz_preset
formulation = divergence
solution = bubble
output = out/conv.csv
seed = 7
assert_flux_slope = 1.85, 2.15
assert_osc_excess = 0.85
";
        let c = &parse(text).unwrap()[0];
        assert_eq!(c.mesh, MeshSource::Structured(4));
        assert_eq!((c.levels, c.space, c.degree, c.seed), (4, SpaceKind::Bdm, 1, 7));
        assert_eq!(c.solution, Solution::Bubble);
        assert_eq!(c.assertions.flux_slope, Some(Range { lo: 1.85, hi: 2.15 }));
        assert_eq!(c.assertions.osc_excess, Some(0.85));
        assert_eq!(c.output, PathBuf::from("/work/out/conv.csv"));
        assert!(c.coefficients().is_ok());
        assert_eq!(c.space_label(), "BDM1 x P1");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("kind = stability\n", 1, "outside"),
            ("[a]\nkind = stability\nfoo = 1\n", 3, "unknown key"),
            ("[a]\nkind = stability\n\nm = two\n", 4, "invalid value"),
            ("[a]\nkind = sweep\n", 2, "unknown campaign kind"),
            ("[a]\nkind = stability\nspace = BDM\n", 1, "BDM requires"),
            ("[a]\nkind = stability\nspace = BDM\ndegree = 0\n", 4, "BDM requires"),
            ("[a]\nkind = stability\nm = 2\nm = 4\n", 4, "duplicate key"),
            ("[a]\nkind = stability\n[a]\nkind = duality\n", 3, "duplicate section"),
            ("[a\n", 1, "unterminated"),
            ("[a]\nkind = stability\nA = sideways\n", 3, "unknown diffusion"),
            ("[a]\nkind = stability\nassert_flux_slope = 2, 1\n", 3, "lo > hi"),
            ("[a]\nm = 2\n", 1, "missing `kind`"),
            ("[a]\nkind = stability\njust words\n", 3, "key = value"),
            ("", 1, "no campaign"),
        ];
        for (text, line, needle) in cases {
            let e = parse(text).unwrap_err();
            assert_eq!(e.line, line, "{text:?}: {e}");
            assert!(e.message.contains(needle), "{text:?}: {e}");
        }
    }

    #[test]
    fn mesh_file_resolves_against_config_dir() {
        let c = &parse("[a]\nkind = stability\nmesh = square.mesh\n").unwrap()[0];
        assert_eq!(c.mesh, MeshSource::File(PathBuf::from("/work/square.mesh")));
        let e = parse("[a]\nkind = stability\nm = 2\nmesh = x.mesh\n").unwrap_err();
        assert_eq!(e.line, 4);
    }
}
