//! TOML run configuration and its resolution into a [`CaseStudy`].

use std::path::{Path, PathBuf};

use frfpce::dynsys::{FrequencyGrid, FrequencyUnit};
use frfpce::study::{
    link_pattern, point_pattern, six_dof, two_dof, CaseStudy, Contribution, MatrixKind, ParametricSystem,
    RandomInputSpec, RandomParameter,
};
use frfpce::surrogate::SurrogateSettings;
use frfpce::{Error, Result};
use nalgebra::DMatrix;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in case (`2dof` or `6dof`); mutually exclusive with `system`.
    pub case: Option<String>,
    pub seed: Option<u64>,
    pub ed_size: Option<usize>,
    pub reference_size: Option<usize>,
    /// Design sizes of the convergence study.
    pub ed_sizes: Option<Vec<usize>>,
    pub damping_scale: Option<f64>,
    pub out: Option<PathBuf>,
    /// CSV of physical input points, one column per parameter name.
    pub points: Option<PathBuf>,
    pub grid: Option<GridConfig>,
    pub surrogate: Option<SurrogateSettings>,
    pub parameters: Option<Vec<RandomParameter>>,
    pub system: Option<SystemConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    #[serde(default)]
    pub unit: UnitConfig,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
pub enum UnitConfig {
    #[default]
    #[serde(rename = "rad/s")]
    RadPerSec,
    #[serde(rename = "hz")]
    Hz,
}

/// Matrices `M, V, K = base + Σ x_p · pattern`, 0-based DOF indices.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub dofs: usize,
    pub mass: Option<Vec<Vec<f64>>>,
    pub damping: Option<Vec<Vec<f64>>>,
    pub stiffness: Option<Vec<Vec<f64>>>,
    pub force_dofs: Vec<usize>,
    pub output_dofs: Vec<usize>,
    #[serde(default)]
    pub contributions: Vec<ContributionConfig>,
}

/// `link = [a]` grounds DOF `a`, `link = [a, b]` connects two DOFs,
/// `pattern` gives the full matrix.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContributionConfig {
    pub parameter: String,
    pub matrix: MatrixKind,
    pub link: Option<Vec<usize>>,
    pub pattern: Option<Vec<Vec<f64>>>,
}

/// Values given on the command line; they win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub ed_size: Option<usize>,
    pub reference_size: Option<usize>,
    pub damping_scale: Option<f64>,
    pub out: Option<PathBuf>,
}

/// Everything a subcommand needs, with defaults applied.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub case: CaseStudy,
    pub seed: u64,
    pub reference_size: usize,
    pub ed_sizes: Vec<usize>,
    pub out: PathBuf,
    pub points: Option<PathBuf>,
}

pub fn load(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.to_string().trim_end())))
}

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn matrix(name: &str, rows: Option<&Vec<Vec<f64>>>, n: usize) -> Result<DMatrix<f64>> {
    let Some(rows) = rows else {
        return Ok(DMatrix::zeros(n, n));
    };
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(config(format!("system.{name} must be {n}×{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn system(cfg: &SystemConfig, inputs: &RandomInputSpec) -> Result<ParametricSystem> {
    let n = cfg.dofs;
    if n == 0 {
        return Err(config("system.dofs must be positive"));
    }
    let names = inputs.names();
    let mut contributions = Vec::with_capacity(cfg.contributions.len());
    for (k, c) in cfg.contributions.iter().enumerate() {
        let parameter = names
            .iter()
            .position(|p| *p == c.parameter)
            .ok_or_else(|| config(format!("system.contributions[{k}].parameter: unknown parameter `{}`", c.parameter)))?;
        let in_range = |d: &usize| *d < n;
        let pattern = match (&c.link, &c.pattern) {
            (Some(link), None) if link.iter().all(in_range) => match link.as_slice() {
                [a] if c.matrix == MatrixKind::Mass => point_pattern(n, *a),
                [a] => link_pattern(n, *a, None),
                [a, b] if a != b => link_pattern(n, *a, Some(*b)),
                _ => return Err(config(format!("system.contributions[{k}].link must name one or two distinct DOFs"))),
            },
            (Some(_), None) => return Err(config(format!("system.contributions[{k}].link: DOF out of range"))),
            (None, Some(rows)) => matrix(&format!("contributions[{k}].pattern"), Some(rows), n)?,
            _ => return Err(config(format!("system.contributions[{k}]: give exactly one of `link` or `pattern`"))),
        };
        contributions.push(Contribution { parameter, matrix: c.matrix, pattern });
    }
    if cfg.force_dofs.is_empty() || cfg.output_dofs.is_empty() {
        return Err(config("system.force_dofs and system.output_dofs must not be empty"));
    }
    if cfg.force_dofs.iter().chain(&cfg.output_dofs).any(|&d| d >= n) {
        return Err(config("system.force_dofs/output_dofs: DOF out of range"));
    }
    Ok(ParametricSystem {
        mass: matrix("mass", cfg.mass.as_ref(), n)?,
        damping: matrix("damping", cfg.damping.as_ref(), n)?,
        stiffness: matrix("stiffness", cfg.stiffness.as_ref(), n)?,
        contributions,
        force_dofs: cfg.force_dofs.clone(),
        output_dofs: cfg.output_dofs.clone(),
    })
}

fn grid(cfg: &GridConfig) -> Result<FrequencyGrid> {
    let unit = match cfg.unit {
        UnitConfig::RadPerSec => FrequencyUnit::RadPerSec,
        UnitConfig::Hz => FrequencyUnit::Hz,
    };
    FrequencyGrid::from_range(cfg.start, cfg.stop, cfg.step, unit).map_err(|e| config(format!("grid: {e}")))
}

impl RunConfig {
    /// Applies overrides and defaults; `case_arg` replaces the `case` key.
    pub fn resolve(&self, case_arg: Option<&str>, o: &Overrides) -> Result<Resolved> {
        let case_name = case_arg.map(str::to_owned).or_else(|| self.case.clone());
        let damping_scale = o.damping_scale.or(self.damping_scale);
        let mut case = match (case_name.as_deref(), &self.system) {
            (Some(_), Some(_)) => return Err(config("`case` and `system` are mutually exclusive")),
            (Some("2dof"), None) => {
                if damping_scale.is_some() {
                    return Err(config("damping_scale applies to the 6dof case only"));
                }
                two_dof()
            }
            (Some("6dof"), None) => six_dof(damping_scale.unwrap_or(0.1))?,
            (Some(other), None) => return Err(config(format!("case: unknown case `{other}` (expected 2dof or 6dof)"))),
            (None, Some(sys)) => {
                let params = self.parameters.clone().ok_or_else(|| config("a custom system needs `parameters`"))?;
                let inputs = RandomInputSpec::new(params)?;
                let g = self.grid.as_ref().ok_or_else(|| config("a custom system needs `grid`"))?;
                CaseStudy {
                    name: "custom".into(),
                    system: system(sys, &inputs)?,
                    inputs,
                    grid: grid(g)?,
                    settings: SurrogateSettings::default(),
                    ed_size: 40,
                }
            }
            (None, None) => return Err(config("no system: set `case` or define `system`")),
        };
        if self.system.is_none() {
            if self.parameters.is_some() {
                return Err(config("`parameters` only applies to a custom system"));
            }
            if let Some(g) = &self.grid {
                case.grid = grid(g)?;
            }
        }
        if let Some(s) = &self.surrogate {
            case.settings = s.clone();
        }
        case.settings.stage1.validate()?;
        case.settings.stage2.validate()?;
        if let Some(n) = o.ed_size.or(self.ed_size) {
            case.ed_size = n;
        }
        let reference_size = o.reference_size.or(self.reference_size).unwrap_or(2000);
        if reference_size == 0 {
            return Err(config("reference_size must be positive"));
        }
        let ed_sizes = self.ed_sizes.clone().unwrap_or_else(|| vec![case.ed_size]);
        if ed_sizes.is_empty() {
            return Err(config("ed_sizes must not be empty"));
        }
        Ok(Resolved {
            case,
            seed: o.seed.or(self.seed).unwrap_or(1),
            reference_size,
            ed_sizes,
            out: o.out.clone().or_else(|| self.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
            points: self.points.clone(),
        })
    }
}

/// Reads physical input points; the header must hold every parameter name.
pub fn read_points(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let columns: Vec<usize> = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h.trim() == *n)
                .ok_or_else(|| config(format!("{}: missing column `{n}`", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut points = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = columns
            .iter()
            .map(|&c| {
                record.get(c).and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(|| {
                    config(format!("{}: row {}: column `{}` is not a number", path.display(), line + 1, &header[c]))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        points.push(row);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    #[test]
    fn builtin_cases_and_overrides() {
        let cfg = parse("case = \"2dof\"\nseed = 3\ned_size = 20\n").unwrap();
        let r = cfg.resolve(None, &Overrides { ed_size: Some(30), ..Default::default() }).unwrap();
        assert_eq!((r.seed, r.case.ed_size, r.reference_size), (3, 30, 2000));
        assert_eq!(r.case.grid.len(), 2501);
        let r = cfg.resolve(Some("6dof"), &Overrides { damping_scale: Some(0.01), ..Default::default() }).unwrap();
        assert_eq!(r.case.name, "6dof-d0.01");
        assert!(cfg.resolve(None, &Overrides { damping_scale: Some(0.01), ..Default::default() }).is_err());
    }

    #[test]
    fn custom_system_matches_builtin() {
        let cfg = parse(
            r#"
            [grid]
            start = 10.0
            stop = 35.0
            step = 0.01
            unit = "hz"
            [[parameters]]
            name = "k"
            family = "gaussian"
            mean = 15000.0
            cov = 0.05
            [system]
            dofs = 2
            mass = [[1.0, 0.0], [0.0, 1.0]]
            damping = [[2.0, -1.0], [-1.0, 1.0]]
            force_dofs = [0]
            output_dofs = [0, 1]
            [[system.contributions]]
            parameter = "k"
            matrix = "stiffness"
            link = [0]
            [[system.contributions]]
            parameter = "k"
            matrix = "stiffness"
            link = [0, 1]
            "#,
        )
        .unwrap();
        let r = cfg.resolve(None, &Overrides::default()).unwrap();
        let builtin = two_dof();
        assert_eq!(r.case.system, builtin.system);
        assert_eq!(r.case.grid, builtin.grid);
        assert_eq!(r.case.inputs, builtin.inputs);
    }

    #[test]
    fn malformed_configs_name_the_field() {
        let err = parse("case = \"2dof\"\nseed = \"x\"\n").unwrap_err().to_string();
        assert!(err.contains("invalid type"), "{err}");
        let err = parse("cases = \"2dof\"\n").unwrap_err().to_string();
        assert!(err.contains("cases"), "{err}");
        let err = parse("case = \"3dof\"\n").unwrap().resolve(None, &Overrides::default()).unwrap_err().to_string();
        assert!(err.contains("3dof"), "{err}");
        let err = parse("[surrogate]\nenergy = 0.9\n").unwrap_err().to_string();
        assert!(err.contains("energy"), "{err}");
    }
}
