//! Run settings from defaults, a TOML file and command-line flags.
//!
//! Every flag has a file key of the same name with `-` replaced by `_`.
//! Keys may sit at the top level or inside tables; tables only group keys
//! and are flattened before parsing. A layer that sets `tau` clears any
//! `tau_law` from the layers below it and vice versa.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use ncvd_core::{BcMode, ProjectionMode, RtOrder, SimulationConfig, SolverKind, SourceMode};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauLaw {
    H,
    H2,
    H3,
}

impl TauLaw {
    pub fn power(self) -> i32 {
        match self {
            TauLaw::H => 1,
            TauLaw::H2 => 2,
            TauLaw::H3 => 3,
        }
    }

    /// Mesh subdivisions of the default sweep.
    pub fn default_levels(self) -> Vec<usize> {
        match self {
            TauLaw::H => vec![4, 8, 16, 32, 64],
            TauLaw::H2 => vec![2, 4, 8, 16, 32],
            TauLaw::H3 => vec![4, 8, 16],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Mms2d,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcKind {
    Homogeneous,
    Manufactured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionKind {
    ZeroTrace,
    PrescribedTrace,
    Identity,
    Rt0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverName {
    Direct,
    Gmres,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// One layer of settings. Unset fields defer to the layer below.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub n: Option<usize>,
    pub tau: Option<f64>,
    pub tau_law: Option<TauLaw>,
    pub mu: Option<f64>,
    pub kappa: Option<f64>,
    pub t_final: Option<f64>,
    pub case: Option<CaseKind>,
    pub bc: Option<BcKind>,
    pub projection: Option<ProjectionKind>,
    pub quad_degree: Option<usize>,
    pub solver: Option<SolverName>,
    pub vtk_every: Option<usize>,
    pub out: Option<PathBuf>,
    pub levels: Option<Vec<usize>>,
    pub jobs: Option<usize>,
}

impl Settings {
    /// `self` over `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        let time_step_set = self.tau.is_some() || self.tau_law.is_some();
        Settings {
            n: self.n.or(lower.n),
            tau: if time_step_set { self.tau } else { lower.tau },
            tau_law: if time_step_set { self.tau_law } else { lower.tau_law },
            mu: self.mu.or(lower.mu),
            kappa: self.kappa.or(lower.kappa),
            t_final: self.t_final.or(lower.t_final),
            case: self.case.or(lower.case),
            bc: self.bc.or(lower.bc),
            projection: self.projection.or(lower.projection),
            quad_degree: self.quad_degree.or(lower.quad_degree),
            solver: self.solver.or(lower.solver),
            vtk_every: self.vtk_every.or(lower.vtk_every),
            out: self.out.or(lower.out),
            levels: self.levels.or(lower.levels),
            jobs: self.jobs.or(lower.jobs),
        }
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Settings, ConfigError> {
        let parse_err = |message: String| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        };
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        let mut flat = toml::Table::new();
        flatten(table, &mut flat).map_err(parse_err)?;
        toml::Value::Table(flat)
            .try_into()
            .map_err(|e: toml::de::Error| parse_err(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Settings, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Built-in defaults: the manufactured case with `tau = h`.
    pub fn defaults() -> Settings {
        let d = SimulationConfig::default();
        Settings {
            n: Some(d.n),
            tau_law: Some(TauLaw::H),
            mu: Some(d.mu),
            kappa: Some(d.kappa),
            t_final: Some(d.t_final),
            case: Some(CaseKind::Mms2d),
            bc: Some(BcKind::Manufactured),
            quad_degree: Some(d.quad_degree),
            solver: Some(SolverName::Direct),
            out: Some(PathBuf::from("ncvd-out")),
            jobs: Some(1),
            ..Settings::default()
        }
    }

    /// Simulation parameters for `n` subdivisions.
    pub fn simulation(&self, n: usize) -> Result<SimulationConfig, ConfigError> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| ConfigError::Invalid(format!("{name} is not set")));
        if n == 0 {
            return Err(ConfigError::Invalid("mesh needs at least one subdivision".into()));
        }
        let bc = self.bc.unwrap_or(BcKind::Manufactured);
        let tau = match (self.tau, self.tau_law) {
            (Some(tau), _) => tau,
            (None, Some(law)) => (1.0 / n as f64).powi(law.power()),
            (None, None) => return Err(ConfigError::Invalid("either tau or tau_law must be set".into())),
        };
        let default_mode = match bc {
            BcKind::Manufactured => ProjectionMode::PrescribedNormalTrace,
            BcKind::Homogeneous => ProjectionMode::ZeroNormalTrace,
        };
        let (projection_mode, rt_order) = match self.projection {
            None => (default_mode, RtOrder::One),
            Some(ProjectionKind::ZeroTrace) => (ProjectionMode::ZeroNormalTrace, RtOrder::One),
            Some(ProjectionKind::PrescribedTrace) => (ProjectionMode::PrescribedNormalTrace, RtOrder::One),
            Some(ProjectionKind::Identity) => (ProjectionMode::Identity, RtOrder::One),
            Some(ProjectionKind::Rt0) => (default_mode, RtOrder::Zero),
        };
        let solver = match self.solver.unwrap_or(SolverName::Direct) {
            SolverName::Direct => SolverKind::Direct,
            SolverName::Gmres => SolverKind::Gmres {
                restart: 60,
                max_iter: 5000,
                tol: 1e-12,
            },
        };
        let config = SimulationConfig {
            mu: need(self.mu, "mu")?,
            kappa: need(self.kappa, "kappa")?,
            t_final: need(self.t_final, "t_final")?,
            tau,
            n,
            bc_mode: match bc {
                BcKind::Manufactured => BcMode::ManufacturedDirichlet,
                BcKind::Homogeneous => BcMode::Homogeneous,
            },
            projection_mode,
            rt_order,
            source_mode: SourceMode::Manufactured,
            quad_degree: self.quad_degree.unwrap_or(SimulationConfig::default().quad_degree),
            solver,
        };
        config.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(config)
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(SimulationConfig::default().n)
    }
}

fn flatten(table: toml::Table, out: &mut toml::Table) -> Result<(), String> {
    for (key, value) in table {
        match value {
            toml::Value::Table(inner) => flatten(inner, out)?,
            v => {
                if out.insert(key.clone(), v).is_some() {
                    return Err(format!("key `{key}` is set twice"));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Settings {
        Settings::from_toml(text, Path::new("test.toml")).unwrap()
    }

    #[test]
    fn flags_over_file_over_defaults() {
        let file = parse("n = 8\nmu = 0.5\n[physics]\nkappa = 0.2\n");
        let flags = Settings {
            n: Some(16),
            ..Settings::default()
        };
        let s = flags.over(file.over(Settings::defaults()));
        assert_eq!(s.n, Some(16));
        assert_eq!(s.mu, Some(0.5));
        assert_eq!(s.kappa, Some(0.2));
        assert_eq!(s.t_final, Some(1.0));
    }

    #[test]
    fn tau_and_law_replace_each_other() {
        let file = parse("tau = 0.01\n");
        let s = file.clone().over(Settings::defaults());
        assert_eq!((s.tau, s.tau_law), (Some(0.01), None));
        let flags = Settings {
            tau_law: Some(TauLaw::H2),
            ..Settings::default()
        };
        let s = flags.over(file.over(Settings::defaults()));
        assert_eq!((s.tau, s.tau_law), (None, Some(TauLaw::H2)));
        assert_eq!(s.simulation(4).unwrap().tau, 1.0 / 16.0);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let p = Path::new("x.toml");
        assert!(Settings::from_toml("nn = 3\n", p).is_err());
        assert!(Settings::from_toml("n = 3\n[a]\nn = 4\n", p).is_err());
        assert!(Settings::from_toml("projection = \"zero-trace\"\n", p).is_ok());
    }

    #[test]
    fn projection_defaults_follow_boundary_mode() {
        let mut s = Settings::defaults();
        assert_eq!(s.simulation(4).unwrap().projection_mode, ProjectionMode::PrescribedNormalTrace);
        s.bc = Some(BcKind::Homogeneous);
        assert_eq!(s.simulation(4).unwrap().projection_mode, ProjectionMode::ZeroNormalTrace);
        s.projection = Some(ProjectionKind::Rt0);
        let c = s.simulation(4).unwrap();
        assert_eq!((c.projection_mode, c.rt_order), (ProjectionMode::ZeroNormalTrace, RtOrder::Zero));
    }

    #[test]
    fn invalid_values_are_reported() {
        let s = Settings::defaults();
        assert!(s.simulation(0).is_err());
        let s = Settings {
            mu: Some(-1.0),
            ..Settings::defaults()
        };
        assert!(s.simulation(4).is_err());
    }
}
