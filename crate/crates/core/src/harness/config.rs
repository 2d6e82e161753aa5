//! Flat `key = value` case configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::execution::{default_workers, ExecutionPolicy};
use crate::real::Precision;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{key}`: {message}")]
    Value { key: String, message: String },
    #[error("unknown case `{0}` (expected dambreak2d, dambreak3d-obstacle, hydrostatic or a config path)")]
    UnknownCase(String),
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// Built-in case files.
const DAMBREAK_2D: &str = include_str!("../../cases/dambreak2d.conf");
const DAMBREAK_3D_OBSTACLE: &str = include_str!("../../cases/dambreak3d-obstacle.conf");
const HYDROSTATIC: &str = include_str!("../../cases/hydrostatic.conf");

pub const BUILTIN_CASES: [&str; 3] = ["dambreak2d", "dambreak3d-obstacle", "hydrostatic"];

/// Policy selector as written in a config file; workers are kept apart.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyKind {
    Seq,
    Par,
    Device,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Seq => "seq",
            PolicyKind::Par => "par",
            PolicyKind::Device => "device",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "seq" | "sequenced" => Ok(PolicyKind::Seq),
            "par" | "parallel" => Ok(PolicyKind::Par),
            "device" | "parallel_device" => Ok(PolicyKind::Device),
            other => Err(format!("unknown policy `{other}` (expected seq, par or device)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseConfig {
    /// Case identifier; also used as the report label.
    pub case: String,
    pub citation: Option<String>,
    /// Tank extents, one per axis; the last axis is vertical.
    pub domain: Vec<f64>,
    pub water_min: Vec<f64>,
    pub water_max: Vec<f64>,
    pub obstacle: Option<(Vec<f64>, Vec<f64>)>,
    pub dp: f64,
    pub h_ratio: f64,
    /// Gravity magnitude, acting along the negative last axis.
    pub gravity: f64,
    pub end_time: f64,
    pub policy: PolicyKind,
    pub workers: usize,
    pub precision: Precision,
    pub sort_every: u64,
    pub reinit_every: u64,
    pub out_dir: Option<PathBuf>,
    pub probes: Vec<Vec<f64>>,
    pub snapshots: usize,
    pub rho0: f64,
    /// Sound speed; `10 sqrt(2 g H)` of the water column when unset.
    pub c0: Option<f64>,
    pub alpha: f64,
    pub acoustic_cfl: f64,
    pub advective_cfl: f64,
    pub dt_max: f64,
    pub fixed_dt: Option<f64>,
    /// Start from hydrostatic density instead of `ρ0`.
    pub hydrostatic_init: bool,
    pub wall_layers: Option<usize>,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self {
            case: "custom".into(),
            citation: None,
            domain: Vec::new(),
            water_min: Vec::new(),
            water_max: Vec::new(),
            obstacle: None,
            dp: 0.0,
            h_ratio: 1.3,
            gravity: 9.81,
            end_time: 1.0,
            policy: PolicyKind::Seq,
            workers: default_workers(),
            precision: Precision::Double,
            sort_every: 100,
            reinit_every: 200,
            out_dir: None,
            probes: Vec::new(),
            snapshots: 0,
            rho0: 1000.0,
            c0: None,
            alpha: 0.02,
            acoustic_cfl: 0.6,
            advective_cfl: 0.25,
            dt_max: 0.01,
            fixed_dt: None,
            hydrostatic_init: false,
            wall_layers: None,
        }
    }
}

fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{}`: {e}", t.trim())))
        .collect()
}

fn parse_value<T: FromStr>(key: &str, text: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    text.parse::<T>().map_err(|e| ConfigError::Value {
        key: key.to_string(),
        message: e.to_string(),
    })
}

fn list_value(key: &str, text: &str) -> Result<Vec<f64>, ConfigError> {
    parse_list(text).map_err(|message| ConfigError::Value {
        key: key.to_string(),
        message,
    })
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

impl CaseConfig {
    /// Loads a built-in case by name or a config file by path.
    pub fn resolve(name_or_path: &str) -> Result<Self, ConfigError> {
        match name_or_path {
            "dambreak2d" => Self::parse(DAMBREAK_2D),
            "dambreak3d-obstacle" => Self::parse(DAMBREAK_3D_OBSTACLE),
            "hydrostatic" => Self::parse(HYDROSTATIC),
            other => {
                let path = Path::new(other);
                if path.is_file() {
                    Self::from_path(path)
                } else {
                    Err(ConfigError::UnknownCase(other.to_string()))
                }
            }
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = CaseConfig::default();
        let mut obstacle_min = None;
        let mut obstacle_max = None;
        for (index, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: index + 1,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "obstacle_min" => obstacle_min = Some(list_value(key, value)?),
                "obstacle_max" => obstacle_max = Some(list_value(key, value)?),
                _ => cfg.set(key, value)?,
            }
        }
        match (obstacle_min, obstacle_max) {
            (Some(lo), Some(hi)) => cfg.obstacle = Some((lo, hi)),
            (None, None) => {}
            _ => return Err(ConfigError::Invalid("obstacle_min and obstacle_max must be given together".into())),
        }
        if cfg.domain.is_empty() {
            return Err(ConfigError::Missing("domain"));
        }
        if cfg.water_min.is_empty() {
            return Err(ConfigError::Missing("water_min"));
        }
        if cfg.water_max.is_empty() {
            return Err(ConfigError::Missing("water_max"));
        }
        if cfg.dp == 0.0 {
            return Err(ConfigError::Missing("dp"));
        }
        Ok(cfg)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let optional = |v: &str| v.is_empty() || v == "none";
        match key {
            "case" => self.case = value.to_string(),
            "citation" => self.citation = Some(value.to_string()),
            "domain" => self.domain = list_value(key, value)?,
            "water_min" => self.water_min = list_value(key, value)?,
            "water_max" => self.water_max = list_value(key, value)?,
            "dp" => self.dp = parse_value(key, value)?,
            "h_ratio" => self.h_ratio = parse_value(key, value)?,
            "gravity" => self.gravity = parse_value(key, value)?,
            "end_time" => self.end_time = parse_value(key, value)?,
            "policy" => self.policy = parse_value(key, value)?,
            "workers" => self.workers = parse_value(key, value)?,
            "precision" => self.precision = parse_value(key, value)?,
            "sort_every" => self.sort_every = parse_value(key, value)?,
            "reinit_every" => self.reinit_every = parse_value(key, value)?,
            "out_dir" => self.out_dir = (!optional(value)).then(|| PathBuf::from(value)),
            "snapshots" => self.snapshots = parse_value(key, value)?,
            "rho0" => self.rho0 = parse_value(key, value)?,
            "c0" => self.c0 = if optional(value) { None } else { Some(parse_value(key, value)?) },
            "alpha" => self.alpha = parse_value(key, value)?,
            "acoustic_cfl" => self.acoustic_cfl = parse_value(key, value)?,
            "advective_cfl" => self.advective_cfl = parse_value(key, value)?,
            "dt_max" => self.dt_max = parse_value(key, value)?,
            "fixed_dt" => self.fixed_dt = if optional(value) { None } else { Some(parse_value(key, value)?) },
            "hydrostatic_init" => self.hydrostatic_init = parse_value(key, value)?,
            "wall_layers" => {
                self.wall_layers = if optional(value) { None } else { Some(parse_value(key, value)?) }
            }
            "probes" => {
                self.probes = value
                    .split(';')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(|p| list_value(key, p))
                    .collect::<Result<_, _>>()?
            }
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.domain.len()
    }

    pub fn h(&self) -> f64 {
        self.h_ratio * self.dp
    }

    pub fn water_height(&self) -> f64 {
        let d = self.dimension() - 1;
        self.water_max[d] - self.water_min[d]
    }

    pub fn sound_speed(&self) -> f64 {
        self.c0
            .unwrap_or_else(|| 10.0 * (2.0 * self.gravity * self.water_height()).sqrt())
    }

    pub fn execution_policy(&self) -> ExecutionPolicy {
        match self.policy {
            PolicyKind::Seq => ExecutionPolicy::Sequenced,
            PolicyKind::Par => ExecutionPolicy::Parallel { workers: self.workers },
            PolicyKind::Device => ExecutionPolicy::ParallelDevice { workers: self.workers },
        }
    }

    /// Wall layers: at least `ceil(2h / dp)`.
    pub fn layers(&self) -> usize {
        let needed = (2.0 * self.h_ratio - 1e-9).ceil() as usize;
        self.wall_layers.unwrap_or(needed).max(needed)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = self.dimension();
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if d != 2 && d != 3 {
            return invalid(format!("domain must have 2 or 3 extents, got {d}"));
        }
        if self.water_min.len() != d || self.water_max.len() != d {
            return invalid("water_min and water_max must match the domain dimension".into());
        }
        if !(self.dp > 0.0) {
            return invalid(format!("dp must be positive, got {}", self.dp));
        }
        if !(self.h_ratio > 0.0) {
            return invalid(format!("h_ratio must be positive, got {}", self.h_ratio));
        }
        if !(self.end_time >= 0.0 && self.end_time.is_finite()) {
            return invalid(format!("end_time must be non-negative, got {}", self.end_time));
        }
        if !(self.gravity >= 0.0) {
            return invalid(format!("gravity must be non-negative, got {}", self.gravity));
        }
        if self.policy != PolicyKind::Seq && self.workers == 0 {
            return invalid("workers must be at least 1".into());
        }
        for k in 0..d {
            if !(self.domain[k] > 0.0) {
                return invalid(format!("domain extent {k} must be positive"));
            }
            let (lo, hi) = (self.water_min[k], self.water_max[k]);
            if !(lo >= 0.0 && hi <= self.domain[k] && hi > lo) {
                return invalid(format!("water column axis {k} [{lo}, {hi}] is not inside the tank"));
            }
            if (hi - lo) / self.dp < 4.0 {
                return invalid(format!(
                    "dp = {} resolves fewer than 4 particles across the water column on axis {k}",
                    self.dp
                ));
            }
        }
        if let Some((lo, hi)) = &self.obstacle {
            if lo.len() != d || hi.len() != d || (0..d).any(|k| !(hi[k] > lo[k])) {
                return invalid("obstacle bounds must match the dimension and be non-empty".into());
            }
        }
        if let Some(p) = self.probes.iter().find(|p| p.len() != d) {
            return invalid(format!("probe {p:?} does not match the dimension"));
        }
        if self.c0.is_none() && self.water_height() <= 0.0 {
            return invalid("cannot derive c0 without water height".into());
        }
        Ok(())
    }

    /// Serializes back to the file format; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("case", self.case.clone());
        if let Some(c) = &self.citation {
            line("citation", c.clone());
        }
        line("domain", join(&self.domain));
        line("water_min", join(&self.water_min));
        line("water_max", join(&self.water_max));
        if let Some((lo, hi)) = &self.obstacle {
            line("obstacle_min", join(lo));
            line("obstacle_max", join(hi));
        }
        line("dp", self.dp.to_string());
        line("h_ratio", self.h_ratio.to_string());
        line("gravity", self.gravity.to_string());
        line("end_time", self.end_time.to_string());
        line("policy", self.policy.as_str().into());
        line("workers", self.workers.to_string());
        line("precision", self.precision.to_string());
        line("sort_every", self.sort_every.to_string());
        line("reinit_every", self.reinit_every.to_string());
        if let Some(dir) = &self.out_dir {
            line("out_dir", dir.display().to_string());
        }
        if !self.probes.is_empty() {
            line("probes", self.probes.iter().map(|p| join(p)).collect::<Vec<_>>().join("; "));
        }
        line("snapshots", self.snapshots.to_string());
        line("rho0", self.rho0.to_string());
        if let Some(c0) = self.c0 {
            line("c0", c0.to_string());
        }
        line("alpha", self.alpha.to_string());
        line("acoustic_cfl", self.acoustic_cfl.to_string());
        line("advective_cfl", self.advective_cfl.to_string());
        line("dt_max", self.dt_max.to_string());
        if let Some(dt) = self.fixed_dt {
            line("fixed_dt", dt.to_string());
        }
        line("hydrostatic_init", self.hydrostatic_init.to_string());
        if let Some(l) = self.wall_layers {
            line("wall_layers", l.to_string());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_cases_parse_and_validate() {
        for name in BUILTIN_CASES {
            let cfg = CaseConfig::resolve(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.case, name);
        }
        let kleefsman = CaseConfig::resolve("dambreak3d-obstacle").unwrap();
        assert!(kleefsman.citation.as_deref().unwrap().contains("Kleefsman"));
        assert_eq!(kleefsman.domain, vec![3.22, 1.0, 1.0]);
        assert_eq!(kleefsman.probes.len(), 4);
    }

    #[test]
    fn round_trip_through_text() {
        let mut cfg = CaseConfig::resolve("dambreak3d-obstacle").unwrap();
        cfg.fixed_dt = Some(1e-4);
        cfg.out_dir = Some("runs/a".into());
        cfg.c0 = Some(31.5);
        assert_eq!(CaseConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = CaseConfig::parse("# tank\n\ndomain = 1, 1 # m\nwater_min = 0,0\nwater_max = 0.5, 0.5\ndp = 0.05\n").unwrap();
        assert_eq!(cfg.domain, vec![1.0, 1.0]);
        assert_eq!(cfg.h(), 1.3 * 0.05);
    }

    #[test]
    fn errors_are_specific() {
        assert!(matches!(CaseConfig::parse("domain 1,1"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(CaseConfig::parse("colour = red"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(CaseConfig::parse("dp = 0.1"), Err(ConfigError::Missing("domain"))));
        assert!(matches!(
            CaseConfig::parse("domain = 1, x"),
            Err(ConfigError::Value { .. })
        ));
        assert!(matches!(CaseConfig::resolve("no-such-case"), Err(ConfigError::UnknownCase(_))));
    }

    #[test]
    fn coarse_spacing_rejected() {
        let mut cfg = CaseConfig::resolve("dambreak2d").unwrap();
        cfg.dp = 0.3;
        assert!(cfg.validate().is_err());
        cfg.dp = 0.25;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn derived_quantities() {
        let cfg = CaseConfig::resolve("dambreak2d").unwrap();
        assert_eq!(cfg.layers(), 3);
        assert!((cfg.sound_speed() - 10.0 * (2.0f64 * 9.81).sqrt()).abs() < 1e-12);
        assert_eq!(cfg.execution_policy(), ExecutionPolicy::Sequenced);
    }
}
