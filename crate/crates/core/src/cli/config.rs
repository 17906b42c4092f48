use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::beamspace::{BeamKind, Normalization};
use crate::error::{Error, Result};
use crate::scenario::{default_scenario, Scenario};
use crate::sweep::{Axis, EstimatorChoice, SweepSpec};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Design,
    Estimate,
    Sweep,
    Identities,
}

impl std::str::FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_enum(s, "command")
    }
}

fn default_version() -> u32 {
    CONFIG_VERSION
}
fn default_command() -> Command {
    Command::Sweep
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_seed() -> u64 {
    1
}
fn default_dim() -> usize {
    6
}
fn default_beam() -> BeamKind {
    BeamKind::Geb
}
fn default_estimator() -> EstimatorChoice {
    EstimatorChoice::RrmmseJoint
}

/// A run configuration. Every field has a default, so `{}` is a valid
/// document describing the default dimension sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default = "default_command")]
    pub command: Command,
    /// Inline scenario; mutually exclusive with `scenario_path`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_path: Option<PathBuf>,
    #[serde(default = "SweepSpec::dimension_default")]
    pub sweep: SweepSpec,
    /// Beam used by `design` and `estimate`.
    #[serde(default = "default_beam")]
    pub beam: BeamKind,
    /// Beamspace dimension used by `design` and `estimate`.
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
    /// Estimator used by `estimate`.
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorChoice,
    #[serde(default)]
    pub export_pattern: bool,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub mc_trials: Option<usize>,
    pub axis: Option<String>,
    pub grid: Option<String>,
    pub beam: Option<String>,
    pub estimator: Option<String>,
    pub dim: Option<usize>,
    pub export_pattern: bool,
}

fn parse_enum<T: for<'de> Deserialize<'de>>(s: &str, what: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
        .map_err(|_| Error::Config(format!("invalid {what} `{s}`")))
}

/// Parses a comma-separated list, or `start:stop[:step]` inclusive ranges.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("invalid grid `{s}`: expected `a,b,c` or `start:stop[:step]`"));
    if s.contains(':') {
        let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        let (start, stop, step) = match parts.as_slice() {
            [a, b] => (*a, *b, 1.0),
            [a, b, c] => (*a, *b, *c),
            _ => return Err(bad()),
        };
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + step * i as f64).collect());
    }
    s.split(',').filter(|p| !p.trim().is_empty()).map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect()
}

/// Grid used when only the axis is given.
pub fn default_grid(axis: Axis) -> Vec<f64> {
    let range = |a: i32, b: i32, step: i32| (a..=b).step_by(step as usize).map(f64::from).collect();
    match axis {
        Axis::Dimension => range(4, 20, 1),
        Axis::SnrDb => range(-10, 30, 5),
        Axis::InrDb => range(0, 20, 5),
        Axis::SeparationDeg => range(2, 20, 2),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (this build reads version {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(c) = o.command {
            self.command = c;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = o.threads {
            if t == 0 {
                return Err(Error::Config("threads must be at least 1".into()));
            }
            self.threads = Some(t);
        }
        if let Some(m) = o.mc_trials {
            self.sweep.mc_trials = m;
        }
        if let Some(a) = &o.axis {
            let axis: Axis = parse_enum(a, "axis")?;
            if axis != self.sweep.axis && o.grid.is_none() {
                self.sweep.grid = default_grid(axis);
            }
            self.sweep.axis = axis;
        }
        if let Some(g) = &o.grid {
            self.sweep.grid = parse_grid(g)?;
        }
        if let Some(b) = &o.beam {
            let kinds: Vec<BeamKind> = b.split(',').map(|x| parse_enum(x, "beam")).collect::<Result<_>>()?;
            if kinds.is_empty() {
                return Err(Error::Config("empty beam list".into()));
            }
            self.beam = kinds[0];
            self.sweep.beams = kinds;
        }
        if let Some(e) = &o.estimator {
            let kinds: Vec<EstimatorChoice> =
                e.split(',').map(|x| parse_enum(x, "estimator")).collect::<Result<_>>()?;
            if kinds.is_empty() {
                return Err(Error::Config("empty estimator list".into()));
            }
            self.estimator = kinds[0];
            self.sweep.estimators = kinds;
        }
        if let Some(d) = o.dim {
            self.dim = d;
            self.sweep.dim = d;
        }
        if o.export_pattern {
            self.export_pattern = true;
        }
        Ok(())
    }

    /// Loads the referenced scenario (or the default one) and returns a
    /// self-contained copy of the configuration with it inlined.
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<RunConfig> {
        let scenario = match (&self.scenario, &self.scenario_path) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `scenario` or `scenario_path`, not both".into())),
            (Some(s), None) => s.clone(),
            (None, Some(p)) => {
                let path = match base_dir {
                    Some(d) if p.is_relative() => d.join(p),
                    _ => p.clone(),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("scenario file {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("scenario file {}: {e}", path.display())))?
            }
            (None, None) => default_scenario(),
        };
        scenario.validate().map_err(|e| Error::Config(e.to_string()))?;
        let n = scenario.array.num_elements;
        if self.dim == 0 || self.dim > n {
            return Err(Error::Config(format!("dim {} must be in 1..={n}", self.dim)));
        }
        self.sweep.validate(&scenario)?;
        Ok(RunConfig { scenario: Some(scenario), scenario_path: None, ..self.clone() })
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario.clone().unwrap_or_else(default_scenario)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default_sweep() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c.command, Command::Sweep);
        assert_eq!(c.sweep.axis, Axis::Dimension);
        assert_eq!(c.sweep.grid, default_grid(Axis::Dimension));
        assert_eq!(c.resolve(None).unwrap().scenario.unwrap(), default_scenario());
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = RunConfig::from_json(r#"{"sead": 3}"#).unwrap_err().to_string();
        assert!(e.contains("sead"), "{e}");
        let e = RunConfig::from_json(r#"{"sweep": {"axis": "dimension", "grid": [4], "estimators": [], "beams": [], "dim": 4, "target": "full", "extra": 1}}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("extra"), "{e}");
    }

    #[test]
    fn invalid_axis_is_named() {
        let mut c = RunConfig::default();
        let o = Overrides { axis: Some("diagonal".into()), ..Default::default() };
        let e = c.apply(&o).unwrap_err().to_string();
        assert!(e.contains("axis") && e.contains("diagonal"), "{e}");
        let e = RunConfig::from_json(r#"{"sweep": {"axis": "diagonal", "grid": [], "estimators": [], "beams": [], "dim": 1, "target": "full"}}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("diagonal"), "{e}");
    }

    #[test]
    fn wrong_version_is_rejected() {
        assert!(matches!(RunConfig::from_json(r#"{"version": 9}"#), Err(Error::Config(_))));
    }

    #[test]
    fn effective_config_round_trips() {
        let mut c = RunConfig::default();
        c.apply(&Overrides { axis: Some("inr_db".into()), seed: Some(9), threads: Some(2), ..Default::default() }).unwrap();
        let r = c.resolve(None).unwrap();
        let back = RunConfig::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("4:8").unwrap(), vec![4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(parse_grid("0:20:5").unwrap(), vec![0.0, 5.0, 10.0, 15.0, 20.0]);
        assert_eq!(parse_grid("1, 2.5,3").unwrap(), vec![1.0, 2.5, 3.0]);
        assert!(parse_grid("a,b").is_err());
        assert!(parse_grid("5:1").is_err());
    }

    #[test]
    fn out_of_range_dimension_grid_is_a_config_error() {
        let mut c = RunConfig::default();
        c.sweep.grid = vec![0.0];
        assert!(matches!(c.resolve(None), Err(Error::Config(_))));
        c.sweep.grid = vec![4.5];
        assert!(matches!(c.resolve(None), Err(Error::Config(_))));
    }
}
