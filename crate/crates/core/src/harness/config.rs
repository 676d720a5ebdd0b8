//! Experiment configuration: a flat `key = value` text format.
//!
//! Every key is required, unknown keys are rejected, and `#` starts a comment.
//! `DEFAULT_CONFIG` is the built-in default scenario.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{Model, Physics, PropagatorConfig};
use crate::fixed_point::{FixedPointConfig, InitialState};
use crate::function_space::{SpatialDomain, TimeGrid, PANEL_ORDER};
use crate::potentials::{ExternalPotential, ExternalPreset, HartreeKernel};

pub const DEFAULT_CONFIG: &str = include_str!("../../configs/default.conf");

/// Fraction of the fixed-point tolerance required of the reference solution.
pub const REFERENCE_TOLERANCE_FACTOR: f64 = 0.01;

const KEYS: &[&str] = &[
    "domain.length",
    "domain.points",
    "time.horizon",
    "time.intervals",
    "time.substeps",
    "physics.hbar",
    "physics.mass",
    "physics.orbitals",
    "physics.initial",
    "potential.external",
    "potential.v0",
    "potential.drive_amplitude",
    "potential.drive_frequency",
    "potential.wells",
    "kernel.softening",
    "kernel.truncation",
    "kernel.coupling",
    "sweep.n",
    "sweep.ref_multiplier",
    "fixed_point.tolerance",
    "fixed_point.max_iter",
    "fixed_point.damping",
    "derivative.dim_cap",
    "derivative.samples",
    "derivative.seed",
    "output.dir",
    "output.format",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!("unknown output format `{other}` (expected csv, json or both)"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Json => "json",
            Self::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub domain_length: f64,
    pub domain_points: usize,
    pub horizon: f64,
    /// Number of sample intervals `S`; there are `S + 1` sample times.
    pub intervals: usize,
    pub substeps: usize,
    pub hbar: f64,
    pub mass: f64,
    pub orbitals: usize,
    pub initial: InitialState,
    pub external: ExternalPreset,
    pub v0: f64,
    pub drive_amplitude: f64,
    pub drive_frequency: f64,
    pub wells: f64,
    pub softening: f64,
    pub truncation: f64,
    pub coupling: f64,
    pub sweep_n: Vec<usize>,
    pub ref_multiplier: usize,
    pub fixed_point: FixedPointConfig,
    pub dim_cap: usize,
    pub derivative_samples: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub output_format: OutputFormat,
}

fn field<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    let raw = map
        .get(key)
        .ok_or_else(|| Error::Config(format!("missing key `{key}`")))?;
    raw.parse()
        .map_err(|e| Error::Config(format!("bad value `{raw}` for `{key}`: {e}")))
}

impl ExperimentConfig {
    /// Parses the flat key-value format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        let sweep_n = map
            .get("sweep.n")
            .ok_or_else(|| Error::Config("missing key `sweep.n`".into()))?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Config(format!("bad entry `{}` in `sweep.n`: {e}", s.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = Self {
            domain_length: field(&map, "domain.length")?,
            domain_points: field(&map, "domain.points")?,
            horizon: field(&map, "time.horizon")?,
            intervals: field(&map, "time.intervals")?,
            substeps: field(&map, "time.substeps")?,
            hbar: field(&map, "physics.hbar")?,
            mass: field(&map, "physics.mass")?,
            orbitals: field(&map, "physics.orbitals")?,
            initial: field(&map, "physics.initial")?,
            external: field(&map, "potential.external")?,
            v0: field(&map, "potential.v0")?,
            drive_amplitude: field(&map, "potential.drive_amplitude")?,
            drive_frequency: field(&map, "potential.drive_frequency")?,
            wells: field(&map, "potential.wells")?,
            softening: field(&map, "kernel.softening")?,
            truncation: field(&map, "kernel.truncation")?,
            coupling: field(&map, "kernel.coupling")?,
            sweep_n,
            ref_multiplier: field(&map, "sweep.ref_multiplier")?,
            fixed_point: FixedPointConfig {
                tolerance: field(&map, "fixed_point.tolerance")?,
                max_iter: field(&map, "fixed_point.max_iter")?,
                damping: field(&map, "fixed_point.damping")?,
            },
            dim_cap: field(&map, "derivative.dim_cap")?,
            derivative_samples: field(&map, "derivative.samples")?,
            seed: field(&map, "derivative.seed")?,
            output_dir: PathBuf::from(field::<String>(&map, "output.dir")?),
            output_format: field(&map, "output.format")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The built-in default scenario.
    pub fn default_scenario() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("built-in default config is valid")
    }

    /// Reads a config file; the literal `default` selects the built-in one.
    pub fn load(path: &str) -> Result<Self> {
        if path == "default" {
            return Ok(Self::default_scenario());
        }
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.domain_length > 0.0) {
            return bad(format!("domain.length must be positive, got {}", self.domain_length));
        }
        if self.domain_points == 0 || self.domain_points % PANEL_ORDER != 0 {
            return bad(format!("domain.points must be a positive multiple of {PANEL_ORDER}"));
        }
        if !(self.horizon > 0.0) || self.intervals == 0 || self.substeps == 0 {
            return bad("time.horizon, time.intervals and time.substeps must be positive".into());
        }
        if !(self.hbar > 0.0 && self.mass > 0.0) || self.orbitals == 0 {
            return bad("physics.hbar, physics.mass and physics.orbitals must be positive".into());
        }
        if self.sweep_n.is_empty() || self.sweep_n[0] == 0 || self.sweep_n.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sweep.n must be a nonempty strictly increasing list of positive integers".into());
        }
        if self.ref_multiplier < 4 {
            return bad(format!("sweep.ref_multiplier must be at least 4, got {}", self.ref_multiplier));
        }
        let required = 4 * self.n_ref();
        if self.domain_points < required {
            return bad(format!(
                "domain.points = {} cannot resolve the reference basis (n_ref = {}, need at least {required})",
                self.domain_points,
                self.n_ref()
            ));
        }
        if self.truncation < self.domain_length {
            return bad("kernel.truncation must be at least domain.length".into());
        }
        FixedPointConfig::new(self.fixed_point.tolerance, self.fixed_point.max_iter, self.fixed_point.damping)
            .map_err(|e| Error::Config(e.to_string()))?;
        HartreeKernel::new(self.softening, self.truncation, self.coupling).map_err(|e| Error::Config(e.to_string()))?;
        if self.derivative_samples == 0 {
            return bad("derivative.samples must be positive".into());
        }
        Ok(())
    }

    pub fn n_ref(&self) -> usize {
        self.ref_multiplier * self.sweep_n.last().copied().unwrap_or(0)
    }

    pub fn reference_tolerance(&self) -> f64 {
        REFERENCE_TOLERANCE_FACTOR * self.fixed_point.tolerance
    }

    pub fn reference_fixed_point(&self) -> FixedPointConfig {
        FixedPointConfig {
            tolerance: self.reference_tolerance(),
            ..self.fixed_point
        }
    }

    pub fn external_potential(&self) -> ExternalPotential {
        let mut v = match self.external {
            ExternalPreset::Zero => ExternalPotential::zero(self.domain_length),
            ExternalPreset::StaticWell => ExternalPotential::static_well(self.domain_length, self.v0),
            ExternalPreset::DrivenWell => {
                ExternalPotential::driven_well(self.domain_length, self.v0, self.drive_amplitude, self.drive_frequency)
            }
        };
        v.wells = self.wells;
        v
    }

    pub fn kernel(&self) -> Result<HartreeKernel> {
        HartreeKernel::new(self.softening, self.truncation, self.coupling)
    }

    pub fn domain(&self) -> Result<Arc<SpatialDomain>> {
        Ok(Arc::new(SpatialDomain::new(self.domain_length, self.domain_points)?))
    }

    /// The model with `intervals` and `substeps` taken from the config.
    pub fn model(&self) -> Result<Arc<Model>> {
        self.model_with_time(self.intervals, self.substeps)
    }

    pub fn model_with_time(&self, intervals: usize, substeps: usize) -> Result<Arc<Model>> {
        let domain = self.domain()?;
        let hartree = self.kernel()?.operator(domain.clone())?;
        Ok(Arc::new(Model {
            external: self.external_potential(),
            hartree: Arc::new(hartree),
            physics: Physics::new(self.hbar, self.mass)?,
            grid: TimeGrid::new(self.horizon, intervals)?,
            propagator: PropagatorConfig::new(substeps)?,
            domain,
        }))
    }

    /// Renders back to the text format; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let n: Vec<String> = self.sweep_n.iter().map(|n| n.to_string()).collect();
        let pairs: Vec<(&str, String)> = vec![
            ("domain.length", self.domain_length.to_string()),
            ("domain.points", self.domain_points.to_string()),
            ("time.horizon", self.horizon.to_string()),
            ("time.intervals", self.intervals.to_string()),
            ("time.substeps", self.substeps.to_string()),
            ("physics.hbar", self.hbar.to_string()),
            ("physics.mass", self.mass.to_string()),
            ("physics.orbitals", self.orbitals.to_string()),
            ("physics.initial", self.initial.to_string()),
            ("potential.external", self.external.to_string()),
            ("potential.v0", self.v0.to_string()),
            ("potential.drive_amplitude", self.drive_amplitude.to_string()),
            ("potential.drive_frequency", self.drive_frequency.to_string()),
            ("potential.wells", self.wells.to_string()),
            ("kernel.softening", self.softening.to_string()),
            ("kernel.truncation", self.truncation.to_string()),
            ("kernel.coupling", self.coupling.to_string()),
            ("sweep.n", n.join(", ")),
            ("sweep.ref_multiplier", self.ref_multiplier.to_string()),
            ("fixed_point.tolerance", self.fixed_point.tolerance.to_string()),
            ("fixed_point.max_iter", self.fixed_point.max_iter.to_string()),
            ("fixed_point.damping", self.fixed_point.damping.to_string()),
            ("derivative.dim_cap", self.dim_cap.to_string()),
            ("derivative.samples", self.derivative_samples.to_string()),
            ("derivative.seed", self.seed.to_string()),
            ("output.dir", self.output_dir.display().to_string()),
            ("output.format", self.output_format.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        Path::new(&self.output_dir).join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_values() {
        let c = ExperimentConfig::default_scenario();
        assert_eq!(c.domain_length, 1.0);
        assert_eq!(c.horizon, 0.5);
        assert_eq!(c.orbitals, 2);
        assert_eq!(c.coupling, 0.1);
        assert_eq!(c.intervals, 32);
        assert_eq!(c.substeps, 4);
        assert_eq!(c.sweep_n, vec![4, 8, 12, 16]);
        assert_eq!(c.n_ref(), 64);
        assert!((c.reference_tolerance() - 1e-10).abs() < 1e-24);
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::default_scenario();
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn missing_key_is_named() {
        let text: String = DEFAULT_CONFIG
            .lines()
            .filter(|l| !l.trim_start().starts_with("kernel.softening"))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("kernel.softening"), "{err}");
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let extra = format!("{DEFAULT_CONFIG}\nkernel.flavour = 3\n");
        assert!(ExperimentConfig::parse(&extra).unwrap_err().to_string().contains("kernel.flavour"));
        let dup = format!("{DEFAULT_CONFIG}\nkernel.coupling = 0.2\n");
        assert!(ExperimentConfig::parse(&dup).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let c = ExperimentConfig::default_scenario();
        let mut bad = c.clone();
        bad.sweep_n = vec![8, 4];
        assert!(ExperimentConfig::parse(&bad.to_text()).is_err());
        let mut bad = c.clone();
        bad.ref_multiplier = 2;
        assert!(ExperimentConfig::parse(&bad.to_text()).is_err());
        let mut bad = c.clone();
        bad.domain_points = 100;
        assert!(ExperimentConfig::parse(&bad.to_text()).is_err());
        let mut bad = c;
        bad.fixed_point.damping = 0.0;
        assert!(ExperimentConfig::parse(&bad.to_text()).is_err());
        assert!(ExperimentConfig::parse("domain.length 1").is_err());
    }
}
