//! Run configuration. JSON with unknown keys rejected; every section except
//! `chain` has defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use starkmbl::model::CouplingMatrix;
use starkmbl::noise::{khz_to_j0, NoiseModel};
use starkmbl::propagate::{Axis, KrylovSettings};
use starkmbl::protocols::{ChainModel, EchoKind, Evolution, TimeGrid};
use starkmbl::spinspace::SpinPattern;

use crate::error::CliError;

pub const DEFAULT_J0_KHZ: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Thread count; not part of the provenance record.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    /// `J₀/2π` in kHz, used for every physical-unit input.
    #[serde(default = "default_j0_khz")]
    pub j0_khz: f64,
    pub chain: ChainSpec,
    #[serde(default)]
    pub krylov: KrylovSettings,
    #[serde(default)]
    pub levels: LevelsSpec,
    #[serde(default)]
    pub quench: QuenchSpec,
    #[serde(default)]
    pub deer: DeerSpec,
    #[serde(default)]
    pub quad: QuadSpec,
    #[serde(default)]
    pub stability: StabilitySpec,
    #[serde(default)]
    pub sweff: SweffSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn default_j0_khz() -> f64 {
    DEFAULT_J0_KHZ
}

fn default_alpha() -> f64 {
    1.3
}

fn default_bias() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub n: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Whitespace-separated coupling matrix replacing the power law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings_file: Option<PathBuf>,
    pub field: FieldSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Linear {
        #[serde(default = "default_bias")]
        bias: f64,
        g: f64,
    },
    Quadratic {
        #[serde(default = "default_bias")]
        bias: f64,
        gamma: f64,
        #[serde(default)]
        center_offset: f64,
    },
}

impl ChainSpec {
    pub fn couplings(&self, base: &Path) -> Result<CouplingMatrix, CliError> {
        match &self.couplings_file {
            Some(p) => {
                let c = CouplingMatrix::load(base.join(p))?;
                if c.n() != self.n {
                    return Err(CliError::Config(format!(
                        "coupling file has {} sites, chain.n is {}",
                        c.n(),
                        self.n
                    )));
                }
                Ok(c)
            }
            None => Ok(CouplingMatrix::power_law(self.n, self.alpha)?),
        }
    }

    pub fn model(&self, base: &Path) -> Result<ChainModel, CliError> {
        let c = self.couplings(base)?;
        let template = match self.field {
            FieldSpec::Linear { bias, g } => ChainModel::linear(self.n, self.alpha, bias, g)?,
            FieldSpec::Quadratic {
                bias,
                gamma,
                center_offset,
            } => ChainModel::quadratic(self.n, self.alpha, bias, gamma, center_offset)?,
        };
        Ok(ChainModel::new(c, template.bias, template.local)?)
    }

    pub fn gradient(&self) -> Option<f64> {
        match self.field {
            FieldSpec::Linear { g, .. } => Some(g),
            FieldSpec::Quadratic { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelsSpec {
    pub degeneracy_tol: Option<f64>,
    pub inner_fraction: f64,
    pub n_bins: usize,
}

impl Default for LevelsSpec {
    fn default() -> Self {
        Self {
            degeneracy_tol: None,
            inner_fraction: 1.0,
            n_bins: 20,
        }
    }
}

/// Evolution mode with Trotter segments given either in `1/J₀` or in µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvolutionSpec {
    #[default]
    Continuous,
    Trotter {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dt1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dt2: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dt1_us: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dt2_us: Option<f64>,
    },
}

/// Microseconds to `1/J₀` for `J₀ = 2π · j0_khz`.
pub fn us_to_tj0(us: f64, j0_khz: f64) -> f64 {
    us * 1e-6 * 2.0 * std::f64::consts::PI * j0_khz * 1e3
}

impl EvolutionSpec {
    pub fn resolve(&self, j0_khz: f64) -> Result<Evolution, CliError> {
        match *self {
            EvolutionSpec::Continuous => Ok(Evolution::Continuous),
            EvolutionSpec::Trotter {
                dt1,
                dt2,
                dt1_us,
                dt2_us,
            } => {
                let pick = |j0: Option<f64>, us: Option<f64>, name: &str| match (j0, us) {
                    (Some(v), None) => Ok(v),
                    (None, Some(v)) => Ok(us_to_tj0(v, j0_khz)),
                    _ => Err(CliError::Config(format!(
                        "trotter evolution needs exactly one of {name} and {name}_us"
                    ))),
                };
                Ok(Evolution::Trotter {
                    dt1: pick(dt1, dt1_us, "dt1")?,
                    dt2: pick(dt2, dt2_us, "dt2")?,
                })
            }
        }
    }
}

/// Noise parameters; `sigma_bz0_khz` takes precedence over `sigma_bz0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub init_rotation_angle: f64,
    pub sigma_bz0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_bz0_khz: Option<f64>,
    pub sigma_g_frac: f64,
    pub sigma_local_frac: f64,
    pub n_samples: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        let d = NoiseModel::default();
        Self {
            init_rotation_angle: d.init_rotation_angle,
            sigma_bz0: d.sigma_bz0,
            sigma_bz0_khz: None,
            sigma_g_frac: d.sigma_g_frac,
            sigma_local_frac: d.sigma_local_frac,
            n_samples: d.n_samples,
        }
    }
}

impl NoiseSpec {
    pub fn resolve(&self, seed: u64, j0_khz: f64) -> NoiseModel {
        NoiseModel {
            init_rotation_angle: self.init_rotation_angle,
            sigma_bz0: self
                .sigma_bz0_khz
                .map_or(self.sigma_bz0, |k| khz_to_j0(k, j0_khz)),
            sigma_g_frac: self.sigma_g_frac,
            sigma_local_frac: self.sigma_local_frac,
            n_samples: self.n_samples,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuenchSpec {
    /// Initial patterns; empty means Néel.
    pub patterns: Vec<String>,
    pub grid: TimeGrid,
    pub window: (f64, f64),
    pub evolution: EvolutionSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

impl Default for QuenchSpec {
    fn default() -> Self {
        Self {
            patterns: Vec::new(),
            grid: TimeGrid::default(),
            window: (5.0, 7.0),
            evolution: EvolutionSpec::Continuous,
            noise: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeerSpec {
    pub probe: usize,
    /// Probe-to-region distances `R`.
    pub offsets: Vec<usize>,
    pub region_size: usize,
    pub axis: Axis,
    pub echo: EchoKind,
    pub grid: TimeGrid,
    pub window: (f64, f64),
}

impl Default for DeerSpec {
    fn default() -> Self {
        Self {
            probe: 1,
            offsets: vec![1, 2, 3],
            region_size: 3,
            axis: Axis::X,
            echo: EchoKind::Hahn,
            grid: TimeGrid::default(),
            window: (2.0, 4.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    pub grid: TimeGrid,
    pub tail_points: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            pattern: None,
            grid: TimeGrid::default(),
            tail_points: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySpec {
    /// Empty means Néel and two-block.
    pub patterns: Vec<String>,
    pub grid: TimeGrid,
    pub smoothing: f64,
    pub final_window: f64,
}

impl Default for StabilitySpec {
    fn default() -> Self {
        Self {
            patterns: Vec::new(),
            grid: TimeGrid::long(),
            smoothing: 5.0,
            final_window: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweffSpec {
    /// Tilt for absolute energies; falls back to the linear field's `g`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Levels,
    Quench,
    Deer,
    Quad,
    Stability,
    Sweff,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Levels => "levels",
            Command::Quench => "quench",
            Command::Deer => "deer",
            Command::Quad => "quad",
            Command::Stability => "stability",
            Command::Sweff => "sweff",
        }
    }
}

/// Cartesian grid over config values addressed by JSON pointers such as
/// `/chain/field/g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub command: Command,
    pub axes: BTreeMap<String, Vec<serde_json::Value>>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn to_compact_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.j0_khz > 0.0) || !self.j0_khz.is_finite() {
            return Err(CliError::Config(format!(
                "j0_khz must be positive, got {}",
                self.j0_khz
            )));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        self.krylov.validate()?;
        for p in self
            .quench
            .patterns
            .iter()
            .chain(&self.stability.patterns)
            .chain(&self.quad.pattern)
        {
            SpinPattern::parse_for(p, self.chain.n)?;
        }
        self.quench.evolution.resolve(self.j0_khz)?;
        if let Some(s) = &self.sweep {
            if s.axes.is_empty() || s.axes.values().any(|v| v.is_empty()) {
                return Err(CliError::Config("sweep axes must be non-empty".into()));
            }
            for k in s.axes.keys() {
                if !k.starts_with('/') {
                    return Err(CliError::Config(format!(
                        "sweep axis {k:?} is not a JSON pointer"
                    )));
                }
            }
        }
        Ok(())
    }
}
