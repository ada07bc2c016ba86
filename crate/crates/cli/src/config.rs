//! Scenario configuration: a JSON document validated against a closed schema.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Default number of output samples on the time grid.
pub const DEFAULT_TIME_POINTS: usize = 201;
/// Default number of integrator steps between output samples.
pub const DEFAULT_STEPS: usize = 20;
/// Default per-column tolerance used by `compare`.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Largest Hilbert-space dimension accepted for random systems.
pub const MAX_RANDOM_DIM: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Reduced Planck constant; always explicit.
    pub hbar: f64,
    /// Duration of the reference protocol.
    pub duration: f64,
    #[serde(default)]
    pub ramp: RampKind,
    pub system: SystemConfig,
    pub method: MethodConfig,
    #[serde(default = "default_time_points")]
    pub time_points: usize,
    #[serde(default = "default_steps")]
    pub steps_per_interval: usize,
    /// Instantaneous eigenlevel to follow, counted from the ground state.
    #[serde(default)]
    pub level: usize,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

fn default_time_points() -> usize {
    DEFAULT_TIME_POINTS
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampKind {
    #[default]
    Linear,
    Smooth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    /// `H = lambda Z + delta X` with `lambda` swept between the endpoints.
    LandauZener {
        delta: f64,
        lambda_start: f64,
        lambda_end: f64,
    },
    /// Open transverse-field Ising chain with fields `(g, h)` swept linearly
    /// in the ramp variable.
    TfimChain {
        n_sites: usize,
        coupling: f64,
        g_start: f64,
        g_end: f64,
        h_start: f64,
        h_end: f64,
    },
    /// `H = H0 + lambda V` with seeded random Hermitian `H0`, `V`.
    RandomHermitian {
        dim: usize,
        seed: u64,
        #[serde(default)]
        lambda_start: f64,
        #[serde(default = "one")]
        lambda_end: f64,
    },
    /// A breathing Gaussian wave packet on a periodic 1-D grid.
    #[serde(rename = "grid_1d")]
    Grid1d {
        x_min: f64,
        x_max: f64,
        points: usize,
        mass: f64,
        sigma_start: f64,
        sigma_end: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingConfig {
    #[default]
    CdFirst,
    HFirst,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingConfig {
    #[default]
    RightEndpoint,
    Midpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    /// Exact counterdiabatic driving from the instantaneous eigenbasis.
    ExactCd {
        /// Drive only the tracked level, which needs only its own gaps.
        #[serde(default)]
        tracked_only: bool,
    },
    /// Variational nested-commutator ansatz; full order when omitted.
    Variational {
        #[serde(default)]
        order: Option<usize>,
    },
    /// Algebraic ansatz over the closure of odd nested commutators.
    Algebraic {},
    /// Krylov chain of the Liouvillian; full chain when omitted.
    Krylov {
        #[serde(default)]
        k_max: Option<usize>,
    },
    /// Digitized counterdiabatic driving over a sweep of slice counts.
    Trotter {
        slices: Vec<usize>,
        #[serde(default)]
        ordering: OrderingConfig,
        #[serde(default)]
        sampling: SamplingConfig,
    },
    /// Fast-forward of counterdiabatic driving (finite systems) or of the
    /// engineered potential (`grid_1d`).
    Ff {
        rate: f64,
        #[serde(default)]
        rescaling: RampKind,
    },
    /// Speed-limit certificate for a truncated variational shortcut against
    /// exact driving of the tracked level.
    Qsl { order: usize },
    /// Dynamical invariant of counterdiabatic driving.
    Invariant {},
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Artifact directory, relative to the config file.
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(default = "default_tolerance")]
    pub default_tolerance: f64,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            default_tolerance: DEFAULT_TOLERANCE,
            tolerances: BTreeMap::new(),
        }
    }
}

impl SystemConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::LandauZener { .. } => "landau_zener",
            Self::TfimChain { .. } => "tfim_chain",
            Self::RandomHermitian { .. } => "random_hermitian",
            Self::Grid1d { .. } => "grid_1d",
        }
    }

    /// Hilbert-space dimension; `None` for grid systems.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::LandauZener { .. } => Some(2),
            Self::TfimChain { n_sites, .. } => 1usize.checked_shl(*n_sites as u32),
            Self::RandomHermitian { dim, .. } => Some(*dim),
            Self::Grid1d { .. } => None,
        }
    }
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ExactCd { .. } => "exact_cd",
            Self::Variational { .. } => "variational",
            Self::Algebraic {} => "algebraic",
            Self::Krylov { .. } => "krylov",
            Self::Trotter { .. } => "trotter",
            Self::Ff { .. } => "ff",
            Self::Qsl { .. } => "qsl",
            Self::Invariant {} => "invariant",
        }
    }
}

fn finite(name: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be finite")))
    }
}

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{name} must be positive, got {x}"
        )))
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        positive("hbar", self.hbar)?;
        positive("duration", self.duration)?;
        if self.time_points < 3 {
            return Err(bad("time_points must be at least 3"));
        }
        if self.steps_per_interval == 0 {
            return Err(bad("steps_per_interval must be positive"));
        }
        positive("compare.default_tolerance", self.compare.default_tolerance)?;
        for (k, v) in &self.compare.tolerances {
            positive(&format!("compare.tolerances.{k}"), *v)?;
        }
        if self.output.dir.is_empty() {
            return Err(bad("output.dir must not be empty"));
        }
        self.validate_system()?;
        self.validate_method()
    }

    fn validate_system(&self) -> Result<(), CliError> {
        match &self.system {
            SystemConfig::LandauZener {
                delta,
                lambda_start,
                lambda_end,
            } => {
                finite("system.delta", *delta)?;
                if *delta == 0.0 {
                    return Err(bad("system.delta must be nonzero (the levels cross)"));
                }
                finite("system.lambda_start", *lambda_start)?;
                finite("system.lambda_end", *lambda_end)?;
            }
            SystemConfig::TfimChain {
                n_sites,
                coupling,
                g_start,
                g_end,
                h_start,
                h_end,
            } => {
                if !(2..=10).contains(n_sites) {
                    return Err(bad(format!(
                        "system.n_sites must be in 2..=10, got {n_sites}"
                    )));
                }
                for (name, x) in [
                    ("coupling", coupling),
                    ("g_start", g_start),
                    ("g_end", g_end),
                    ("h_start", h_start),
                    ("h_end", h_end),
                ] {
                    finite(&format!("system.{name}"), *x)?;
                }
            }
            SystemConfig::RandomHermitian {
                dim,
                lambda_start,
                lambda_end,
                ..
            } => {
                if !(2..=MAX_RANDOM_DIM).contains(dim) {
                    return Err(bad(format!(
                        "system.dim must be in 2..={MAX_RANDOM_DIM}, got {dim}"
                    )));
                }
                finite("system.lambda_start", *lambda_start)?;
                finite("system.lambda_end", *lambda_end)?;
            }
            SystemConfig::Grid1d {
                x_min,
                x_max,
                points,
                mass,
                sigma_start,
                sigma_end,
            } => {
                finite("system.x_min", *x_min)?;
                finite("system.x_max", *x_max)?;
                if x_max <= x_min {
                    return Err(bad("system.x_max must exceed system.x_min"));
                }
                if !(16..=1 << 16).contains(points) {
                    return Err(bad(format!(
                        "system.points must be in 16..=65536, got {points}"
                    )));
                }
                positive("system.mass", *mass)?;
                positive("system.sigma_start", *sigma_start)?;
                positive("system.sigma_end", *sigma_end)?;
                if !matches!(self.method, MethodConfig::Ff { .. }) {
                    return Err(bad("grid_1d systems support only the ff method"));
                }
            }
        }
        if let Some(d) = self.system.dim() {
            if self.level >= d {
                return Err(bad(format!(
                    "level {} out of range for dimension {d}",
                    self.level
                )));
            }
        }
        Ok(())
    }

    fn validate_method(&self) -> Result<(), CliError> {
        match &self.method {
            MethodConfig::Variational { order: Some(0) } => {
                Err(bad("method.order must be at least 1"))
            }
            MethodConfig::Krylov { k_max: Some(0) } => Err(bad("method.k_max must be at least 1")),
            MethodConfig::Qsl { order: 0 } => Err(bad("method.order must be at least 1")),
            MethodConfig::Trotter { slices, .. } => {
                if slices.len() < 4 {
                    return Err(bad("method.slices needs at least 4 values"));
                }
                if slices.iter().any(|&m| m == 0) {
                    return Err(bad("method.slices must be positive"));
                }
                if slices.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(bad("method.slices must be strictly increasing"));
                }
                if slices[slices.len() - 1] < 4 * slices[0] {
                    return Err(bad("method.slices must span at least two octaves"));
                }
                Ok(())
            }
            MethodConfig::Ff { rate, .. } => positive("method.rate", *rate),
            _ => Ok(()),
        }
    }

    /// SHA-256 of the canonical serialization, excluding output paths.
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output");
        }
        sha256_hex(v.to_string().as_bytes())
    }

    /// SHA-256 of the physical scenario: system, protocol, units and tracked
    /// level. Runs with different methods on one scenario share this hash.
    pub fn scenario_hash(&self) -> String {
        let v = serde_json::json!({
            "hbar": self.hbar,
            "duration": self.duration,
            "ramp": self.ramp,
            "system": self.system,
            "level": self.level,
        });
        sha256_hex(v.to_string().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Parses and validates a scenario configuration.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    let cfg: ScenarioConfig =
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

/// Output directory: `override_dir` if given, else `output.dir` resolved
/// against the directory holding the config file.
pub fn output_dir(
    config_path: &Path,
    cfg: &ScenarioConfig,
    override_dir: Option<&Path>,
) -> PathBuf {
    match override_dir {
        Some(d) => d.to_path_buf(),
        None => {
            let base = config_path.parent().unwrap_or_else(|| Path::new("."));
            base.join(&cfg.output.dir)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LZ: &str = r#"{
        "hbar": 1.0, "duration": 10.0,
        "system": {"type": "landau_zener", "delta": 1.0, "lambda_start": -5.0, "lambda_end": 5.0},
        "method": {"type": "exact_cd"}
    }"#;

    #[test]
    fn defaults_are_filled() {
        let cfg = parse_config(LZ).unwrap();
        assert_eq!(cfg.time_points, DEFAULT_TIME_POINTS);
        assert_eq!(cfg.ramp, RampKind::Linear);
        assert_eq!(cfg.output.dir, "out");
        assert_eq!(
            cfg.method,
            MethodConfig::ExactCd {
                tracked_only: false
            }
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = LZ.replace("\"duration\"", "\"durration\": 1, \"duration\"");
        assert!(parse_config(&text).is_err());
        let text = LZ.replace("\"delta\": 1.0", "\"delta\": 1.0, \"gamma\": 2");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn random_systems_need_a_seed() {
        let text = LZ.replace(
            r#"{"type": "landau_zener", "delta": 1.0, "lambda_start": -5.0, "lambda_end": 5.0}"#,
            r#"{"type": "random_hermitian", "dim": 3}"#,
        );
        assert!(parse_config(&text).is_err());
        let text = text.replace(r#""dim": 3"#, r#""dim": 3, "seed": 4"#);
        assert!(parse_config(&text).is_ok());
    }

    #[test]
    fn hashes_ignore_output_but_track_physics() {
        let a = parse_config(LZ).unwrap();
        let mut b = a.clone();
        b.output.dir = "elsewhere".into();
        assert_eq!(a.config_hash(), b.config_hash());
        b.method = MethodConfig::Krylov { k_max: None };
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.scenario_hash(), b.scenario_hash());
        b.duration = 2.0;
        assert_ne!(a.scenario_hash(), b.scenario_hash());
    }

    #[test]
    fn grid_requires_fast_forward() {
        let text = LZ.replace(
            r#"{"type": "landau_zener", "delta": 1.0, "lambda_start": -5.0, "lambda_end": 5.0}"#,
            r#"{"type": "grid_1d", "x_min": -20, "x_max": 20, "points": 256, "mass": 1, "sigma_start": 1, "sigma_end": 2}"#,
        );
        assert!(parse_config(&text).is_err());
        let text = text.replace(r#"{"type": "exact_cd"}"#, r#"{"type": "ff", "rate": 2}"#);
        assert!(parse_config(&text).is_ok());
    }
}
