//! TOML experiment configuration: one file drives the whole pipeline.
//! Missing or malformed keys surface as parse errors naming the field;
//! range checks happen in [`ExperimentConfig::validate`].

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// Scalar function specification on the spatial grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSpec {
    Constant { constant: f64 },
    Samples { samples: Vec<f64> },
    Piecewise { piecewise: Vec<PiecewisePiece> },
}

/// One plateau of a piecewise-constant coefficient: `value` holds for
/// `x <= upto` (after the previous piece).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PiecewisePiece {
    pub upto: f64,
    pub value: f64,
}

impl CoefficientSpec {
    /// Samples the coefficient on the uniform grid over `[0, length]`.
    pub fn materialize(&self, n_grid: usize, length: f64) -> Result<Vec<f64>> {
        match self {
            Self::Constant { constant } => Ok(vec![*constant; n_grid]),
            Self::Samples { samples } => {
                if samples.len() != n_grid {
                    return Err(Error::GridMismatch {
                        expected: n_grid,
                        got: samples.len(),
                    });
                }
                Ok(samples.clone())
            }
            Self::Piecewise { piecewise } => {
                if piecewise.is_empty() {
                    return Err(Error::InvalidConfig(
                        "piecewise coefficient needs at least one piece".into(),
                    ));
                }
                let mut prev = 0.0;
                for piece in piecewise {
                    if piece.upto <= prev {
                        return Err(Error::InvalidConfig(
                            "piecewise breakpoints must be strictly increasing".into(),
                        ));
                    }
                    prev = piece.upto;
                }
                if prev < length {
                    return Err(Error::InvalidConfig(format!(
                        "piecewise pieces end at {prev}, before the domain end {length}"
                    )));
                }
                let h = length / (n_grid - 1) as f64;
                Ok((0..n_grid)
                    .map(|i| {
                        let x = i as f64 * h;
                        piecewise
                            .iter()
                            .find(|p| x <= p.upto)
                            .map(|p| p.value)
                            .unwrap_or(piecewise.last().unwrap().value)
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub length: f64,
    pub n_grid: usize,
    pub reaction: CoefficientSpec,
    pub inputs: Vec<CoefficientSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Truncation order J.
    pub truncation: usize,
    /// Places eta at this fraction of the first stable eigenvalue magnitude.
    pub margin_fraction: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            truncation: 32,
            margin_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignConfig {
    /// Required closed-loop decay margin of the unstable block.
    pub margin: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self { margin: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NonlinearityConfig {
    pub kind: String,
    pub delta: f64,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        Self {
            kind: "identity".into(),
            delta: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CertificateConfig {
    pub xi_fraction: f64,
    pub zeta_fraction: f64,
    /// Random initial states per power-stability fit.
    pub trials: usize,
    /// Iteration count per trajectory in the fit.
    pub power_steps: usize,
    /// Upper end of the stable-period search.
    pub tau_max: f64,
    /// Bisection tolerance of the stable-period search.
    pub tau_tol: f64,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        Self {
            xi_fraction: 0.9,
            zeta_fraction: 0.5,
            trials: 100,
            power_steps: 60,
            tau_max: 1.0,
            tau_tol: 1e-3,
        }
    }
}

/// Sampling period: a number, or "auto" for `safety * tau_star`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauSpec {
    Auto(String),
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub tau: TauSpec,
    pub safety: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            tau: TauSpec::Auto("auto".into()),
            safety: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TriggerSectionConfig {
    pub sigma: f64,
    /// Trigger test stride is tau / stride_divisor.
    pub stride_divisor: f64,
}

impl Default for TriggerSectionConfig {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            stride_divisor: 50.0,
        }
    }
}

/// Initial state: an explicit modal vector, a spatial profile projected onto
/// the modes, or a random direction of given norm.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialStateSpec {
    Modal { modal: Vec<f64> },
    Profile { profile: CoefficientSpec },
    Random { random: f64 },
}

/// Horizon: a number, or "auto" for `20 / chi`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HorizonSpec {
    Auto(String),
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub x0: InitialStateSpec,
    pub t_end: HorizonSpec,
    pub out_points: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            x0: InitialStateSpec::Random { random: 1.0 },
            t_end: HorizonSpec::Auto("auto".into()),
            out_points: 401,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DisturbanceConfig {
    /// zero | sinusoid | decaying-burst.
    pub kind: String,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub decay: f64,
    /// Mode index (1-based) carrying the disturbance direction.
    pub mode: usize,
}

impl Default for DisturbanceConfig {
    fn default() -> Self {
        Self {
            kind: "sinusoid".into(),
            amplitude: 0.1,
            omega: 2.0,
            phase: 0.0,
            decay: 1.0,
            mode: 1,
        }
    }
}

/// Full experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub certificates: CertificateConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub trigger: TriggerSectionConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub disturbance: DisturbanceConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if !(p.length > 0.0) || !p.length.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "problem.length must be positive, got {}",
                p.length
            )));
        }
        if p.n_grid < 16 {
            return Err(Error::InvalidConfig(format!(
                "problem.n_grid must be at least 16, got {}",
                p.n_grid
            )));
        }
        if p.inputs.is_empty() {
            return Err(Error::InvalidConfig(
                "problem.inputs needs at least one input shape".into(),
            ));
        }
        if self.model.truncation < 1 {
            return Err(Error::InvalidConfig("model.truncation must be >= 1".into()));
        }
        if !(self.model.margin_fraction > 0.0 && self.model.margin_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "model.margin_fraction must lie in (0, 1)".into(),
            ));
        }
        if !(self.design.margin > 0.0) {
            return Err(Error::InvalidConfig(
                "design.margin must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.nonlinearity.delta) {
            return Err(Error::InvalidConfig(
                "nonlinearity.delta must lie in [0, 1)".into(),
            ));
        }
        let c = &self.certificates;
        for (name, v) in [
            ("xi_fraction", c.xi_fraction),
            ("zeta_fraction", c.zeta_fraction),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "certificates.{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        if c.trials == 0 || c.power_steps < 2 {
            return Err(Error::InvalidConfig(
                "certificates.trials must be >= 1 and power_steps >= 2".into(),
            ));
        }
        if !(c.tau_max > 0.0 && c.tau_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "certificates.tau_max and tau_tol must be positive".into(),
            ));
        }
        match &self.sampling.tau {
            TauSpec::Fixed(tau) if !(tau > &0.0) => {
                return Err(Error::InvalidConfig(format!(
                    "sampling.tau must be positive, got {tau}"
                )));
            }
            TauSpec::Auto(word) if word != "auto" => {
                return Err(Error::InvalidConfig(format!(
                    "sampling.tau must be a number or \"auto\", got \"{word}\""
                )));
            }
            _ => {}
        }
        if !(self.sampling.safety > 0.0 && self.sampling.safety <= 1.0) {
            return Err(Error::InvalidConfig(
                "sampling.safety must lie in (0, 1]".into(),
            ));
        }
        if !(self.trigger.sigma > 0.0 && self.trigger.sigma < 1.0) {
            return Err(Error::InvalidConfig(
                "trigger.sigma must lie in (0, 1)".into(),
            ));
        }
        if self.trigger.stride_divisor < 1.0 {
            return Err(Error::InvalidConfig(
                "trigger.stride_divisor must be >= 1".into(),
            ));
        }
        match &self.simulation.t_end {
            HorizonSpec::Fixed(t) if !(t > &0.0) => {
                return Err(Error::InvalidConfig(format!(
                    "simulation.t_end must be positive, got {t}"
                )));
            }
            HorizonSpec::Auto(word) if word != "auto" => {
                return Err(Error::InvalidConfig(format!(
                    "simulation.t_end must be a number or \"auto\", got \"{word}\""
                )));
            }
            _ => {}
        }
        if self.simulation.out_points < 2 {
            return Err(Error::InvalidConfig(
                "simulation.out_points must be >= 2".into(),
            ));
        }
        match self.disturbance.kind.as_str() {
            "zero" | "sinusoid" | "decaying-burst" => {}
            other => {
                return Err(Error::InvalidConfig(format!(
                    "disturbance.kind must be zero | sinusoid | decaying-burst, got \"{other}\""
                )));
            }
        }
        if self.disturbance.mode < 1 || self.disturbance.mode > self.model.truncation {
            return Err(Error::InvalidConfig(
                "disturbance.mode must index a retained mode (1-based)".into(),
            ));
        }
        Ok(())
    }

    /// Deterministic per-stage seed derived from the root seed (FNV-1a over
    /// the stage name).
    pub fn stage_seed(&self, stage: &str) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64 ^ self.seed.rotate_left(17);
        for byte in stage.bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}
