//! Experiment configuration: a TOML file with nested sections, every key
//! optional. Defaults:
//!
//! ```toml
//! regime = "theorem-2.4"        # or "theorem-2.5"
//! master_seed = 20240611
//! replicas = 1000
//! output_dir = "out"
//! p_list = [1.5]
//! n_list = [4, 16, 64, 256]
//! delta_steps = [8, 4, 2, 1]    # temporal lags, multiples of dt
//! shift_cells = [1, 2, 4]       # spatial shifts, multiples of dx
//!
//! [grid]
//! length = 1.0
//! nx = 63                       # interior nodes
//! horizon = 0.5
//! nt = 128
//!
//! [noise]
//! alpha = 1.3
//! K = 1.0
//! c_plus = 0.5
//! c_minus = 0.5
//! # eps defaults to K/100
//! small_jump_mode = "gaussian"  # or "drop"
//!
//! [coeff]
//! family = "power"              # linear{a,b} | power{beta} | sqrt_pos | stepstone | constant{c} | tabulated{points}
//! beta = 0.5
//! n = 16                        # level used by `simulate`
//! nodes = 64
//!
//! [ic]
//! family = "sine"               # zero | sine{k} | bump{center,width} | tabulated{points}
//! k = 1
//!
//! [kernel]
//! tol = 1e-12
//! nx = 200
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientFamily, CoefficientSpec};
use crate::diagnostics::{Experiment, Regime};
use crate::heat_kernel::KernelConfig;
use crate::solver::{GridSpec, InitialCondition};
use crate::stable_noise::{SmallJumpMode, StableNoiseSpec};

/// A configuration problem, anchored to a line of the config file when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: Option<PathBuf>,
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let src = self
            .source
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "<defaults>".into());
        match self.line {
            Some(l) => write!(f, "{src}:{l}: {}", self.message),
            None => write!(f, "{src}: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub alpha: f64,
    #[serde(rename = "K")]
    pub truncation: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub small_jump_mode: SmallJumpMode,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            alpha: 1.3,
            truncation: 1.0,
            c_plus: 0.5,
            c_minus: 0.5,
            eps: None,
            small_jump_mode: SmallJumpMode::Gaussian,
        }
    }
}

impl NoiseConfig {
    pub fn resolve(&self) -> StableNoiseSpec {
        StableNoiseSpec {
            alpha: self.alpha,
            truncation: self.truncation,
            c_plus: self.c_plus,
            c_minus: self.c_minus,
            eps: self.eps.unwrap_or(1e-2 * self.truncation),
            small_jump_mode: self.small_jump_mode,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub tol: f64,
    /// Interior nodes of the semigroup check grid.
    pub nx: usize,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            tol: KernelConfig::DEFAULT_TOL,
            nx: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub regime: Regime,
    pub master_seed: u64,
    pub replicas: usize,
    pub output_dir: PathBuf,
    pub p_list: Vec<f64>,
    pub n_list: Vec<u32>,
    pub delta_steps: Vec<usize>,
    pub shift_cells: Vec<usize>,
    pub grid: GridSpec,
    pub noise: NoiseConfig,
    pub coeff: CoefficientSpec,
    pub ic: InitialCondition,
    pub kernel: KernelSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            regime: Regime::MeasureValued,
            master_seed: 20240611,
            replicas: 1000,
            output_dir: PathBuf::from("out"),
            p_list: vec![1.5],
            n_list: vec![4, 16, 64, 256],
            delta_steps: vec![8, 4, 2, 1],
            shift_cells: vec![1, 2, 4],
            grid: GridSpec::default(),
            noise: NoiseConfig::default(),
            coeff: CoefficientSpec::new(CoefficientFamily::Power { beta: 0.5 }, 16),
            ic: InitialCondition::Sine { k: 1 },
            kernel: KernelSection::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub replicas: Option<usize>,
    pub regime: Option<Regime>,
}

/// A validated configuration together with the text it came from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    source: Option<PathBuf>,
    text: String,
}

impl LoadedConfig {
    pub fn defaults() -> Self {
        Self {
            config: ExperimentConfig::default(),
            source: None,
            text: String::new(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: Some(path.to_path_buf()),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::from_text(&text, Some(path.to_path_buf()))
    }

    pub fn from_text(text: &str, source: Option<PathBuf>) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError {
            source: source.clone(),
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().to_string(),
        })?;
        Ok(Self {
            config,
            source,
            text: text.to_string(),
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        let c = &mut self.config;
        if let Some(s) = o.seed {
            c.master_seed = s;
        }
        if let Some(d) = &o.output_dir {
            c.output_dir = d.clone();
        }
        if let Some(r) = o.replicas {
            c.replicas = r;
        }
        if let Some(r) = o.regime {
            c.regime = r;
        }
    }

    fn error(&self, key: &str, message: String) -> ConfigError {
        ConfigError {
            source: self.source.clone(),
            line: line_of_key(&self.text, key),
            message,
        }
    }

    /// Cross-field validation; errors name the offending key's line.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.config;
        c.grid
            .validate()
            .map_err(|e| self.error("nx", e.to_string()))?;
        let noise = c.noise.resolve();
        noise
            .validate()
            .map_err(|e| self.error("alpha", e.to_string()))?;
        c.coeff
            .validate()
            .map_err(|e| self.error("family", e.to_string()))?;
        c.ic.validate()
            .map_err(|e| self.error("family", e.to_string()))?;
        KernelConfig::with_tolerance(c.grid.length, c.kernel.tol, 1e-6 * c.grid.length.powi(2))
            .map_err(|e| self.error("tol", e.to_string()))?;
        if c.kernel.nx < 3 {
            return Err(self.error("nx", format!("kernel nx = {} must be >= 3", c.kernel.nx)));
        }
        if c.replicas == 0 {
            return Err(self.error("replicas", "replicas must be >= 1".into()));
        }
        if c.p_list.is_empty() {
            return Err(self.error("p_list", "p_list must not be empty".into()));
        }
        if c.n_list.len() < 2 {
            return Err(self.error("n_list", "n_list needs at least two levels".into()));
        }
        if c.n_list.contains(&0) {
            return Err(self.error("n_list", "n_list levels must be >= 1".into()));
        }
        let alpha = noise.alpha;
        let upper = match c.regime {
            Regime::MeasureValued => "2]",
            Regime::FunctionValued => "5/3)",
        };
        for &p in &c.p_list {
            if !c.regime.admits(alpha, p) {
                return Err(self.error(
                    "p_list",
                    format!(
                        "p = {p} outside (alpha = {alpha}, {upper} required by regime {}",
                        c.regime.name()
                    ),
                ));
            }
        }
        if c.delta_steps.iter().any(|&d| d > c.grid.nt) {
            return Err(self.error(
                "delta_steps",
                format!("temporal lags must not exceed nt = {}", c.grid.nt),
            ));
        }
        if c.shift_cells.iter().any(|&s| s > c.grid.nx + 1) {
            return Err(self.error(
                "shift_cells",
                format!("shifts must not exceed nx + 1 = {}", c.grid.nx + 1),
            ));
        }
        Ok(())
    }

    pub fn experiment(&self) -> Experiment {
        let c = &self.config;
        Experiment {
            grid: c.grid,
            noise: c.noise.resolve(),
            ic: c.ic.clone(),
            coeff: c.coeff.clone(),
            master_seed: c.master_seed,
        }
    }

    pub fn kernel_config(&self) -> KernelConfig {
        let l = self.config.grid.length;
        KernelConfig {
            length: l,
            tol: self.config.kernel.tol,
            t_floor: 1e-6 * l * l,
        }
    }

    pub fn deltas(&self) -> Vec<f64> {
        let dt = self.config.grid.dt();
        self.config
            .delta_steps
            .iter()
            .map(|&d| d as f64 * dt)
            .collect()
    }

    pub fn shifts(&self) -> Vec<f64> {
        let dx = self.config.grid.dx();
        self.config
            .shift_cells
            .iter()
            .map(|&s| s as f64 * dx)
            .collect()
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// First line whose key (before `=`) is `key`.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            l.split_once('=')
                .map(|(k, _)| k.trim().trim_matches('"') == key)
                .unwrap_or(false)
        })
        .map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        LoadedConfig::defaults().validate().unwrap();
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let cfg = LoadedConfig::from_text(
            "master_seed = 5\n[grid]\nnx = 31\n[noise]\nK = 2.0\n[coeff]\nfamily = \"sqrt_pos\"\nn = 4\n",
            None,
        )
        .unwrap();
        assert_eq!(cfg.config.grid.nx, 31);
        assert_eq!(cfg.config.grid.nt, 128);
        assert_eq!(cfg.config.noise.resolve().eps, 0.02);
        assert_eq!(cfg.config.coeff.family, CoefficientFamily::SqrtPos);
        assert_eq!(cfg.config.coeff.nodes, 64);
        cfg.validate().unwrap();
    }

    #[test]
    fn parse_error_is_line_anchored() {
        let err =
            LoadedConfig::from_text("replicas = 10\n[grid]\nnx = \"many\"\n", None).unwrap_err();
        assert_eq!(err.line, Some(3));
        let err = LoadedConfig::from_text("replicas = 10\nbogus = 1\n", None).unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn regime_gate() {
        let mut cfg = LoadedConfig::from_text(
            "regime = \"theorem-2.5\"\np_list = [1.9]\n[noise]\nalpha = 1.8\n",
            Some("exp.toml".into()),
        )
        .unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(
            err.to_string().starts_with("exp.toml:2: p = 1.9 outside"),
            "{err}"
        );
        assert!(err.message.contains("5/3"), "{}", err.message);
        cfg.config.noise.alpha = 1.3;
        assert!(cfg.validate().is_err());
        cfg.config.p_list = vec![1.6];
        cfg.validate().unwrap();
        cfg.config.p_list = vec![1.9];
        cfg.apply(&Overrides {
            regime: Some(Regime::MeasureValued),
            ..Default::default()
        });
        cfg.validate().unwrap();
    }

    #[test]
    fn p_must_exceed_alpha() {
        let cfg = LoadedConfig::from_text("p_list = [1.2]\n", None).unwrap();
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.line, Some(1));
    }

    #[test]
    fn manifest_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
