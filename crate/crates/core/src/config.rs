//! Tracker configuration and its flat `key = value` text form.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::enhance::EnhanceConfig;
use crate::error::{Error, Result};
use crate::memory::{GateConfig, QualityMetric};
use crate::scale::ScaleConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnhanceMode {
    #[default]
    Auto,
    On,
    Off,
}

impl FromStr for EnhanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "on" => Ok(Self::On),
            "off" => Ok(Self::Off),
            other => Err(Error::Config(format!("enhance must be auto, on or off, got {other:?}"))),
        }
    }
}

impl fmt::Display for EnhanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::On => "on",
            Self::Off => "off",
        })
    }
}

/// What a re-detection candidate must satisfy to be accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RedetectCriterion {
    /// Long-term confidence at the candidate reaches `t_a`.
    #[default]
    LongTerm,
    /// The SVM scores the candidate on the positive side.
    SvmMargin,
}

impl FromStr for RedetectCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c_long" | "long_term" => Ok(Self::LongTerm),
            "svm" | "svm_margin" => Ok(Self::SvmMargin),
            other => Err(Error::Config(format!("redetect must be c_long or svm, got {other:?}"))),
        }
    }
}

impl fmt::Display for RedetectCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LongTerm => "c_long",
            Self::SvmMargin => "svm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub lambda: f64,
    pub eta: f64,
    /// Learning rate of the long-term filter.
    pub eta_long: f64,
    /// Label bandwidth relative to the target size in cells.
    pub sigma_factor: f64,
    pub padding: f64,
    /// Compressed channels of the translation and long-term filters.
    pub dims: usize,
    pub max_template_cells: usize,
    pub min_template_side: usize,
    pub scale: ScaleConfig,
    pub gate: GateConfig,
    /// `N_s`: filters are re-solved on frames divisible by this.
    pub update_interval: usize,
    pub rematch_interval: usize,
    pub redetect: RedetectCriterion,
    pub svm_tau: f64,
    pub enhance_mode: EnhanceMode,
    pub enhance: EnhanceConfig,
    pub color_names: Option<PathBuf>,
    /// Ground-truth files use 1-based pixel coordinates.
    pub one_based: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            eta: 0.025,
            eta_long: 0.025,
            sigma_factor: 1.0 / 16.0,
            padding: 2.0,
            dims: 18,
            max_template_cells: 10_000,
            min_template_side: 8,
            scale: ScaleConfig::default(),
            gate: GateConfig::default(),
            update_interval: 3,
            rematch_interval: 5,
            redetect: RedetectCriterion::default(),
            svm_tau: 1.0,
            enhance_mode: EnhanceMode::default(),
            enhance: EnhanceConfig::default(),
            color_names: None,
            one_based: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("bad value {value:?} for {key}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean {value:?} for {key}"))),
    }
}

impl TrackerConfig {
    pub const KEYS: &'static [&'static str] = &[
        "lambda",
        "eta",
        "eta_long",
        "sigma_factor",
        "padding",
        "dims",
        "max_template_cells",
        "min_template_side",
        "n_scales",
        "n_interp",
        "scale_step",
        "scale_sigma",
        "scale_dims",
        "scale_model_max_area",
        "min_scale",
        "max_scale",
        "t_r",
        "t_a",
        "response_factor",
        "quality_factor",
        "quality",
        "update_interval",
        "rematch_interval",
        "redetect",
        "svm_tau",
        "enhance",
        "enhance_k",
        "enhance_t_l",
        "enhance_iterations",
        "enhance_beta",
        "enhance_epsilon",
        "enhance_sigma",
        "enhance_alpha",
        "color_names",
        "one_based",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "lambda" => self.lambda = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "eta_long" => self.eta_long = parse(key, value)?,
            "sigma_factor" => self.sigma_factor = parse(key, value)?,
            "padding" => self.padding = parse(key, value)?,
            "dims" => self.dims = parse(key, value)?,
            "max_template_cells" => self.max_template_cells = parse(key, value)?,
            "min_template_side" => self.min_template_side = parse(key, value)?,
            "n_scales" => self.scale.n_scales = parse(key, value)?,
            "n_interp" => self.scale.n_interp = parse(key, value)?,
            "scale_step" => self.scale.step = parse(key, value)?,
            "scale_sigma" => self.scale.sigma = parse(key, value)?,
            "scale_dims" => {
                self.scale.dims = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "scale_model_max_area" => self.scale.model_max_area = parse(key, value)?,
            "min_scale" => self.scale.min_scale = parse(key, value)?,
            "max_scale" => self.scale.max_scale = parse(key, value)?,
            "t_r" => self.gate.t_r = parse(key, value)?,
            "t_a" => self.gate.t_a = parse(key, value)?,
            "response_factor" => self.gate.response_factor = parse(key, value)?,
            "quality_factor" => self.gate.quality_factor = parse(key, value)?,
            "quality" => self.gate.metric = value.parse::<QualityMetric>()?,
            "update_interval" => self.update_interval = parse(key, value)?,
            "rematch_interval" => self.rematch_interval = parse(key, value)?,
            "redetect" => self.redetect = value.parse()?,
            "svm_tau" => self.svm_tau = parse(key, value)?,
            "enhance" => self.enhance_mode = value.parse()?,
            "enhance_k" => self.enhance.k = parse(key, value)?,
            "enhance_t_l" => self.enhance.t_l = parse(key, value)?,
            "enhance_iterations" => self.enhance.iterations = parse(key, value)?,
            "enhance_beta" => self.enhance.beta = parse(key, value)?,
            "enhance_epsilon" => self.enhance.epsilon = parse(key, value)?,
            "enhance_sigma" => self.enhance.sigma = parse(key, value)?,
            "enhance_alpha" => self.enhance.alpha = parse(key, value)?,
            "color_names" => {
                self.color_names = match value {
                    "" | "builtin" => None,
                    v => Some(PathBuf::from(v)),
                }
            }
            "one_based" => self.one_based = parse_bool(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "lambda" => self.lambda.to_string(),
            "eta" => self.eta.to_string(),
            "eta_long" => self.eta_long.to_string(),
            "sigma_factor" => self.sigma_factor.to_string(),
            "padding" => self.padding.to_string(),
            "dims" => self.dims.to_string(),
            "max_template_cells" => self.max_template_cells.to_string(),
            "min_template_side" => self.min_template_side.to_string(),
            "n_scales" => self.scale.n_scales.to_string(),
            "n_interp" => self.scale.n_interp.to_string(),
            "scale_step" => self.scale.step.to_string(),
            "scale_sigma" => self.scale.sigma.to_string(),
            "scale_dims" => self.scale.dims.map_or("auto".to_string(), |d| d.to_string()),
            "scale_model_max_area" => self.scale.model_max_area.to_string(),
            "min_scale" => self.scale.min_scale.to_string(),
            "max_scale" => self.scale.max_scale.to_string(),
            "t_r" => self.gate.t_r.to_string(),
            "t_a" => self.gate.t_a.to_string(),
            "response_factor" => self.gate.response_factor.to_string(),
            "quality_factor" => self.gate.quality_factor.to_string(),
            "quality" => self.gate.metric.to_string(),
            "update_interval" => self.update_interval.to_string(),
            "rematch_interval" => self.rematch_interval.to_string(),
            "redetect" => self.redetect.to_string(),
            "svm_tau" => self.svm_tau.to_string(),
            "enhance" => self.enhance_mode.to_string(),
            "enhance_k" => self.enhance.k.to_string(),
            "enhance_t_l" => self.enhance.t_l.to_string(),
            "enhance_iterations" => self.enhance.iterations.to_string(),
            "enhance_beta" => self.enhance.beta.to_string(),
            "enhance_epsilon" => self.enhance.epsilon.to_string(),
            "enhance_sigma" => self.enhance.sigma.to_string(),
            "enhance_alpha" => self.enhance.alpha.to_string(),
            "color_names" => self
                .color_names
                .as_ref()
                .map_or("builtin".to_string(), |p| p.display().to_string()),
            "one_based" => self.one_based.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", n + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lambda > 0.0) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        for (name, v) in [("eta", self.eta), ("eta_long", self.eta_long)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.sigma_factor > 0.0) || !(self.padding >= 1.0) {
            return bad("sigma_factor must be positive and padding at least 1".to_string());
        }
        if self.dims == 0 || self.update_interval == 0 || self.rematch_interval == 0 {
            return bad("dims, update_interval and rematch_interval must be positive".to_string());
        }
        if self.min_template_side < 2 || self.max_template_cells < self.min_template_side.pow(2) {
            return bad("template cell limits are inconsistent".to_string());
        }
        if !(self.svm_tau > 0.0) {
            return bad(format!("svm_tau must be positive, got {}", self.svm_tau));
        }
        if !(self.gate.t_r >= 0.0 && self.gate.t_a >= 0.0) {
            return bad("t_r and t_a must be non-negative".to_string());
        }
        self.scale.validate()?;
        self.enhance.validate()
    }
}

impl fmt::Display for TrackerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for key in Self::KEYS {
            writeln!(f, "{key} = {}", self.get(key).unwrap_or_default())?;
        }
        Ok(())
    }
}
