//! Scenario configuration.
//!
//! A scenario is one JSON document. Missing fields take defaults; unknown
//! fields are rejected. See `configs/` in the repository root for samples.

use super::ring::RingConfig;
use crate::fec::CodeSpec;
use crate::interference::InterfererClass;
use crate::telegram::FrameSpec;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::{Path, PathBuf};

/// Code given either by rate shorthand (`"1/3"`, `"2/5"`, `"1/2"`) or in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CodeChoice {
    Rate(String),
    Spec(CodeSpec),
}

impl Default for CodeChoice {
    fn default() -> Self {
        CodeChoice::Rate("1/3".into())
    }
}

impl CodeChoice {
    pub fn resolve(&self) -> Result<CodeSpec> {
        match self {
            CodeChoice::Spec(c) => Ok(c.clone()),
            CodeChoice::Rate(r) => match r.replace(' ', "").as_str() {
                "1/3" => Ok(CodeSpec::rate_1_3()),
                "2/5" => Ok(CodeSpec::rate_2_5()),
                "1/2" => Ok(CodeSpec::rate_1_2()),
                other => Err(Error::config(format!("unknown code rate {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorSpec {
    Genie,
    MapFull,
    MapReduced,
    Scalable {
        partitions: usize,
        #[serde(default = "default_train_length")]
        train_length: usize,
        /// Baum-Welch iterations on the learned transitions; 0 disables.
        #[serde(default)]
        refine_iters: usize,
    },
    Erasure {
        #[serde(default = "default_train_length")]
        train_length: usize,
    },
    ConstVar,
}

impl DetectorSpec {
    /// Label used in result files.
    pub fn label(&self) -> String {
        match self {
            DetectorSpec::Genie => "genie".into(),
            DetectorSpec::MapFull => "map_full".into(),
            DetectorSpec::MapReduced => "map_reduced".into(),
            DetectorSpec::Scalable { partitions, .. } => format!("scalable_p{partitions}"),
            DetectorSpec::Erasure { .. } => "erasure".into(),
            DetectorSpec::ConstVar => "const_var".into(),
        }
    }

    /// Whether the detector needs the interferer parameters.
    pub fn needs_classes(&self) -> bool {
        matches!(self, DetectorSpec::MapFull | DetectorSpec::MapReduced)
    }
}

fn default_train_length() -> usize {
    100_000
}

fn default_trials() -> u64 {
    20_000
}

fn default_interleaver_seed() -> u64 {
    0x7E1E_6A4A
}

fn default_b() -> f64 {
    1.0
}

fn default_approx_realizations() -> u64 {
    10_000
}

fn default_psi_trials() -> u64 {
    2_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiConfig {
    /// Calibration grid in dB; defaults to -8..12 dB in 0.25 dB steps.
    #[serde(default)]
    pub grid_db: Option<Vec<f64>>,
    #[serde(default = "default_psi_trials")]
    pub trials: u64,
    /// Precomputed table (CSV) to load instead of calibrating.
    #[serde(default)]
    pub table: Option<PathBuf>,
}

impl Default for PsiConfig {
    fn default() -> Self {
        PsiConfig { grid_db: None, trials: default_psi_trials(), table: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub code: CodeChoice,
    #[serde(default)]
    pub frame: FrameSpec,
    /// Interferer classes; ignored when `ring` is set.
    #[serde(default)]
    pub classes: Vec<InterfererClass>,
    /// `E_s/N_0 = 1 / sigma_N^2` grid in dB. Exclusive with `sigma2_n`.
    #[serde(default)]
    pub esn0_db: Vec<f64>,
    #[serde(default)]
    pub sigma2_n: Vec<f64>,
    pub detectors: Vec<DetectorSpec>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Index of the first trial; lets a run be split into batches.
    #[serde(default)]
    pub first_trial: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_interleaver_seed")]
    pub interleaver_seed: u64,
    /// CESM scale `b`.
    #[serde(default = "default_b")]
    pub cesm_b: f64,
    /// Relative STDs for the variance-mismatch experiment.
    #[serde(default)]
    pub mismatch_fractions: Vec<f64>,
    #[serde(default)]
    pub ring: Option<RingConfig>,
    #[serde(default)]
    pub psi: PsiConfig,
    #[serde(default = "default_approx_realizations")]
    pub approx_realizations: u64,
    /// Result CSV path; stdout when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Record per-detector CPU seconds. Off by default so output is reproducible.
    #[serde(default)]
    pub timing: bool,
}

/// One SNR point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub esn0_db: f64,
    pub sigma2_n: f64,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn code_spec(&self) -> Result<CodeSpec> {
        self.code.resolve()
    }

    pub fn grid(&self) -> Result<Vec<GridPoint>> {
        let points: Vec<GridPoint> = match (self.esn0_db.is_empty(), self.sigma2_n.is_empty()) {
            (false, true) => self
                .esn0_db
                .iter()
                .map(|&db| GridPoint { esn0_db: db, sigma2_n: 10f64.powf(-db / 10.0) })
                .collect(),
            (true, false) => self
                .sigma2_n
                .iter()
                .map(|&s| GridPoint { esn0_db: -10.0 * s.log10(), sigma2_n: s })
                .collect(),
            (true, true) => return Err(Error::config("either esn0_db or sigma2_n must be given")),
            (false, false) => return Err(Error::config("esn0_db and sigma2_n are mutually exclusive")),
        };
        if let Some(p) = points.iter().find(|p| !(p.sigma2_n.is_finite() && p.sigma2_n > 0.0 && p.esn0_db.is_finite())) {
            return Err(Error::config(format!("invalid grid point {p:?}")));
        }
        Ok(points)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        self.frame.validate()?;
        let code = self.code_spec()?;
        self.frame.subpackets_for(code.codeword_len())?;
        self.grid()?;
        if self.detectors.is_empty() {
            return Err(Error::config("no detectors configured"));
        }
        let mut labels = HashSet::new();
        for d in &self.detectors {
            if !labels.insert(d.label()) {
                return Err(Error::config(format!("detector {} listed twice", d.label())));
            }
            match *d {
                DetectorSpec::Scalable { partitions, train_length, .. } => {
                    if partitions == 0 || train_length < 100 * partitions {
                        return Err(Error::config(format!(
                            "scalable detector needs P >= 1 and at least {} training samples",
                            100 * partitions.max(1)
                        )));
                    }
                }
                DetectorSpec::Erasure { train_length } if train_length < 200 => {
                    return Err(Error::config("erasure detector needs at least 200 training samples"));
                }
                _ => {}
            }
        }
        match &self.ring {
            Some(ring) => {
                ring.validate()?;
                if let Some(d) = self.detectors.iter().find(|d| d.needs_classes()) {
                    return Err(Error::config(format!(
                        "{} needs fixed interferer classes and cannot run on the ring scenario",
                        d.label()
                    )));
                }
            }
            None => {
                if self.classes.is_empty() {
                    return Err(Error::config("at least one interferer class is required"));
                }
            }
        }
        if !(self.cesm_b > 0.0 && self.cesm_b.is_finite()) {
            return Err(Error::config("cesm_b must be positive"));
        }
        if self.mismatch_fractions.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::config("mismatch fractions must be non-negative"));
        }
        if self.psi.trials == 0 || self.approx_realizations == 0 {
            return Err(Error::config("psi trials and approx realizations must be positive"));
        }
        Ok(())
    }

    /// Keeps only the detectors whose label or kind is listed.
    pub fn select_detectors(&mut self, names: &[String]) -> Result<()> {
        let kind = |d: &DetectorSpec| {
            serde_json::to_value(d).ok().and_then(|v| v["kind"].as_str().map(str::to_owned)).unwrap_or_default()
        };
        for n in names {
            if !self.detectors.iter().any(|d| d.label() == *n || kind(d) == *n) {
                return Err(Error::config(format!("detector {n:?} is not configured")));
            }
        }
        self.detectors.retain(|d| names.iter().any(|n| d.label() == *n || kind(d) == *n));
        Ok(())
    }
}
