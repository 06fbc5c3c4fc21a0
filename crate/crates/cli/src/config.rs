//! Experiment configuration: one JSON document per run.

use crate::error::CliError;
use quasicorr::scheme::SchemeDescription;
use quasicorr::spectrum::DEFAULT_EPS_EXT;
use quasicorr::{preset, CutProjectScheme, GaussianTestFunction, HullPoint, TranslateGrid, Window};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// A preset name or an inline basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemeSpec {
    Preset(String),
    Inline(SchemeDescription),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HullSpec {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: SchemeSpec,
    /// `interval:lo,hi` or `polygon:x,y;x,y;…`; defaults to the preset window.
    #[serde(default)]
    pub window: Option<String>,
    /// Edge length of the observation cube.
    pub r: f64,
    #[serde(default)]
    pub seed: u64,
    /// Fixed hull point; sampled from `seed` when absent.
    #[serde(default)]
    pub hull: Option<HullSpec>,
    /// Existing patch file, read instead of generating one.
    #[serde(default)]
    pub patch: Option<PathBuf>,
    #[serde(default = "default_k_max")]
    pub k_max: f64,
    /// Absolute Bragg threshold; `1e-6·density²` when absent.
    #[serde(default)]
    pub eps_bragg: Option<f64>,
    #[serde(default)]
    pub eps_ext: Option<f64>,
    #[serde(default)]
    pub grid: Option<TranslateGrid>,
    /// Test functions for `correlate`.
    #[serde(default)]
    pub gaussians: Vec<GaussianTestFunction>,
    /// Moment orders probed by `reconstruct` and `verify`.
    #[serde(default = "default_moments")]
    pub moments: Vec<usize>,
    /// Spatial width of the moment probes.
    #[serde(default = "default_probe_sigma")]
    pub probe_sigma: f64,
    /// Explicit cycles (integer coordinates of each entry); generated when empty.
    #[serde(default)]
    pub cycles: Vec<Vec<Vec<i64>>>,
    #[serde(default = "default_cycle_length")]
    pub cycle_length: usize,
    #[serde(default = "default_cycle_count")]
    pub cycle_count: usize,
    /// Decomposition order.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_top_peaks")]
    pub top_peaks: usize,
    #[serde(default = "default_alphabet")]
    pub alphabet_size: usize,
    #[serde(default = "default_extension_samples")]
    pub extension_samples: usize,
    /// Spectral width of the probes in `cyclefn`.
    #[serde(default = "default_sigma_k")]
    pub sigma_k: f64,
    /// Bragg and cycle-function tolerance.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_tolerance")]
    pub moment_tolerance: f64,
    #[serde(default = "default_tolerance")]
    pub identity_tolerance: f64,
}

fn default_k_max() -> f64 {
    5.0
}
fn default_moments() -> Vec<usize> {
    vec![2, 3]
}
fn default_probe_sigma() -> f64 {
    3.0
}
fn default_cycle_length() -> usize {
    3
}
fn default_cycle_count() -> usize {
    10
}
fn default_n() -> usize {
    1
}
fn default_top_peaks() -> usize {
    20
}
fn default_alphabet() -> usize {
    12
}
fn default_extension_samples() -> usize {
    20
}
fn default_sigma_k() -> f64 {
    0.01
}
fn default_tolerance() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn check(&self) -> Result<(), CliError> {
        let positive = [
            ("r", self.r),
            ("k_max", self.k_max),
            ("probe_sigma", self.probe_sigma),
            ("sigma_k", self.sigma_k),
            ("tolerance", self.tolerance),
            ("moment_tolerance", self.moment_tolerance),
            ("identity_tolerance", self.identity_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Usage(format!("config: `{name}` must be positive and finite, got {v}")));
            }
        }
        if self.n == 0 {
            return Err(CliError::Usage("config: `n` must be at least 1".into()));
        }
        if self.moments.contains(&0) {
            return Err(CliError::Usage("config: moment orders must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn scheme(&self) -> Result<CutProjectScheme, CliError> {
        match &self.scheme {
            SchemeSpec::Preset(name) => preset(name).map_err(|e| CliError::Usage(e.to_string())),
            SchemeSpec::Inline(desc) => CutProjectScheme::from_description(desc).map_err(CliError::from),
        }
    }

    pub fn window(&self) -> Result<Window, CliError> {
        match (&self.window, &self.scheme) {
            (Some(w), _) => w.parse::<Window>().map_err(|e| CliError::Usage(e.to_string())),
            (None, SchemeSpec::Preset(name)) => {
                Window::for_preset(name).map_err(|e| CliError::Usage(e.to_string()))
            }
            (None, SchemeSpec::Inline(_)) => {
                Err(CliError::Usage("config: inline schemes need an explicit `window`".into()))
            }
        }
    }

    pub fn hull(&self) -> Option<HullPoint> {
        self.hull.as_ref().map(|h| HullPoint::new(h.u.clone(), h.v.clone()))
    }

    pub fn eps_ext(&self) -> f64 {
        self.eps_ext.unwrap_or(DEFAULT_EPS_EXT)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_json(r#"{"scheme":"fibonacci","r":100}"#).unwrap();
        assert_eq!(c.moments, vec![2, 3]);
        assert_eq!(c.n, 1);
        assert!(c.window().is_ok());
    }

    #[test]
    fn inline_scheme() {
        let text = r#"{"scheme":{"label":"z","d":1,"e":1,"basis":[1,0,0,1]},"window":"interval:-0.5,0.5","r":10}"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.scheme().unwrap().d(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "{",
            r#"{"scheme":"fibonacci"}"#,
            r#"{"scheme":"fibonacci","r":100,"bogus":1}"#,
            r#"{"scheme":"fibonacci","r":-1}"#,
            r#"{"scheme":"fibonacci","r":10,"n":0}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(text), Err(CliError::Usage(_))), "{text}");
        }
        let c = ExperimentConfig::from_json(r#"{"scheme":"penrose","r":10}"#).unwrap();
        assert!(matches!(c.scheme(), Err(CliError::Usage(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::from_json(r#"{"scheme":"fibonacci","r":100}"#).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
