//! Optional JSON pipeline configuration; command-line flags take precedence.

use geovuln::precision::DEFAULT_DECIMALS;
use geovuln::tabular::{default_deny_patterns, DenyPattern};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub source_crs: Option<u32>,
    pub tolerance: f64,
    pub decimals: u32,
    pub keep_attributes: Option<Vec<String>>,
    pub deny_patterns: Vec<DenyPattern>,
    pub overview_method: String,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            source_crs: None,
            tolerance: 0.0,
            decimals: DEFAULT_DECIMALS,
            keep_attributes: None,
            deny_patterns: default_deny_patterns(),
            overview_method: "average".into(),
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let cfg: PipelineConfig =
            serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(format!("tolerance must be >= 0, got {}", self.tolerance));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.decimals, 5);
        assert_eq!(cfg.deny_patterns.len(), 3);
    }

    #[test]
    fn parses_partial_json() {
        let cfg: PipelineConfig = serde_json::from_str(
            r#"{"source_crs":3857,"tolerance":0.0001,"deny_patterns":["suffix:_CV"]}"#,
        )
        .unwrap();
        assert_eq!(cfg.source_crs, Some(3857));
        assert_eq!(cfg.decimals, 5);
        assert_eq!(cfg.deny_patterns, vec![DenyPattern::Suffix("_CV".into())]);
    }

    #[test]
    fn rejects_unknown_keys_and_negative_tolerance() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"tol":1}"#).is_err());
        let cfg = PipelineConfig {
            tolerance: -1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
