//! Study configuration file.
//!
//! TOML with one table per study; every key is optional and falls back to
//! the defaults of the selected problem.
//!
//! ```toml
//! [study]
//! problem = "poisson-sine-2d"
//! variant = "both"          # first | second | both
//! levels = [8, 16, 32, 64]
//! tau = 100.0
//! seed = 7
//! solver = "direct"         # direct | cg | minres | bicgstab
//! tol = 1e-10
//! out = "results"
//!
//! [tau_sweep]
//! grid = [0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0]
//! level = 32
//!
//! [robustness]
//! distortion = 0.3
//! stretch = [10.0, 1000.0]
//!
//! [adapt]
//! epsilon = 0.01
//! max_iters = 12
//! exponent_mode = "paper"   # paper | richardson
//! base = 16
//! max_cells = 400000
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Default, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub tau_sweep: TauSection,
    #[serde(default)]
    pub robustness: RobustnessSection,
    #[serde(default)]
    pub adapt: AdaptSection,
}

#[derive(Debug, Default, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub problem: Option<String>,
    pub variant: Option<String>,
    pub levels: Option<Vec<usize>>,
    pub tau: Option<f64>,
    pub seed: Option<u64>,
    pub solver: Option<String>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TauSection {
    pub grid: Option<Vec<f64>>,
    pub level: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RobustnessSection {
    pub distortion: Option<f64>,
    pub stretch: Option<Vec<f64>>,
}

#[derive(Debug, Default, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AdaptSection {
    pub epsilon: Option<f64>,
    pub max_iters: Option<usize>,
    pub exponent_mode: Option<String>,
    pub base: Option<usize>,
    pub max_cells: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(FileConfig::parse("").unwrap(), FileConfig::default());
    }

    #[test]
    fn sections_parse() {
        let c = FileConfig::parse(
            r#"
            [study]
            problem = "stokes-poly-2d"
            levels = [4, 8, 16]
            [tau_sweep]
            grid = [1.0, 10.0]
            [adapt]
            exponent_mode = "richardson"
            "#,
        )
        .unwrap();
        assert_eq!(c.study.problem.as_deref(), Some("stokes-poly-2d"));
        assert_eq!(c.study.levels, Some(vec![4, 8, 16]));
        assert_eq!(c.tau_sweep.grid, Some(vec![1.0, 10.0]));
        assert_eq!(c.adapt.exponent_mode.as_deref(), Some("richardson"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(FileConfig::parse("[study]\nproblme = \"x\"").is_err());
        assert!(FileConfig::parse("[studies]").is_err());
    }
}
