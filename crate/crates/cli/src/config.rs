//! TOML configuration file. Every key is optional; command-line flags win
//! over the file, and the file wins over built-in defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::run::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub fuse: FuseSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub gamma: GammaSection,
    #[serde(default)]
    pub stats: StatsSection,
    #[serde(default)]
    pub cav: CavSection,
    #[serde(default)]
    pub pcbm: PcbmSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub error: ErrorSection,
    #[serde(default)]
    pub synth: SynthSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuseSection {
    pub threshold: Option<f64>,
    pub basis: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub thresholds: Option<Vec<f64>>,
    pub basis: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaSection {
    pub n_null: Option<usize>,
    pub exclude: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsSection {
    pub drop: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavSection {
    pub negatives: Option<String>,
    pub c_grid: Option<Vec<f64>>,
    pub folds: Option<usize>,
    pub cv_folds: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcbmSection {
    pub kinds: Option<Vec<String>>,
    pub depth: Option<usize>,
    pub report_depth: Option<usize>,
    pub l2: Option<f64>,
    pub folds: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub model: Option<String>,
    pub train: Option<Vec<String>>,
    pub test: Option<Vec<String>>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub folds: Option<usize>,
    pub depth: Option<usize>,
    pub l2: Option<f64>,
    pub leave_movies_out: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorSection {
    pub l2: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub preset: Option<String>,
    pub films: Option<usize>,
    pub clips_per_film: Option<usize>,
    pub dim: Option<usize>,
    pub format: Option<String>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = crate::run::read_text(path)?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// First present value of flag, file, default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Like [`pick`], for list flags where an empty list means "not given".
pub fn pick_list<T>(flag: Vec<T>, file: Option<Vec<T>>, default: Vec<T>) -> Vec<T> {
    if flag.is_empty() {
        file.unwrap_or(default)
    } else {
        flag
    }
}

pub fn parse_with<T: std::str::FromStr>(what: &str, s: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    s.parse()
        .map_err(|e| CliError::Usage(format!("{what}: {e}")))
}
