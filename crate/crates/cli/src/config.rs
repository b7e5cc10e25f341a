//! Run configuration: TOML or JSON file merged with command-line flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use selfsample_core::proxy::{DEFAULT_CURVATURE_K, DEFAULT_DENSITY_K};
use selfsample_core::sampler::LOW_RESOLUTION_POINTS;
use selfsample_core::train::TrainConfig;
use selfsample_core::{Criterion, SamplerConfig};

use crate::error::{CliError, CliResult};

/// What to emphasize. `Uniform` skips labeling and trains on uniform pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Sharp,
    Sparse,
    Uniform,
}

impl Mode {
    pub fn criterion(self) -> Option<Criterion> {
        match self {
            Mode::Sharp => Some(Criterion::Sharp),
            Mode::Sparse => Some(Criterion::Sparse),
            Mode::Uniform => None,
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sharp" => Ok(Mode::Sharp),
            "sparse" => Ok(Mode::Sparse),
            "uniform" => Ok(Mode::Uniform),
            _ => Err(format!(
                "unknown criterion '{s}' (expected sharp, sparse or uniform)"
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sharp => "sharp",
            Mode::Sparse => "sparse",
            Mode::Uniform => "uniform",
        })
    }
}

/// How training pairs are drawn. `Auto` uses uniform pairs for small clouds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    #[default]
    Auto,
    Balanced,
    Uniform,
}

impl FromStr for Sampling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Sampling::Auto),
            "balanced" => Ok(Sampling::Balanced),
            "uniform" => Ok(Sampling::Uniform),
            _ => Err(format!(
                "unknown sampling '{s}' (expected auto, balanced or uniform)"
            )),
        }
    }
}

/// Labeling mechanism. `Auto` pairs threshold with sharp and k-means with sparse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Labeling {
    #[default]
    Auto,
    Threshold,
    Kmeans,
}

impl FromStr for Labeling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Labeling::Auto),
            "threshold" => Ok(Labeling::Threshold),
            "kmeans" => Ok(Labeling::Kmeans),
            _ => Err(format!(
                "unknown labeling '{s}' (expected auto, threshold or kmeans)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub criterion: Mode,
    pub sampling: Sampling,
    pub labeling: Labeling,
    pub p_target: f64,
    pub p_source: f64,
    pub subset_frac: f64,
    pub iters: usize,
    pub lr: f64,
    /// Output size; `None` means the input size.
    pub out_points: Option<usize>,
    /// Experimental: draw inference subsets positive with this probability.
    pub rebalanced_inference: Option<f64>,
    pub curvature_k: usize,
    pub density_k: usize,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SamplerConfig::default();
        let t = TrainConfig::default();
        RunConfig {
            criterion: Mode::default(),
            sampling: Sampling::default(),
            labeling: Labeling::default(),
            p_target: s.p_target,
            p_source: s.p_source,
            subset_frac: s.subset_fraction,
            iters: t.iterations,
            lr: t.learning_rate,
            out_points: None,
            rebalanced_inference: None,
            curvature_k: DEFAULT_CURVATURE_K,
            density_k: DEFAULT_DENSITY_K,
            seed: 0,
            input: None,
            output: None,
            checkpoint: None,
        }
    }
}

/// Values given explicitly on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub criterion: Option<Mode>,
    pub sampling: Option<Sampling>,
    pub labeling: Option<Labeling>,
    pub p_target: Option<f64>,
    pub p_source: Option<f64>,
    pub subset_frac: Option<f64>,
    pub iters: Option<usize>,
    pub lr: Option<f64>,
    pub out_points: Option<usize>,
    pub rebalanced_inference: Option<f64>,
    pub curvature_k: Option<usize>,
    pub density_k: Option<usize>,
    pub seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_str_with_format(text: &str, json: bool) -> Result<Self, String> {
        if json {
            serde_json::from_str(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        }
    }

    /// Loads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        RunConfig::from_str_with_format(&text, json)
            .map_err(|m| CliError::Config(format!("{}: {m}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Flags win over file values.
    pub fn merge(mut self, o: Overrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        take!(
            criterion,
            sampling,
            labeling,
            p_target,
            p_source,
            subset_frac,
            iters,
            lr,
            curvature_k,
            density_k,
            seed
        );
        macro_rules! take_opt {
            ($($f:ident),*) => { $( if o.$f.is_some() { self.$f = o.$f; } )* };
        }
        take_opt!(out_points, rebalanced_inference, input, output, checkpoint);
        self
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            p_source: self.p_source,
            p_target: self.p_target,
            subset_fraction: self.subset_frac,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            iterations: self.iters,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    /// Seed for inference subsets; distinct from the training streams.
    pub fn inference_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    /// Whether training pairs are class-rebalanced for a cloud of `n` points.
    pub fn balanced_pairs(&self, n: usize) -> bool {
        match (self.criterion, self.sampling) {
            (Mode::Uniform, _) | (_, Sampling::Uniform) => false,
            (_, Sampling::Balanced) => true,
            (_, Sampling::Auto) => n >= LOW_RESOLUTION_POINTS,
        }
    }

    /// Cross-field checks that do not depend on the input cloud.
    pub fn validate(&self) -> CliResult<()> {
        if self.criterion == Mode::Uniform && self.sampling == Sampling::Balanced {
            return Err(CliError::Usage(
                "--criterion uniform conflicts with --sampling balanced".into(),
            ));
        }
        if self.criterion == Mode::Uniform && self.rebalanced_inference.is_some() {
            return Err(CliError::Usage(
                "rebalanced inference needs a sharp or sparse criterion".into(),
            ));
        }
        if let Some(p) = self.rebalanced_inference {
            if !(0.0..=1.0).contains(&p) {
                return Err(CliError::Usage(
                    "rebalanced inference probability must lie in [0, 1]".into(),
                ));
            }
        }
        if self.curvature_k < 3 || self.density_k < 1 {
            return Err(CliError::Usage(
                "neighborhood sizes must be at least 3 (curvature) and 1 (density)".into(),
            ));
        }
        self.sampler_config().validate()?;
        self.train_config().validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file = RunConfig::from_str_with_format(
            "criterion = \"sparse\"\niters = 50\nseed = 3\n",
            false,
        )
        .unwrap();
        let merged = file.merge(Overrides {
            iters: Some(7),
            ..Overrides::default()
        });
        assert_eq!(merged.criterion, Mode::Sparse);
        assert_eq!(merged.iters, 7);
        assert_eq!(merged.seed, 3);
    }

    #[test]
    fn toml_and_json_round_trip() {
        let cfg = RunConfig {
            criterion: Mode::Uniform,
            out_points: Some(1234),
            output: Some("a/b.ply".into()),
            ..RunConfig::default()
        };
        let back = RunConfig::from_str_with_format(&cfg.to_toml(), false).unwrap();
        assert_eq!(back, cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_str_with_format(&json, true).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_str_with_format("itres = 5\n", false).is_err());
    }

    #[test]
    fn conflicts_detected() {
        let cfg = RunConfig {
            criterion: Mode::Uniform,
            sampling: Sampling::Balanced,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig {
            p_source: 0.9,
            p_target: 0.5,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn auto_sampling_uses_cloud_size() {
        let cfg = RunConfig::default();
        assert!(!cfg.balanced_pairs(19_999));
        assert!(cfg.balanced_pairs(20_000));
    }
}
