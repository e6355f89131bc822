//! Common run settings. Every field is optional so that a command line, a
//! TOML config file, and the built-in defaults can be layered:
//! command-line flags win over file values, which win over defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::Deserialize;

use sgbm_core::{LabelColumn, LearnerSpec, SyntheticKind, TrainConfig};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SAMPLES: usize = 2000;
pub const DEFAULT_TEST_SAMPLES: usize = 1000;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_NUM_LEARNERS: usize = 10;
pub const DEFAULT_DEPTH: usize = 5;
pub const DEFAULT_LAYERS: [usize; 2] = [50, 30];
pub const DEFAULT_EPSILON: f64 = 1.0;

#[derive(Args, Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Training data: CSV file, or directory holding the IDX files.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// csv, idx, or synthetic:<gaussians2|multi_sine>.
    #[arg(long)]
    pub format: Option<String>,
    /// Separate CSV test file (otherwise a seeded split of --data).
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    /// Synthetic training set size.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Synthetic test set size.
    #[arg(long)]
    pub test_samples: Option<usize>,
    /// Fraction of a CSV file held out for testing when no test file is given.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// CSV label column: index, header name, or `last`.
    #[arg(long)]
    pub label_column: Option<String>,
    /// CSV files have no header row.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub no_header: Option<bool>,
    /// Treat the last K CSV columns as regression targets.
    #[arg(long)]
    pub targets: Option<usize>,
    /// Standardize features with training-set statistics.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub standardize: Option<bool>,

    /// sgbm, hard_gbm, or soft_avg.
    #[arg(long)]
    pub algo: Option<String>,
    /// tree or mlp.
    #[arg(long)]
    pub learner: Option<String>,
    #[arg(long)]
    pub num_learners: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Hidden layer widths, e.g. `50,30`.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub layers: Option<Vec<usize>>,
    /// Hard GBM shrinkage.
    #[arg(long)]
    pub epsilon: Option<f64>,

    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (or file, for gen-data).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

macro_rules! overlay_fields {
    ($top:expr, $bottom:expr, $($field:ident),* $(,)?) => {
        Settings { $($field: $top.$field.or($bottom.$field),)* }
    };
}

impl Settings {
    /// `self` where set, otherwise `lower`.
    pub fn overlay(self, lower: Settings) -> Settings {
        overlay_fields!(
            self,
            lower,
            data,
            format,
            test_data,
            samples,
            test_samples,
            test_fraction,
            label_column,
            no_header,
            targets,
            standardize,
            algo,
            learner,
            num_learners,
            depth,
            layers,
            epsilon,
            epochs,
            batch_size,
            lr,
            weight_decay,
            seed,
            out,
        )
    }

    pub fn from_toml_file(path: &Path) -> CliResult<Settings> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Data(sgbm_core::Error::Io {
                path: path.to_path_buf(),
                source: e,
            })
        })?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    /// Command-line settings layered over an optional config file.
    pub fn layered(cli: Settings, file: Option<&Path>) -> CliResult<Settings> {
        match file {
            Some(path) => Ok(cli.overlay(Settings::from_toml_file(path)?)),
            None => Ok(cli),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Idx,
    Synthetic(SyntheticKind),
}

impl FromStr for DataFormat {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "idx" => Ok(DataFormat::Idx),
            _ => match s.strip_prefix("synthetic:") {
                Some(kind) => kind
                    .parse()
                    .map(DataFormat::Synthetic)
                    .map_err(|e: sgbm_core::Error| CliError::config(e.to_string())),
                None => Err(CliError::config(format!(
                    "unknown format '{s}' (expected csv, idx, or synthetic:<kind>)"
                ))),
            },
        }
    }
}

impl std::fmt::Display for DataFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DataFormat::Csv => f.write_str("csv"),
            DataFormat::Idx => f.write_str("idx"),
            DataFormat::Synthetic(kind) => write!(f, "synthetic:{kind}"),
        }
    }
}

impl DataFormat {
    /// Epoch budget used when `--epochs` is not given.
    pub fn default_epochs(self) -> Option<usize> {
        match self {
            DataFormat::Synthetic(SyntheticKind::Gaussians2) => Some(30),
            DataFormat::Synthetic(SyntheticKind::MultiSine) => Some(100),
            DataFormat::Idx => Some(30),
            DataFormat::Csv => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataSpec {
    pub format: DataFormat,
    pub path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub samples: usize,
    pub test_samples: usize,
    pub test_fraction: f64,
    pub label_column: LabelColumn,
    pub has_header: bool,
    pub targets: Option<usize>,
    pub standardize: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    Sgbm,
    HardGbm,
    SoftAvg,
}

impl FromStr for Algo {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "sgbm" => Ok(Algo::Sgbm),
            "hard_gbm" => Ok(Algo::HardGbm),
            "soft_avg" => Ok(Algo::SoftAvg),
            _ => Err(CliError::config(format!(
                "unknown algorithm '{s}' (expected sgbm, hard_gbm, or soft_avg)"
            ))),
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algo::Sgbm => "sgbm",
            Algo::HardGbm => "hard_gbm",
            Algo::SoftAvg => "soft_avg",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub algo: Algo,
    pub learner: LearnerSpec,
    pub num_learners: usize,
    pub epsilon: f64,
}

impl ModelSpec {
    pub fn learner_name(&self) -> &'static str {
        match self.learner {
            LearnerSpec::Tree { .. } => "tree",
            LearnerSpec::Mlp { .. } => "mlp",
            LearnerSpec::Constant => "constant",
        }
    }
}

/// Fully resolved and validated settings for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: DataSpec,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Applies defaults and rejects invalid values and combinations before
    /// any data is read.
    pub fn resolve(s: &Settings) -> CliResult<RunConfig> {
        let format: DataFormat = s
            .format
            .as_deref()
            .unwrap_or("synthetic:gaussians2")
            .parse()?;
        let data = resolve_data(s, format)?;
        let model = resolve_model(s)?;

        let epochs = match s.epochs.or(format.default_epochs()) {
            Some(e) => e,
            None => return Err(CliError::config("--epochs is required for csv data")),
        };
        let defaults = TrainConfig::default();
        let train = TrainConfig {
            epochs,
            batch_size: s.batch_size.unwrap_or(defaults.batch_size),
            lr: s.lr.unwrap_or(defaults.lr),
            weight_decay: s.weight_decay.unwrap_or(defaults.weight_decay),
            seed: s.seed.unwrap_or(defaults.seed),
            shuffle: true,
        };
        train
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;

        Ok(RunConfig {
            data,
            model,
            train,
            out: s.out.clone(),
        })
    }

    /// Only the data description and seed, for commands that do not train.
    pub fn resolve_data(s: &Settings) -> CliResult<(DataSpec, u64)> {
        let format: DataFormat = s
            .format
            .as_deref()
            .unwrap_or("synthetic:gaussians2")
            .parse()?;
        Ok((
            resolve_data(s, format)?,
            s.seed.unwrap_or(TrainConfig::default().seed),
        ))
    }

    pub fn run_id(&self) -> String {
        format!(
            "{}-{}-m{}-s{}",
            self.model.algo,
            self.model.learner_name(),
            self.model.num_learners,
            self.train.seed
        )
    }
}

fn resolve_data(s: &Settings, format: DataFormat) -> CliResult<DataSpec> {
    let test_fraction = s.test_fraction.unwrap_or(DEFAULT_TEST_FRACTION);
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CliError::config(format!(
            "--test-fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let samples = s.samples.unwrap_or(DEFAULT_SAMPLES);
    let test_samples = s.test_samples.unwrap_or(DEFAULT_TEST_SAMPLES);
    if samples == 0 || test_samples == 0 {
        return Err(CliError::config(
            "--samples and --test-samples must be positive",
        ));
    }
    match format {
        DataFormat::Csv | DataFormat::Idx => {
            let path = s
                .data
                .as_ref()
                .ok_or_else(|| CliError::config(format!("--data is required for {format} data")))?;
            if !path.exists() {
                return Err(missing(path));
            }
        }
        DataFormat::Synthetic(_) => {
            if s.data.is_some() {
                return Err(CliError::config(
                    "--data cannot be combined with synthetic data",
                ));
            }
        }
    }
    if let Some(test) = &s.test_data {
        if format != DataFormat::Csv {
            return Err(CliError::config("--test-data is only used with csv data"));
        }
        if !test.exists() {
            return Err(missing(test));
        }
    }
    if s.targets.is_some() && format != DataFormat::Csv {
        return Err(CliError::config("--targets is only used with csv data"));
    }
    if s.targets == Some(0) {
        return Err(CliError::config("--targets must be positive"));
    }
    let label_column = s
        .label_column
        .as_deref()
        .unwrap_or("last")
        .parse::<LabelColumn>()
        .unwrap_or_else(|never| match never {});
    Ok(DataSpec {
        format,
        path: s.data.clone(),
        test_path: s.test_data.clone(),
        samples,
        test_samples,
        test_fraction,
        label_column,
        has_header: !s.no_header.unwrap_or(false),
        targets: s.targets,
        standardize: s.standardize.unwrap_or(false),
    })
}

fn resolve_model(s: &Settings) -> CliResult<ModelSpec> {
    let algo: Algo = s.algo.as_deref().unwrap_or("sgbm").parse()?;
    let num_learners = s.num_learners.unwrap_or(DEFAULT_NUM_LEARNERS);
    if num_learners == 0 {
        return Err(CliError::config("--num-learners must be at least 1"));
    }
    let learner = match s.learner.as_deref().unwrap_or("tree") {
        "tree" => {
            if s.layers.is_some() {
                return Err(CliError::config("--layers applies to mlp learners only"));
            }
            LearnerSpec::Tree {
                depth: s.depth.unwrap_or(DEFAULT_DEPTH),
            }
        }
        "mlp" => {
            if s.depth.is_some() {
                return Err(CliError::config("--depth applies to tree learners only"));
            }
            LearnerSpec::Mlp {
                hidden: s.layers.clone().unwrap_or_else(|| DEFAULT_LAYERS.to_vec()),
            }
        }
        other => {
            return Err(CliError::config(format!(
                "unknown learner '{other}' (expected tree or mlp)"
            )))
        }
    };
    learner
        .validate()
        .map_err(|e| CliError::config(e.to_string()))?;
    let epsilon = s.epsilon.unwrap_or(DEFAULT_EPSILON);
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(CliError::config(format!(
            "--epsilon must be >= 0, got {epsilon}"
        )));
    }
    Ok(ModelSpec {
        algo,
        learner,
        num_learners,
        epsilon,
    })
}

fn missing(path: &Path) -> CliError {
    CliError::Data(sgbm_core::Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_beats_file_beats_default() {
        let cli = Settings {
            epochs: Some(5),
            ..Settings::default()
        };
        let file = Settings {
            epochs: Some(9),
            lr: Some(0.01),
            ..Settings::default()
        };
        let merged = cli.overlay(file);
        let cfg = RunConfig::resolve(&merged).unwrap();
        assert_eq!(cfg.train.epochs, 5);
        assert_eq!(cfg.train.lr, 0.01);
        assert_eq!(cfg.train.batch_size, 128);
        assert_eq!(cfg.train.weight_decay, 5e-4);
    }

    #[test]
    fn toml_keys_match_flags() {
        let s: Settings = toml::from_str(
            "format = \"synthetic:multi_sine\"\nnum-learners = 4\nlayers = [8, 4]\nlearner = \"mlp\"\nstandardize = true\n",
        )
        .unwrap();
        assert_eq!(s.num_learners, Some(4));
        assert_eq!(s.layers, Some(vec![8, 4]));
        assert!(toml::from_str::<Settings>("bogus = 1").is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for s in [
            Settings {
                num_learners: Some(0),
                ..Settings::default()
            },
            Settings {
                depth: Some(0),
                ..Settings::default()
            },
            Settings {
                batch_size: Some(0),
                ..Settings::default()
            },
            Settings {
                epochs: Some(0),
                ..Settings::default()
            },
            Settings {
                algo: Some("xgb".into()),
                ..Settings::default()
            },
            Settings {
                format: Some("parquet".into()),
                ..Settings::default()
            },
            Settings {
                format: Some("synthetic:spirals".into()),
                ..Settings::default()
            },
            Settings {
                format: Some("csv".into()),
                data: Some("x.csv".into()),
                ..Settings::default()
            }
            .overlay(Settings::default()),
        ] {
            let err = RunConfig::resolve(&s).unwrap_err();
            assert!(
                matches!(err, CliError::Config(_) | CliError::Data(_)),
                "{err}"
            );
        }
        let err = RunConfig::resolve(&Settings {
            num_learners: Some(0),
            ..Settings::default()
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn missing_data_file_is_io_error() {
        let s = Settings {
            format: Some("csv".into()),
            data: Some("/nonexistent/train.csv".into()),
            epochs: Some(1),
            ..Settings::default()
        };
        assert_eq!(RunConfig::resolve(&s).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn run_id_is_stable() {
        let cfg = RunConfig::resolve(&Settings {
            seed: Some(3),
            ..Settings::default()
        })
        .unwrap();
        assert_eq!(cfg.run_id(), "sgbm-tree-m10-s3");
    }
}
