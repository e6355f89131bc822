use std::path::{Path, PathBuf};

use sgbm_core::{
    load_csv, load_csv_regression, load_idx, make_synthetic, split, standardize, Dataset,
    Standardizer,
};

use crate::error::{data_error, CliError, CliResult};
use crate::settings::{DataFormat, DataSpec};

/// Train/test pair ready for training, features already normalized if
/// requested.
#[derive(Clone, Debug)]
pub struct LoadedData {
    pub train: Dataset,
    pub test: Dataset,
    pub standardizer: Option<Standardizer>,
}

/// Resolves `<dir>/<stem>` or `<dir>/<stem>.gz`.
fn idx_file(dir: &Path, stem: &str) -> CliResult<PathBuf> {
    let plain = dir.join(stem);
    if plain.exists() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{stem}.gz"));
    if gz.exists() {
        return Ok(gz);
    }
    Err(CliError::Data(sgbm_core::Error::Io {
        path: plain,
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "idx file not found"),
    }))
}

fn load_csv_file(spec: &DataSpec, path: &Path) -> CliResult<Dataset> {
    match spec.targets {
        Some(k) => load_csv_regression(path, k, spec.has_header),
        None => load_csv(path, &spec.label_column, spec.has_header),
    }
    .map_err(data_error)
}

/// Reads or generates the raw train/test pair, without normalization.
pub fn load_raw(spec: &DataSpec, seed: u64) -> CliResult<(Dataset, Dataset)> {
    match spec.format {
        DataFormat::Synthetic(kind) => {
            let all = make_synthetic(kind, spec.samples + spec.test_samples, seed)?.dataset;
            let train_idx: Vec<usize> = (0..spec.samples).collect();
            let test_idx: Vec<usize> = (spec.samples..all.len()).collect();
            Ok((all.subset(&train_idx)?, all.subset(&test_idx)?))
        }
        DataFormat::Idx => {
            let dir = spec.path.as_deref().expect("validated");
            let train = load_idx(
                idx_file(dir, "train-images-idx3-ubyte")?,
                idx_file(dir, "train-labels-idx1-ubyte")?,
            )
            .map_err(data_error)?;
            let test = load_idx(
                idx_file(dir, "t10k-images-idx3-ubyte")?,
                idx_file(dir, "t10k-labels-idx1-ubyte")?,
            )
            .map_err(data_error)?;
            Ok((train, test))
        }
        DataFormat::Csv => {
            let train = load_csv_file(spec, spec.path.as_deref().expect("validated"))?;
            match &spec.test_path {
                Some(test_path) => {
                    let test = load_csv_file(spec, test_path)?;
                    if test.feature_dim() != train.feature_dim()
                        || test.output_dim() != train.output_dim()
                    {
                        return Err(CliError::Data(sgbm_core::Error::Validation(format!(
                            "test file has {} features and {} outputs, training file {} and {}",
                            test.feature_dim(),
                            test.output_dim(),
                            train.feature_dim(),
                            train.output_dim()
                        ))));
                    }
                    Ok((train, test))
                }
                None => split(&train, 1.0 - spec.test_fraction, seed).map_err(data_error),
            }
        }
    }
}

pub fn load(spec: &DataSpec, seed: u64) -> CliResult<LoadedData> {
    let (train, test) = load_raw(spec, seed)?;
    if spec.standardize {
        let (train, test, stats) = standardize(&train, &test)?;
        Ok(LoadedData {
            train,
            test,
            standardizer: Some(stats),
        })
    } else {
        Ok(LoadedData {
            train,
            test,
            standardizer: None,
        })
    }
}
