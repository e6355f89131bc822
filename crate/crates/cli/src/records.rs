use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// One row of a run's metrics file: an epoch for jointly trained models, a
/// stage for hard GBM, a chunk for incremental runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub run_id: String,
    /// Training epochs completed so far (for hard GBM, summed over stages).
    pub epoch: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stage: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chunk: Option<usize>,
    pub train_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test_mse: Option<f64>,
    /// Cumulative training time, excluding data loading and evaluation.
    pub wall_clock_ms: f64,
    /// Per-learner local losses averaged over the epoch's batches; for
    /// hard GBM, the new stage's fit loss.
    pub local_losses: Vec<f64>,
}

pub(crate) fn io_error(path: &Path, err: std::io::Error) -> CliError {
    CliError::Data(sgbm_core::Error::Io {
        path: path.to_path_buf(),
        source: err,
    })
}

/// Line-delimited JSON writer, flushed per record.
pub struct JsonLines {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonLines {
    pub fn create(path: &Path) -> CliResult<Self> {
        let file = File::create(path).map_err(|e| io_error(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> CliResult<()> {
        let line = serde_json::to_string(record)
            .map_err(|e| CliError::Data(sgbm_core::Error::Format(e.to_string())))?;
        writeln!(self.out, "{line}").map_err(|e| io_error(&self.path, e))?;
        self.out.flush().map_err(|e| io_error(&self.path, e))
    }
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| io_error(path, e))
}
