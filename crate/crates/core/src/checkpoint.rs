//! Versioned JSON checkpoints. Floats are written in shortest round-trip
//! form and parsed exactly, so parameters survive a save/load bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boosting::{HardGbmModel, SgbmModel, SoftAveragingModel};
use crate::data::{Standardizer, Task};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::matrix::Matrix;

pub const CHECKPOINT_FORMAT: &str = "sgbm-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Any trained ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "state", rename_all = "snake_case")]
pub enum Model {
    Sgbm(SgbmModel),
    HardGbm(HardGbmModel),
    SoftAvg(SoftAveragingModel),
}

impl Model {
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            Model::Sgbm(m) => m.predict(x),
            Model::HardGbm(m) => m.predict(x),
            Model::SoftAvg(m) => m.predict(x),
        }
    }

    pub fn loss(&self) -> LossKind {
        match self {
            Model::Sgbm(m) => m.loss(),
            Model::HardGbm(m) => m.loss(),
            Model::SoftAvg(m) => m.loss(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::Sgbm(m) => m.input_dim(),
            Model::HardGbm(m) => m.input_dim(),
            Model::SoftAvg(m) => m.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Model::Sgbm(m) => m.output_dim(),
            Model::HardGbm(m) => m.output_dim(),
            Model::SoftAvg(m) => m.output_dim(),
        }
    }

    pub fn num_learners(&self) -> usize {
        match self {
            Model::Sgbm(m) => m.num_learners(),
            Model::HardGbm(m) => m.num_learners(),
            Model::SoftAvg(m) => m.num_learners(),
        }
    }
}

/// A model plus what is needed to evaluate it on raw data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub task: Task,
    /// Feature normalization fitted at training time, if any.
    pub standardizer: Option<Standardizer>,
    pub model: Model,
}

impl Checkpoint {
    pub fn new(model: Model, task: Task, standardizer: Option<Standardizer>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            task,
            standardizer,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // Check the header first so a version bump reports as such rather
        // than as a schema error.
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header = serde_json::from_str(text)
            .map_err(|e| Error::Format(format!("not a checkpoint: {e}")))?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!(
                "unknown checkpoint format '{}'",
                header.format
            )));
        }
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                header.version
            )));
        }
        serde_json::from_str(text).map_err(|e| Error::Format(format!("corrupt checkpoint: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Applies the stored normalization, then the model.
    pub fn predict_raw(&self, features: &Matrix) -> Result<Matrix> {
        match &self.standardizer {
            Some(s) => self.model.predict(&s.transform(features)?),
            None => self.model.predict(features),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LearnerSpec;

    fn sample() -> Checkpoint {
        let model = SgbmModel::new(
            &LearnerSpec::Tree { depth: 2 },
            2,
            3,
            2,
            LossKind::SoftmaxCrossEntropy,
            11,
        )
        .unwrap();
        Checkpoint::new(
            Model::Sgbm(model),
            Task::Classification { classes: 2 },
            None,
        )
    }

    #[test]
    fn json_round_trip_is_exact() {
        let ck = sample();
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_json().unwrap(), ck.to_json().unwrap());
    }

    #[test]
    fn version_mismatch_is_format_error() {
        let mut ck = sample();
        ck.version = 2;
        let text = ck.to_json().unwrap();
        assert!(matches!(
            Checkpoint::from_json(&text),
            Err(Error::Format(_))
        ));
        ck.version = 1;
        ck.format = "other".into();
        assert!(matches!(
            Checkpoint::from_json(&ck.to_json().unwrap()),
            Err(Error::Format(_))
        ));
        assert!(matches!(Checkpoint::from_json("{}"), Err(Error::Format(_))));
    }
}
