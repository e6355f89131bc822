//! Temperature-softened relabelling and student training.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::boosting::{BatchRecord, SgbmModel, TrainConfig};
use crate::data::{map_csv_error, Dataset};
use crate::error::{Error, Result};
use crate::learners::LearnerSpec;
use crate::loss::LossKind;
use crate::matrix::Matrix;

/// Row-wise `softmax(logits / temperature)`.
pub fn soften(logits: &Matrix, temperature: f64) -> Result<Matrix> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::invalid(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    Ok(logits.map(|v| v / temperature).softmax_rows())
}

/// Teacher logits aligned row for row with a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct TeacherScores {
    pub logits: Matrix,
    /// File path or model identifier the scores came from.
    pub source: String,
}

impl TeacherScores {
    pub fn new(logits: Matrix, source: impl Into<String>) -> Self {
        Self {
            logits,
            source: source.into(),
        }
    }

    /// Scores of an in-library model on `features`.
    pub fn from_model(
        model: &SgbmModel,
        features: &Matrix,
        source: impl Into<String>,
    ) -> Result<Self> {
        Ok(Self::new(model.predict(features)?, source))
    }

    pub fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if self.logits.rows() != rows {
            return Err(Error::invalid(format!(
                "teacher scores have N={} rows but dataset has N={rows}",
                self.logits.rows()
            )));
        }
        if self.logits.cols() != cols {
            return Err(Error::invalid(format!(
                "teacher scores have K={} columns but dataset has K={cols}",
                self.logits.cols()
            )));
        }
        Ok(())
    }
}

/// Reads a header-less CSV of `expected_rows × expected_cols` logits.
pub fn load_teacher_scores(
    path: impl AsRef<Path>,
    expected_rows: usize,
    expected_cols: usize,
) -> Result<TeacherScores> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let logits = parse_scores(file)?;
    let scores = TeacherScores::new(logits, path.display().to_string());
    scores.check_shape(expected_rows, expected_cols)?;
    Ok(scores)
}

fn parse_scores(reader: impl std::io::Read) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = 0;
    for record in rdr.records() {
        let record = record.map_err(map_csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        cols = record.len();
        for (c, field) in record.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("column {c}: '{field}' is not a finite number"),
                    })
                }
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::invalid("empty teacher score file"));
    }
    Matrix::from_vec(rows, cols, values)
}

/// Writes logits as header-less CSV using shortest round-trip formatting.
pub fn write_teacher_scores(scores: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for row in scores.iter_rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// `dataset` with its targets replaced by `soften(teacher, temperature)`.
pub fn distill_dataset(
    dataset: &Dataset,
    teacher: &TeacherScores,
    temperature: f64,
) -> Result<Dataset> {
    if !dataset.task().is_classification() {
        return Err(Error::invalid(
            "distillation needs a classification dataset",
        ));
    }
    teacher.check_shape(dataset.len(), dataset.output_dim())?;
    dataset.relabel_soft(soften(&teacher.logits, temperature)?)
}

/// Relabels `dataset` with `soften(teacher, temperature)` and trains a
/// student ensemble on the soft targets under soft-target cross-entropy.
pub fn distill_train(
    dataset: &Dataset,
    teacher: &TeacherScores,
    temperature: f64,
    spec: &LearnerSpec,
    num_learners: usize,
    config: &TrainConfig,
    on_batch: impl FnMut(&BatchRecord),
) -> Result<SgbmModel> {
    let relabelled = distill_dataset(dataset, teacher, temperature)?;
    let mut student = SgbmModel::new(
        spec,
        num_learners,
        dataset.feature_dim(),
        dataset.output_dim(),
        LossKind::SoftTargetCrossEntropy,
        config.seed,
    )?;
    student.fit(&relabelled, config, on_batch)?;
    Ok(student)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_logits_give_half() {
        let z = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        for t in [0.5, 1.0, 20.0] {
            assert_eq!(soften(&z, t).unwrap().as_slice(), &[0.5, 0.5]);
        }
    }

    #[test]
    fn temperature_one_is_softmax() {
        let z = Matrix::from_rows(&[vec![1.3, -0.2, 4.0], vec![0.0, 7.5, -3.0]]).unwrap();
        assert_eq!(soften(&z, 1.0).unwrap(), z.softmax_rows());
    }

    #[test]
    fn four_zero_logits() {
        let z = Matrix::from_rows(&[vec![4.0, 0.0]]).unwrap();
        let t1 = soften(&z, 1.0).unwrap();
        let t20 = soften(&z, 20.0).unwrap();
        // σ(4) and σ(0.2)
        assert!((t1.get(0, 0) - 1.0 / (1.0 + (-4.0f64).exp())).abs() < 1e-15);
        assert!((t1.get(0, 0) - 0.982).abs() < 5e-4);
        assert!((t20.get(0, 0) - 0.550).abs() < 5e-4);
    }

    #[test]
    fn nonpositive_temperature_rejected() {
        let z = Matrix::zeros(1, 2);
        for t in [0.0, -1.0, f64::NAN] {
            assert!(matches!(soften(&z, t), Err(Error::Validation(_))));
        }
    }

    #[test]
    fn score_parsing() {
        let m = parse_scores("1,2\n3.5,-4\n".as_bytes()).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert!(matches!(
            parse_scores("1,2\n3\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_scores("1,x\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn shape_mismatch_names_both_values() {
        let t = TeacherScores::new(Matrix::zeros(4, 3), "mem");
        let err = t.check_shape(4, 10).unwrap_err().to_string();
        assert!(err.contains("K=3") && err.contains("K=10"), "{err}");
        assert!(t.check_shape(5, 3).is_err());
    }
}
