use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, Task};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    /// Requires a header row.
    Name(String),
    Last,
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// Numbers select by index, `last` the final column, anything else a
    /// header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) if s == "last" => LabelColumn::Last,
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

pub(crate) fn map_csv_error(err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    match err.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::Parse {
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        _ => Error::Parse {
            line,
            message: err.to_string(),
        },
    }
}

struct Table {
    header: Option<Vec<String>>,
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table(reader: impl Read, has_header: bool) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = if has_header {
        Some(
            rdr.headers()
                .map_err(map_csv_error)?
                .iter()
                .map(str::to_string)
                .collect(),
        )
    } else {
        None
    };
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(map_csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    Ok(Table { header, rows })
}

fn parse_number(field: &str, line: u64, column: usize) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("column {column}: '{field}' is not a finite number"),
        }),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Loads a classification CSV. Labels are arbitrary strings mapped to class
/// indices in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn, has_header: bool) -> Result<Dataset> {
    parse_classification(open(path.as_ref())?, label, has_header)
}

pub(crate) fn parse_classification(
    reader: impl Read,
    label: &LabelColumn,
    has_header: bool,
) -> Result<Dataset> {
    let table = read_table(reader, has_header)?;
    let width = table.rows[0].1.len();
    let label_idx = match label {
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Last => width - 1,
        LabelColumn::Name(name) => table
            .header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::invalid(format!("unknown label column '{name}'")))?,
        LabelColumn::Index(i) => {
            return Err(Error::invalid(format!(
                "unknown label column {i} (file has {width} columns)"
            )))
        }
    };
    if width < 2 {
        return Err(Error::invalid("csv needs at least one feature column"));
    }

    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    let mut labels = Vec::with_capacity(table.rows.len());
    let mut values = Vec::with_capacity(table.rows.len() * (width - 1));
    for (line, fields) in &table.rows {
        for (c, field) in fields.iter().enumerate() {
            if c == label_idx {
                let next = class_names.len();
                let idx = *class_index.entry(field.clone()).or_insert_with(|| {
                    class_names.push(field.clone());
                    next
                });
                labels.push(idx);
            } else {
                values.push(parse_number(field, *line, c)?);
            }
        }
    }
    let features = Matrix::from_vec(table.rows.len(), width - 1, values)?;
    let classes = class_names.len();
    Dataset::from_labels(features, &labels, classes)?.with_class_names(class_names)
}

/// Loads a regression CSV whose last `n_targets` columns are the targets.
pub fn load_csv_regression(
    path: impl AsRef<Path>,
    n_targets: usize,
    has_header: bool,
) -> Result<Dataset> {
    parse_regression(open(path.as_ref())?, n_targets, has_header)
}

pub(crate) fn parse_regression(
    reader: impl Read,
    n_targets: usize,
    has_header: bool,
) -> Result<Dataset> {
    let table = read_table(reader, has_header)?;
    let width = table.rows[0].1.len();
    if n_targets == 0 || n_targets >= width {
        return Err(Error::invalid(format!(
            "cannot take {n_targets} target columns from {width} columns"
        )));
    }
    let d = width - n_targets;
    let n = table.rows.len();
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n * n_targets);
    for (line, fields) in &table.rows {
        for (c, field) in fields.iter().enumerate() {
            let v = parse_number(field, *line, c)?;
            if c < d {
                x.push(v);
            } else {
                y.push(v);
            }
        }
    }
    Dataset::new(
        Matrix::from_vec(n, d, x)?,
        Matrix::from_vec(n, n_targets, y)?,
        Task::Regression { outputs: n_targets },
    )
}

/// Writes features followed by the label column (classification) or the
/// target columns (regression), with a header row. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_csv_to(dataset, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_csv_to(dataset: &Dataset, out: &mut impl Write) -> std::io::Result<()> {
    let d = dataset.feature_dim();
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    let classification = dataset.task().is_classification() && !dataset.has_soft_targets();
    if classification {
        header.push("label".into());
    } else {
        header.extend((0..dataset.output_dim()).map(|k| format!("y{k}")));
    }
    writeln!(out, "{}", header.join(","))?;
    let labels = dataset.labels();
    for i in 0..dataset.len() {
        let mut fields: Vec<String> = dataset
            .features()
            .row(i)
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        if classification {
            fields.push(match dataset.class_names() {
                Some(names) => names[labels[i]].clone(),
                None => labels[i].to_string(),
            });
        } else {
            fields.extend(dataset.targets().row(i).iter().map(|v| format!("{v}")));
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
