use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::Serialize;

use sgbm_core::rng::derive_seed;
use sgbm_core::{
    chunks, distill_dataset, hard_gbm_train, load_teacher_scores, make_synthetic, write_csv,
    write_teacher_scores, Checkpoint, Dataset, LearnerSpec, Model, SgbmModel, SoftAveragingModel,
    SyntheticKind, TeacherScores, TrainConfig,
};

use crate::data::{self as data_io, LoadedData};
use crate::error::{data_error, CliError, CliResult};
use crate::records::{create_dir, JsonLines};
use crate::runner::{self, score, train_epochs, Metric, Resumable};
use crate::settings::{Algo, RunConfig, Settings};

/// Settings shared by every experiment command.
#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// TOML file with default values for the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

impl Common {
    fn settings(&self) -> CliResult<Settings> {
        Settings::layered(self.settings.clone(), self.config.as_deref())
    }

    fn resolve(&self) -> CliResult<RunConfig> {
        RunConfig::resolve(&self.settings()?)
    }
}

fn out_dir(config: &RunConfig, default_name: &str) -> CliResult<PathBuf> {
    let dir = config
        .out
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(default_name));
    create_dir(&dir)?;
    Ok(dir)
}

#[derive(Args, Clone, Debug, Default)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
}

/// Trains one model; writes `metrics.jsonl` and `checkpoint.json`.
pub fn train(args: &TrainArgs) -> CliResult<()> {
    let config = args.common.resolve()?;
    let data = data_io::load(&config.data, config.train.seed)?;
    let run_id = config.run_id();
    let dir = out_dir(&config, &run_id)?;
    let mut metrics = JsonLines::create(&dir.join("metrics.jsonl"))?;
    let trained = runner::train(
        &config.model,
        &data.train,
        &data.test,
        &config.train,
        &run_id,
        &mut |r| metrics.write(r),
    )?;
    let checkpoint = Checkpoint::new(trained.model, data.train.task(), data.standardizer);
    let path = dir.join("checkpoint.json");
    checkpoint.save(&path).map_err(data_error)?;
    println!(
        "{run_id}: test {} ({:.1} ms training)",
        trained.metric, trained.train_ms
    );
    println!("checkpoint written to {}", path.display());
    Ok(())
}

#[derive(Args, Clone, Debug, Default)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Which side of the data to score: test or train.
    #[arg(long, default_value = "test")]
    pub split: String,
}

/// Scores a checkpoint on the data described by the common flags. With the
/// flags used for training, reproduces the training-time test metric.
pub fn eval(args: &EvalArgs) -> CliResult<Metric> {
    let settings = args.common.settings()?;
    let (spec, seed) = RunConfig::resolve_data(&settings)?;
    let use_train = match args.split.as_str() {
        "test" => false,
        "train" => true,
        other => {
            return Err(CliError::config(format!(
                "unknown split '{other}' (expected test or train)"
            )))
        }
    };
    let checkpoint = Checkpoint::load(&args.checkpoint).map_err(data_error)?;
    let (train, test) = data_io::load_raw(&spec, seed)?;
    let data = if use_train { train } else { test };
    if data.feature_dim() != checkpoint.model.input_dim()
        || data.output_dim() != checkpoint.model.output_dim()
    {
        return Err(CliError::Data(sgbm_core::Error::Validation(format!(
            "checkpoint maps {} -> {} but data has {} features and {} outputs",
            checkpoint.model.input_dim(),
            checkpoint.model.output_dim(),
            data.feature_dim(),
            data.output_dim()
        ))));
    }
    let metric = score(&checkpoint.predict_raw(data.features())?, &data)?;
    println!("{} {metric}", args.split);
    Ok(metric)
}

#[derive(Args, Clone, Debug, Default)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    /// Ensemble sizes to time, e.g. `1,2,5,10`.
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10")]
    pub m_list: Vec<usize>,
}

/// One row of the speedup table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub num_learners: usize,
    pub epochs: usize,
    pub sgbm_ms: f64,
    pub hard_gbm_ms: f64,
    /// `hard_gbm_ms / sgbm_ms`.
    pub ratio: f64,
    pub sgbm_metric: f64,
    pub hard_gbm_metric: f64,
    pub metric: String,
}

/// Equal-epoch timing: sGBM for E epochs against hard GBM with E inner
/// epochs per stage, same learners and data, for each M.
pub fn bench(args: &BenchArgs) -> CliResult<Vec<BenchRow>> {
    let config = args.common.resolve()?;
    if args.m_list.is_empty() || args.m_list.contains(&0) {
        return Err(CliError::config(
            "--m-list needs one or more positive sizes",
        ));
    }
    let data = data_io::load(&config.data, config.train.seed)?;
    let dir = out_dir(
        &config,
        &format!(
            "bench-{}-s{}",
            config.model.learner_name(),
            config.train.seed
        ),
    )?;
    let mut rows_out = JsonLines::create(&dir.join("bench.jsonl"))?;
    let (train, test) = (&data.train, &data.test);
    let (d, k) = (train.feature_dim(), train.output_dim());
    println!(
        "{:>4} {:>12} {:>12} {:>8} {:>12} {:>12}",
        "M", "sgbm_ms", "hard_gbm_ms", "ratio", "sgbm", "hard_gbm"
    );
    let mut rows = Vec::new();
    for &m in &args.m_list {
        let spec = &config.model.learner;
        let mut sgbm = SgbmModel::new(spec, m, d, k, train.loss(), config.train.seed)?;
        let start = Instant::now();
        sgbm.fit(train, &config.train, |_| {})?;
        let sgbm_ms = start.elapsed().as_secs_f64() * 1e3;

        let start = Instant::now();
        let hard = hard_gbm_train(
            train,
            m,
            config.model.epsilon,
            spec,
            &config.train,
            |_, _| {},
        )?;
        let hard_gbm_ms = start.elapsed().as_secs_f64() * 1e3;

        let sgbm_metric = score(&sgbm.predict(test.features())?, test)?;
        let hard_metric = score(&hard.predict(test.features())?, test)?;
        let row = BenchRow {
            num_learners: m,
            epochs: config.train.epochs,
            sgbm_ms,
            hard_gbm_ms,
            ratio: hard_gbm_ms / sgbm_ms,
            sgbm_metric: sgbm_metric.value(),
            hard_gbm_metric: hard_metric.value(),
            metric: sgbm_metric.name().to_string(),
        };
        println!(
            "{:>4} {:>12.1} {:>12.1} {:>8.2} {:>12.4} {:>12.4}",
            m, row.sgbm_ms, row.hard_gbm_ms, row.ratio, row.sgbm_metric, row.hard_gbm_metric
        );
        rows_out.write(&row)?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Args, Clone, Debug, Default)]
pub struct IncrementalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of equal chunks the training data arrives in.
    #[arg(long, default_value_t = 10)]
    pub chunks: usize,
    /// Also retrain a hard GBM from scratch on the data seen after each chunk.
    #[arg(long)]
    pub baseline: bool,
    /// Also train on all data at once for `--epochs` × `--chunks` epochs.
    #[arg(long)]
    pub offline: bool,
}

/// Per-chunk test metrics of an incremental run.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementalCurve {
    pub resumed: Vec<f64>,
    pub baseline: Option<Vec<f64>>,
    pub offline: Option<f64>,
}

/// The jointly trained model keeps its parameters and optimizer state as
/// chunks arrive, training `--epochs` epochs on the data seen so far after
/// each one. Hard GBM can only be rebuilt from scratch.
pub fn incremental(args: &IncrementalArgs) -> CliResult<IncrementalCurve> {
    let config = args.common.resolve()?;
    if args.chunks < 2 {
        return Err(CliError::config("--chunks must be at least 2"));
    }
    if config.model.algo == Algo::HardGbm {
        return Err(CliError::config(
            "hard_gbm cannot resume training; use --baseline to compare against it",
        ));
    }
    let data = data_io::load(&config.data, config.train.seed)?;
    if args.chunks > data.train.len() {
        return Err(CliError::config(format!(
            "cannot cut {} training rows into {} chunks",
            data.train.len(),
            args.chunks
        )));
    }
    let run_id = format!("incremental-{}", config.run_id());
    let dir = out_dir(&config, &run_id)?;
    let mut metrics = JsonLines::create(&dir.join("metrics.jsonl"))?;
    let parts = chunks(&data.train, args.chunks, config.train.seed)?;
    let test = &data.test;
    let (d, k, loss) = (
        data.train.feature_dim(),
        data.train.output_dim(),
        data.train.loss(),
    );
    let spec = &config.model;
    let mut model: Box<dyn Resumable> = match spec.algo {
        Algo::SoftAvg => Box::new(SoftAveragingModel::new(
            &spec.learner,
            spec.num_learners,
            d,
            k,
            loss,
            config.train.seed,
        )?),
        _ => Box::new(SgbmModel::new(
            &spec.learner,
            spec.num_learners,
            d,
            k,
            loss,
            config.train.seed,
        )?),
    };

    let mut curve = IncrementalCurve {
        resumed: Vec::new(),
        baseline: args.baseline.then(Vec::new),
        offline: None,
    };
    let mut clock = 0.0;
    println!(
        "{:>6} {:>8} {:>12} {:>12}",
        "chunk",
        "samples",
        spec.algo.to_string(),
        "hard_gbm"
    );
    for c in 0..parts.len() {
        let seen: Vec<&Dataset> = parts[..=c].iter().collect();
        let seen = Dataset::concat(&seen)?;
        let mut last = None;
        clock += train_epochs(
            model.as_mut(),
            &seen,
            test,
            &config.train,
            &run_id,
            clock,
            &mut |r| {
                last = Some(r.clone());
                Ok(())
            },
        )?;
        let mut record = last.expect("at least one epoch");
        record.chunk = Some(c);
        metrics.write(&record)?;
        let value = score(&model.predict(test.features())?, test)?.value();
        curve.resumed.push(value);

        let mut hard_value = None;
        if let Some(baseline) = curve.baseline.as_mut() {
            let hard_id = format!("incremental-hard_gbm-c{c}-{}", config.run_id());
            let mut last = None;
            let (hard, _) =
                runner::train_hard(spec, &seen, test, &config.train, &hard_id, &mut |r| {
                    last = Some(r.clone());
                    Ok(())
                })?;
            let mut record = last.expect("at least one stage");
            record.chunk = Some(c);
            metrics.write(&record)?;
            let v = score(&hard.predict(test.features())?, test)?.value();
            baseline.push(v);
            hard_value = Some(v);
        }
        println!(
            "{:>6} {:>8} {:>12.4} {:>12}",
            c + 1,
            seen.len(),
            value,
            hard_value.map_or("-".to_string(), |v| format!("{v:.4}"))
        );
    }

    if args.offline {
        let offline_config = TrainConfig {
            epochs: config.train.epochs * args.chunks,
            ..config.train.clone()
        };
        let offline_id = format!("offline-{}", config.run_id());
        let trained = runner::train(
            spec,
            &data.train,
            test,
            &offline_config,
            &offline_id,
            &mut |r| {
                if r.epoch == offline_config.epochs as u64 {
                    metrics.write(r)
                } else {
                    Ok(())
                }
            },
        )?;
        println!("offline {}", trained.metric);
        curve.offline = Some(trained.metric.value());
    }
    Ok(curve)
}

#[derive(Args, Clone, Debug, Default)]
pub struct DistillArgs {
    #[command(flatten)]
    pub common: Common,
    /// Softmax temperature applied to the teacher logits.
    #[arg(long)]
    pub temperature: f64,
    /// Teacher logits for the training rows: CSV, N rows × K columns, no
    /// header. Without it an in-library teacher ensemble is trained first.
    #[arg(long)]
    pub teacher_scores: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub teacher_learners: usize,
    /// Teacher tree depth (defaults to the student's).
    #[arg(long)]
    pub teacher_depth: Option<usize>,
    /// Teacher epochs (defaults to the student's).
    #[arg(long)]
    pub teacher_epochs: Option<usize>,
    /// Also train the student architecture on the hard labels.
    #[arg(long)]
    pub compare_hard: bool,
}

/// Outcome of a distillation run.
#[derive(Clone, Debug, PartialEq)]
pub struct DistillReport {
    pub teacher: Option<f64>,
    pub student: f64,
    pub hard_label: Option<f64>,
}

// Stream namespace for the in-library teacher's seed.
const STREAM_TEACHER: u64 = 0x7eac_4e72 << 32;

fn train_teacher(
    args: &DistillArgs,
    config: &RunConfig,
    data: &LoadedData,
) -> CliResult<(TeacherScores, f64)> {
    let learner = match &config.model.learner {
        LearnerSpec::Tree { depth } => LearnerSpec::Tree {
            depth: args.teacher_depth.unwrap_or(*depth),
        },
        other => {
            if args.teacher_depth.is_some() {
                return Err(CliError::config(
                    "--teacher-depth applies to tree learners only",
                ));
            }
            other.clone()
        }
    };
    learner
        .validate()
        .map_err(|e| CliError::config(e.to_string()))?;
    if args.teacher_learners == 0 {
        return Err(CliError::config("--teacher-learners must be at least 1"));
    }
    let teacher_config = TrainConfig {
        epochs: args.teacher_epochs.unwrap_or(config.train.epochs),
        seed: derive_seed(config.train.seed, STREAM_TEACHER),
        ..config.train.clone()
    };
    teacher_config
        .validate()
        .map_err(|e| CliError::config(e.to_string()))?;
    let train = &data.train;
    let mut teacher = SgbmModel::new(
        &learner,
        args.teacher_learners,
        train.feature_dim(),
        train.output_dim(),
        train.loss(),
        teacher_config.seed,
    )?;
    teacher.fit(train, &teacher_config, |_| {})?;
    let metric = score(&teacher.predict(data.test.features())?, &data.test)?;
    let scores = TeacherScores::from_model(&teacher, train.features(), "in-library teacher")?;
    Ok((scores, metric.value()))
}

/// Trains a student ensemble on temperature-softened teacher outputs.
pub fn distill(args: &DistillArgs) -> CliResult<DistillReport> {
    let config = args.common.resolve()?;
    if !(args.temperature.is_finite() && args.temperature > 0.0) {
        return Err(CliError::config(format!(
            "--temperature must be positive, got {}",
            args.temperature
        )));
    }
    if config.model.algo != Algo::Sgbm {
        return Err(CliError::config(
            "distillation trains an sgbm student; drop --algo",
        ));
    }
    if let Some(path) = &args.teacher_scores {
        if !path.exists() {
            return Err(CliError::Data(sgbm_core::Error::Io {
                path: path.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            }));
        }
    }
    let data = data_io::load(&config.data, config.train.seed)?;
    if !data.train.task().is_classification() {
        return Err(CliError::config("distillation needs classification data"));
    }
    let (teacher, teacher_metric) = match &args.teacher_scores {
        Some(path) => {
            let logits = load_teacher_scores(path, data.train.len(), data.train.output_dim())
                .map_err(data_error)?;
            (logits, None)
        }
        None => {
            let (scores, metric) = train_teacher(args, &config, &data)?;
            (scores, Some(metric))
        }
    };
    let run_id = format!("distill-t{}-{}", args.temperature, config.run_id());
    let dir = out_dir(&config, &run_id)?;
    if args.teacher_scores.is_none() {
        write_teacher_scores(&teacher.logits, dir.join("teacher_scores.csv"))
            .map_err(data_error)?;
    }
    let soft = distill_dataset(&data.train, &teacher, args.temperature).map_err(data_error)?;
    let mut metrics = JsonLines::create(&dir.join("metrics.jsonl"))?;
    let spec = &config.model;
    let mut student = SgbmModel::new(
        &spec.learner,
        spec.num_learners,
        soft.feature_dim(),
        soft.output_dim(),
        soft.loss(),
        config.train.seed,
    )?;
    let ms = train_epochs(
        &mut student,
        &soft,
        &data.test,
        &config.train,
        &run_id,
        0.0,
        &mut |r| metrics.write(r),
    )?;
    let student_metric = score(&student.predict(data.test.features())?, &data.test)?;
    Checkpoint::new(
        Model::Sgbm(student),
        data.train.task(),
        data.standardizer.clone(),
    )
    .save(dir.join("checkpoint.json"))
    .map_err(data_error)?;
    if let Some(t) = teacher_metric {
        println!(
            "teacher ({} learners) test accuracy {t}",
            args.teacher_learners
        );
    }
    println!(
        "student (T={}) test {student_metric} ({ms:.1} ms training)",
        args.temperature
    );

    let mut hard_label = None;
    if args.compare_hard {
        let hard_id = format!("hard-label-{}", config.run_id());
        let trained = runner::train(
            spec,
            &data.train,
            &data.test,
            &config.train,
            &hard_id,
            &mut |r| metrics.write(r),
        )?;
        println!("hard-label student test {}", trained.metric);
        hard_label = Some(trained.metric.value());
    }
    Ok(DistillReport {
        teacher: teacher_metric,
        student: student_metric.value(),
        hard_label,
    })
}

#[derive(Args, Clone, Debug)]
pub struct GenDataArgs {
    /// gaussians2 or multi_sine.
    #[arg(long)]
    pub kind: String,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV file to write.
    #[arg(long)]
    pub out: PathBuf,
}

/// Writes a synthetic dataset as CSV with a header row.
pub fn gen_data(args: &GenDataArgs) -> CliResult<()> {
    let kind: SyntheticKind = args
        .kind
        .parse()
        .map_err(|e: sgbm_core::Error| CliError::config(e.to_string()))?;
    if args.samples == 0 {
        return Err(CliError::config("--samples must be positive"));
    }
    let data = make_synthetic(kind, args.samples, args.seed)?.dataset;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_csv(&data, &args.out).map_err(data_error)?;
    println!(
        "wrote {} rows of {kind} to {}",
        data.len(),
        args.out.display()
    );
    Ok(())
}
