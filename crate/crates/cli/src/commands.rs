use std::fs;
use std::path::{Path, PathBuf};

use netcausal::dgp::SplitTag;
use netcausal::error::Error;
use netcausal::experiment::{
    self, decode_results, encode_aggregate, encode_results, AggregateRow, DataManifest, Estimator,
    ExperimentConfig, PlotData, Predictor, ResultRow,
};
use netcausal::io::{decode_dataset, encode_dataset};
use netcausal::metrics::MetricReport;
use serde::{Deserialize, Serialize};

use crate::args::{Command, Common};

/// Environment variable that roots relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "NETCAUSAL_OUTPUT_ROOT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0} already exists and is not empty; pass --force to write into it")]
    OutputExists(PathBuf),
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: Error },
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Complete,
    /// Number of failed runs.
    Partial(usize),
}

impl Status {
    fn from_failures(n: usize) -> Self {
        if n == 0 {
            Status::Complete
        } else {
            Status::Partial(n)
        }
    }
}

pub fn run(command: Command) -> Result<Status> {
    match command {
        Command::Generate(common) => generate(&common),
        Command::Train { common, data_dir } => train(&common, data_dir),
        Command::Evaluate {
            common,
            train_dir,
            test_file,
        } => evaluate(&common, train_dir, test_file),
        Command::Sweep(common) => sweep(&common),
        Command::Report { common, results } => report(&common, results),
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = read(path)?;
            ExperimentConfig::from_toml_str(&text).map_err(|source| CliError::Read {
                path: path.clone(),
                source,
            })?
        }
        None => ExperimentConfig::default(),
    };
    common.overrides.apply(&mut config);
    config.validate()?;
    if let Ok(root) = std::env::var(OUTPUT_ROOT_ENV) {
        if config.output_dir.is_relative() && !root.is_empty() {
            config.output_dir = PathBuf::from(root).join(&config.output_dir);
        }
    }
    Ok(config)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Claims an output directory, refusing a non-empty one unless forced.
fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    let occupied = match fs::read_dir(dir) {
        Ok(mut entries) => entries.next().is_some(),
        Err(_) => false,
    };
    if occupied && !force {
        return Err(CliError::OutputExists(dir.to_path_buf()));
    }
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_config(dir: &Path, config: &ExperimentConfig) -> Result<()> {
    write(&dir.join("config.toml"), &config.to_toml_string()?)
}

fn split_file(split: SplitTag) -> String {
    format!("{}.json", split.as_str())
}

fn generate(common: &Common) -> Result<Status> {
    let config = load_config(common)?;
    let dir = config.output_dir.join("data");
    prepare_dir(&dir, common.force)?;
    let manifest = DataManifest::from_config(&config);
    let splits = manifest.generate()?;
    for split in SplitTag::ALL {
        write(&dir.join(split_file(split)), &encode_dataset(splits.get(split))?)?;
    }
    write(&dir.join("manifest.json"), &manifest.to_json()?)?;
    write_config(&dir, &config)?;
    println!("wrote {}", dir.display());
    Ok(Status::Complete)
}

fn load_dataset(path: &Path) -> Result<netcausal::dgp::Dataset> {
    decode_dataset(&read(path)?).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Index of the training stage's outputs, one row per estimator and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunRecord {
    estimator: Estimator,
    seed: u64,
    status: String,
    checkpoint: Option<String>,
    history: Option<String>,
    error: Option<String>,
}

fn train(common: &Common, data_dir: Option<PathBuf>) -> Result<Status> {
    let config = load_config(common)?;
    let data_dir = data_dir.unwrap_or_else(|| config.output_dir.join("data"));
    let train_set = load_dataset(&data_dir.join(split_file(SplitTag::Train)))?;
    let val_set = load_dataset(&data_dir.join(split_file(SplitTag::Validation)))?;
    let dir = config.output_dir.join("train");
    prepare_dir(&dir, common.force)?;
    let splits_d = (train_set.d(), val_set.d());
    if splits_d.0 != splits_d.1 {
        return Err(Error::InvalidInput("train and validation splits differ in d".into()).into());
    }

    let trained: Vec<_> = {
        use rayon::prelude::*;
        config
            .estimators
            .par_iter()
            .map(|&e| experiment::train_estimator(&config, e, &train_set, &val_set))
            .collect()
    };
    let mut records = Vec::new();
    for est in &trained {
        let name = est.estimator.as_str();
        if let Some(tuning) = &est.tuning {
            write(&dir.join(name).join("tuning.json"), &(serde_json::to_string_pretty(tuning).map_err(Error::from)? + "\n"))?;
        }
        for run in &est.runs {
            let record = match &run.outcome {
                Ok(t) => {
                    let checkpoint = format!("{name}/seed_{}.json", run.seed);
                    write(&dir.join(&checkpoint), &t.predictor.to_json(est.estimator)?)?;
                    let history = match &t.predictor {
                        Predictor::Oracle => None,
                        Predictor::Model(_) => {
                            let file = format!("{name}/seed_{}_history.csv", run.seed);
                            write(&dir.join(&file), &experiment::history_csv(&t.history)?)?;
                            Some(file)
                        }
                    };
                    RunRecord {
                        estimator: est.estimator,
                        seed: run.seed,
                        status: "ok".into(),
                        checkpoint: Some(checkpoint),
                        history,
                        error: None,
                    }
                }
                Err(e) => RunRecord {
                    estimator: est.estimator,
                    seed: run.seed,
                    status: "failed".into(),
                    checkpoint: None,
                    history: None,
                    error: Some(e.clone()),
                },
            };
            records.push(record);
        }
    }
    write(&dir.join("runs.csv"), &to_csv(&records)?)?;
    write_config(&dir, &config)?;
    let failed = records.iter().filter(|r| r.status != "ok").count();
    println!("wrote {} ({} runs, {failed} failed)", dir.display(), records.len());
    Ok(Status::from_failures(failed))
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn evaluate(common: &Common, train_dir: Option<PathBuf>, test_file: Option<PathBuf>) -> Result<Status> {
    let config = load_config(common)?;
    let train_dir = train_dir.unwrap_or_else(|| config.output_dir.join("train"));
    let test_file = test_file.unwrap_or_else(|| config.output_dir.join("data").join(split_file(SplitTag::Test)));
    let test = load_dataset(&test_file)?;
    let runs_path = train_dir.join("runs.csv");
    let records: Vec<RunRecord> = csv::Reader::from_reader(read(&runs_path)?.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Read {
            path: runs_path.clone(),
            source: Error::from(e),
        })?;
    let dir = config.output_dir.join("eval");
    prepare_dir(&dir, common.force)?;
    let settings = config.metric_settings();

    let mut estimators: Vec<Estimator> = Vec::new();
    let mut reports: Vec<(Estimator, Option<MetricReport>)> = Vec::new();
    for record in &records {
        if !estimators.contains(&record.estimator) {
            estimators.push(record.estimator);
        }
        let Some(checkpoint) = &record.checkpoint else {
            reports.push((record.estimator, None));
            continue;
        };
        let path = train_dir.join(checkpoint);
        let predictor = Predictor::from_json(&read(&path)?).map_err(|source| CliError::Read {
            path: path.clone(),
            source,
        })?;
        let report = experiment::evaluate_predictor(&predictor, &test, &settings)?;
        let stem = format!("{}/seed_{}", record.estimator.as_str(), record.seed);
        write(&dir.join(format!("{stem}_report.json")), &report.to_json()?)?;
        write(&dir.join(format!("{stem}_per_rate.csv")), &report.per_rate_csv()?)?;
        reports.push((record.estimator, Some(report)));
    }
    let aggregate: Vec<AggregateRow> = estimators
        .iter()
        .map(|&e| {
            let mine: Vec<Option<&MetricReport>> =
                reports.iter().filter(|(r, _)| *r == e).map(|(_, rep)| rep.as_ref()).collect();
            AggregateRow::new(e, &mine)
        })
        .collect();
    write(&dir.join("aggregate.csv"), &encode_aggregate(&aggregate)?)?;
    write_config(&dir, &config)?;
    print!("{}", encode_aggregate(&aggregate)?);
    let failed = reports.iter().filter(|(_, r)| r.is_none()).count();
    Ok(Status::from_failures(failed))
}

fn manifest_name(value: &str) -> String {
    let safe: String = value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{safe}.json")
}

fn sweep(common: &Common) -> Result<Status> {
    let config = load_config(common)?;
    let dir = config.output_dir.join("sweep");
    prepare_dir(&dir, common.force)?;
    let cells = experiment::run_sweep(&config)?;
    let rows: Vec<ResultRow> = cells.iter().flat_map(|c| c.rows.iter().cloned()).collect();
    for cell in &cells {
        write(&dir.join("manifests").join(manifest_name(&cell.cell.axis_value)), &cell.manifest.to_json()?)?;
    }
    write(&dir.join("results.csv"), &encode_results(&rows)?)?;
    write_plot(&dir, &rows)?;
    write_config(&dir, &config)?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    println!("wrote {} ({} rows, {failed} failed)", dir.display(), rows.len());
    Ok(Status::from_failures(failed))
}

fn write_plot(dir: &Path, rows: &[ResultRow]) -> Result<()> {
    let plot = PlotData::from_rows(rows);
    write(&dir.join("plot_data.json"), &(serde_json::to_string_pretty(&plot).map_err(Error::from)? + "\n"))
}

fn report(common: &Common, results: Option<PathBuf>) -> Result<Status> {
    let config = load_config(common)?;
    let path = results.unwrap_or_else(|| config.output_dir.join("sweep").join("results.csv"));
    let rows = decode_results(&read(&path)?).map_err(|source| CliError::Read {
        path: path.clone(),
        source,
    })?;
    let dir = config.output_dir.join("report");
    prepare_dir(&dir, common.force)?;
    write_plot(&dir, &rows)?;
    let plot = PlotData::from_rows(&rows);
    let mut table = String::from("axis_value,estimator,runs,failed,cnee_mean,cnee_sd,pehne_mean,pehne_sd\n");
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for series in &plot.series {
        for p in &series.points {
            table.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                p.axis_value,
                series.estimator,
                p.runs,
                p.failed,
                fmt(p.cnee.map(|s| s.mean)),
                fmt(p.cnee.and_then(|s| s.sd)),
                fmt(p.pehne.map(|s| s.mean)),
                fmt(p.pehne.and_then(|s| s.sd)),
            ));
        }
    }
    write(&dir.join("summary.csv"), &table)?;
    print!("{table}");
    Ok(Status::Complete)
}

