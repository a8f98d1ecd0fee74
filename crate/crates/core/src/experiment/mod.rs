//! Experiment pipelines: split generation, tuning and training per
//! estimator and seed, evaluation, and sweeps over DGP settings.

mod config;
mod results;

pub use config::{DgpVariant, Estimator, ExperimentConfig, SweepAxis};
pub use results::{decode_results, encode_results, PlotData, ResultRow, Series, SeriesPoint, Summary};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{Dataset, DgpParams, GraphSpec, SplitTag};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricReport, MetricSettings};
use crate::model::{self, balancing_diagnostic, BalanceReport, Checkpoint, EpochLosses, Model};
use crate::seed;
use crate::tuning::{self, TuningResult};

pub const MANIFEST_FORMAT: &str = "netcausal-data-manifest";
pub const ORACLE_FORMAT: &str = "netcausal-oracle";
pub const ARTIFACT_VERSION: u32 = 1;

/// Seed of one split, derived from the experiment's data seed.
pub fn split_seed(data_seed: u64, split: SplitTag) -> u64 {
    let index = SplitTag::ALL.iter().position(|&s| s == split).expect("listed") as u64;
    seed::derive(data_seed, "experiment/split", index)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

impl Splits {
    /// Three independently drawn graphs sharing one mechanism.
    pub fn generate(params: &DgpParams, graph_spec: &GraphSpec, n: usize, data_seed: u64) -> Result<Self> {
        graph_spec.validate()?;
        let make = |split| Dataset::generate(n, graph_spec, params, split_seed(data_seed, split), split);
        Ok(Self {
            train: make(SplitTag::Train)?,
            validation: make(SplitTag::Validation)?,
            test: make(SplitTag::Test)?,
        })
    }

    pub fn get(&self, split: SplitTag) -> &Dataset {
        match split {
            SplitTag::Train => &self.train,
            SplitTag::Validation => &self.validation,
            SplitTag::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSeeds {
    pub train: u64,
    pub validation: u64,
    pub test: u64,
}

/// Everything needed to regenerate the three split files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataManifest {
    pub format: String,
    pub version: u32,
    pub params: DgpParams,
    pub graph_spec: GraphSpec,
    pub n_per_split: usize,
    pub data_seed: u64,
    pub split_seeds: SplitSeeds,
}

impl DataManifest {
    pub fn new(params: DgpParams, graph_spec: GraphSpec, n_per_split: usize, data_seed: u64) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: ARTIFACT_VERSION,
            params,
            graph_spec,
            n_per_split,
            data_seed,
            split_seeds: SplitSeeds {
                train: split_seed(data_seed, SplitTag::Train),
                validation: split_seed(data_seed, SplitTag::Validation),
                test: split_seed(data_seed, SplitTag::Test),
            },
        }
    }

    pub fn from_config(config: &ExperimentConfig) -> Self {
        Self::new(config.dgp_params(), config.graph_spec(), config.n_per_split, config.data_seed)
    }

    pub fn generate(&self) -> Result<Splits> {
        if self.format != MANIFEST_FORMAT || self.version != ARTIFACT_VERSION {
            return Err(Error::format("manifest", "unsupported format or version"));
        }
        Splits::generate(&self.params, &self.graph_spec, self.n_per_split, self.data_seed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A trained estimator, or the debug oracle that predicts with the true
/// mechanism of whatever dataset it is evaluated on.
#[derive(Debug, Clone)]
pub enum Predictor {
    Model(Box<Model>),
    Oracle,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleFile {
    format: String,
    version: u32,
}

impl Predictor {
    pub fn predict(&self, dataset: &Dataset, t: &[u8]) -> Result<Vec<f64>> {
        match self {
            Predictor::Model(m) => m.predict(dataset.graph(), dataset.features(), t),
            Predictor::Oracle => dataset.potential_outcomes(t),
        }
    }

    pub fn model(&self) -> Option<&Model> {
        match self {
            Predictor::Model(m) => Some(m),
            Predictor::Oracle => None,
        }
    }

    pub fn to_json(&self, estimator: Estimator) -> Result<String> {
        match self {
            Predictor::Model(m) => Checkpoint::from_model(m, estimator.as_str()).to_json(),
            Predictor::Oracle => Ok(serde_json::to_string_pretty(&OracleFile {
                format: ORACLE_FORMAT.into(),
                version: ARTIFACT_VERSION,
            })? + "\n"),
        }
    }

    /// Decodes either a model checkpoint or an oracle marker file.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.get("format").and_then(|f| f.as_str()) == Some(ORACLE_FORMAT) {
            let file: OracleFile = serde_json::from_value(value)?;
            if file.version != ARTIFACT_VERSION {
                return Err(Error::format("checkpoint", format!("unsupported version {}", file.version)));
            }
            return Ok(Predictor::Oracle);
        }
        let checkpoint: Checkpoint = serde_json::from_value(value)?;
        Ok(Predictor::Model(Box::new(checkpoint.to_model()?)))
    }
}

/// One trained seed of an estimator.
#[derive(Debug, Clone)]
pub struct Trained {
    pub predictor: Predictor,
    pub history: Vec<EpochLosses>,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    /// The error message when tuning or training failed.
    pub outcome: std::result::Result<Trained, String>,
}

/// All seeds of one estimator. Hyperparameters are tuned once with the
/// first seed; every seed then trains the selected configuration.
#[derive(Debug, Clone)]
pub struct EstimatorRuns {
    pub estimator: Estimator,
    pub tuning: Option<TuningResult>,
    pub runs: Vec<SeedRun>,
}

impl EstimatorRuns {
    pub fn selected_alpha(&self) -> Option<f64> {
        self.tuning.as_ref().map(|t| t.selected_config.alpha)
    }
}

pub fn train_estimator(
    config: &ExperimentConfig,
    estimator: Estimator,
    train_set: &Dataset,
    val_set: &Dataset,
) -> EstimatorRuns {
    let Some(architecture) = estimator.architecture() else {
        let runs = config
            .seeds
            .iter()
            .map(|&seed| SeedRun {
                seed,
                outcome: Ok(Trained {
                    predictor: Predictor::Oracle,
                    history: Vec::new(),
                }),
            })
            .collect();
        return EstimatorRuns {
            estimator,
            tuning: None,
            runs,
        };
    };
    let first = config.seeds[0];
    let tuned = tuning::tune(
        architecture,
        train_set,
        val_set,
        &config.grid(),
        &config.template(estimator, first),
        &config.tuning_options(estimator),
    );
    let tuned = match tuned {
        Ok(t) => t,
        Err(err) => {
            let message = err.to_string();
            let runs = config
                .seeds
                .iter()
                .map(|&seed| SeedRun {
                    seed,
                    outcome: Err(message.clone()),
                })
                .collect();
            return EstimatorRuns {
                estimator,
                tuning: None,
                runs,
            };
        }
    };
    let selected = tuned.result.selected_config;
    let mut first_run = Some(Trained {
        predictor: Predictor::Model(Box::new(tuned.model)),
        history: tuned.history,
    });
    let runs = config
        .seeds
        .iter()
        .map(|&seed| {
            if seed == first {
                if let Some(trained) = first_run.take() {
                    return SeedRun { seed, outcome: Ok(trained) };
                }
            }
            let cfg = model::HiNetConfig { seed, ..selected };
            let outcome = model::train(architecture, &cfg, train_set, val_set)
                .map(|(m, history)| Trained {
                    predictor: Predictor::Model(Box::new(m)),
                    history,
                })
                .map_err(|e| e.to_string());
            SeedRun { seed, outcome }
        })
        .collect();
    EstimatorRuns {
        estimator,
        tuning: Some(tuned.result),
        runs,
    }
}

/// Trains every configured estimator, in parallel across estimators.
/// Output order follows `config.estimators`.
pub fn train_all(config: &ExperimentConfig, splits: &Splits) -> Vec<EstimatorRuns> {
    config
        .estimators
        .par_iter()
        .map(|&e| train_estimator(config, e, &splits.train, &splits.validation))
        .collect()
}

/// PEHNE, CNEE and factual MSE of `predictor` on `test`.
pub fn evaluate_predictor(predictor: &Predictor, test: &Dataset, settings: &MetricSettings) -> Result<MetricReport> {
    if let Some(m) = predictor.model() {
        if m.input_dim() != test.d() {
            return Err(Error::InvalidInput(format!(
                "checkpoint expects d = {}, test split has d = {}",
                m.input_dim(),
                test.d()
            )));
        }
    }
    let factual = predictor.predict(test, test.treatments())?;
    let factual_mse = metrics::mse(&factual, test.outcomes());
    metrics::evaluate(
        |t: &[u8]| predictor.predict(test, t),
        |t: &[u8]| test.potential_outcomes(t),
        test.n(),
        factual_mse,
        settings,
    )
}

/// Representation balance on the training split, `None` for estimators
/// without a representation.
pub fn balance(predictor: &Predictor, train_set: &Dataset, seed: u64) -> Result<Option<BalanceReport>> {
    match predictor.model() {
        Some(m) => balancing_diagnostic(m, train_set, seed),
        None => Ok(None),
    }
}

/// Per-estimator mean and sample SD over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub estimator: Estimator,
    pub runs: usize,
    pub failed: usize,
    pub pehne_mean: Option<f64>,
    pub pehne_sd: Option<f64>,
    pub cnee_mean: Option<f64>,
    pub cnee_sd: Option<f64>,
    pub factual_mse_mean: Option<f64>,
    pub factual_mse_sd: Option<f64>,
}

impl AggregateRow {
    pub fn new(estimator: Estimator, reports: &[Option<&MetricReport>]) -> Self {
        let ok: Vec<&MetricReport> = reports.iter().flatten().copied().collect();
        let stat = |f: fn(&MetricReport) -> f64| {
            Summary::of(&ok.iter().map(|r| f(r)).collect::<Vec<f64>>())
        };
        let (pehne, cnee, fm) = (stat(|r| r.pehne), stat(|r| r.cnee), stat(|r| r.factual_mse));
        Self {
            estimator,
            runs: reports.len(),
            failed: reports.len() - ok.len(),
            pehne_mean: pehne.map(|s| s.mean),
            pehne_sd: pehne.and_then(|s| s.sd),
            cnee_mean: cnee.map(|s| s.mean),
            cnee_sd: cnee.and_then(|s| s.sd),
            factual_mse_mean: fm.map(|s| s.mean),
            factual_mse_sd: fm.and_then(|s| s.sd),
        }
    }
}

pub fn encode_aggregate(rows: &[AggregateRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One point of the sweep axis with the mechanism it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub axis_value: String,
    pub params: DgpParams,
}

pub fn sweep_cells(config: &ExperimentConfig) -> Vec<Cell> {
    let base = config.dgp_params();
    match config.sweep_axis {
        SweepAxis::BetaXtGrid => config
            .beta_xt_grid
            .iter()
            .map(|&beta_xt| Cell {
                axis_value: format!("{beta_xt}"),
                params: DgpParams { beta_xt, ..base },
            })
            .collect(),
        SweepAxis::ExposureKinds => config
            .exposure_kinds
            .iter()
            .map(|&exposure_kind| Cell {
                axis_value: exposure_kind.as_str().into(),
                params: DgpParams { exposure_kind, ..base },
            })
            .collect(),
        SweepAxis::DgpVariant => config
            .dgp_variants
            .iter()
            .map(|&v| Cell {
                axis_value: v.as_str().into(),
                params: v.apply(&base),
            })
            .collect(),
    }
}

/// Result of one sweep cell.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub cell: Cell,
    pub manifest: DataManifest,
    pub rows: Vec<ResultRow>,
}

fn failed_row(axis: SweepAxis, value: &str, estimator: Estimator, seed: u64, error: String) -> ResultRow {
    ResultRow {
        axis: axis.as_str().into(),
        axis_value: value.into(),
        estimator,
        seed,
        status: "failed".into(),
        pehne: None,
        cnee: None,
        factual_mse: None,
        balance_own: None,
        balance_neighbor: None,
        selected_alpha: None,
        error: Some(error),
    }
}

/// Generates the cell's splits, trains every estimator and seed, and
/// evaluates each on the test split. Run failures become `failed` rows;
/// only data generation errors abort the cell.
pub fn run_cell(config: &ExperimentConfig, cell: &Cell) -> Result<CellOutcome> {
    let manifest = DataManifest::new(cell.params, config.graph_spec(), config.n_per_split, config.data_seed);
    let splits = manifest.generate()?;
    let settings = config.metric_settings();
    let axis = config.sweep_axis;
    let trained = train_all(config, &splits);
    let rows = trained
        .par_iter()
        .flat_map_iter(|est| {
            let alpha = est.selected_alpha();
            est.runs
                .iter()
                .map(|run| {
                    let trained = match &run.outcome {
                        Ok(t) => t,
                        Err(e) => return failed_row(axis, &cell.axis_value, est.estimator, run.seed, e.clone()),
                    };
                    let scored = evaluate_predictor(&trained.predictor, &splits.test, &settings).and_then(|report| {
                        let bal = balance(&trained.predictor, &splits.train, seed::derive(run.seed, "experiment/balance", 0))?;
                        Ok((report, bal))
                    });
                    match scored {
                        Ok((report, bal)) => ResultRow {
                            axis: axis.as_str().into(),
                            axis_value: cell.axis_value.clone(),
                            estimator: est.estimator,
                            seed: run.seed,
                            status: "ok".into(),
                            pehne: Some(report.pehne),
                            cnee: Some(report.cnee),
                            factual_mse: Some(report.factual_mse),
                            balance_own: bal.map(|b| b.own_treatment),
                            balance_neighbor: bal.map(|b| b.neighbor_treatment),
                            selected_alpha: alpha,
                            error: None,
                        },
                        Err(e) => failed_row(axis, &cell.axis_value, est.estimator, run.seed, e.to_string()),
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(CellOutcome {
        cell: cell.clone(),
        manifest,
        rows,
    })
}

/// Runs every cell of the sweep axis in parallel. Rows are ordered by cell,
/// then estimator, then seed, independent of scheduling.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<CellOutcome>> {
    config.validate()?;
    sweep_cells(config).par_iter().map(|cell| run_cell(config, cell)).collect()
}

pub fn history_csv(history: &[EpochLosses]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in history {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
