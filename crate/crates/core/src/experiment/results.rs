use serde::{Deserialize, Serialize};

use super::config::Estimator;
use crate::error::{Error, Result};
use crate::metrics::mean_sd;

/// One row of the long-form sweep results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub axis: String,
    pub axis_value: String,
    pub estimator: Estimator,
    pub seed: u64,
    /// `ok` or `failed`.
    pub status: String,
    pub pehne: Option<f64>,
    pub cnee: Option<f64>,
    pub factual_mse: Option<f64>,
    pub balance_own: Option<f64>,
    pub balance_neighbor: Option<f64>,
    pub selected_alpha: Option<f64>,
    pub error: Option<String>,
}

pub fn encode_results(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn decode_results(text: &str) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    for row in &rows {
        if row.status != "ok" && row.status != "failed" {
            return Err(Error::format("results", format!("unknown status {:?}", row.status)));
        }
        let metrics = [row.pehne, row.cnee, row.factual_mse];
        if metrics.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::format("results", "metrics must be finite and non-negative"));
        }
    }
    Ok(rows)
}

/// Mean and sample SD of one metric over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let (mean, sd) = mean_sd(values);
        Some(Self { mean, sd })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub axis_value: String,
    pub runs: usize,
    pub failed: usize,
    pub pehne: Option<Summary>,
    pub cnee: Option<Summary>,
    pub factual_mse: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub estimator: Estimator,
    pub points: Vec<SeriesPoint>,
}

/// Mean ± SD series per estimator along the sweep axis, for external
/// plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub axis: String,
    pub series: Vec<Series>,
}

impl PlotData {
    /// Groups rows by estimator (in first-seen order) and axis value (in
    /// first-seen order).
    pub fn from_rows(rows: &[ResultRow]) -> Self {
        let axis = rows.first().map(|r| r.axis.clone()).unwrap_or_default();
        let mut estimators: Vec<Estimator> = Vec::new();
        let mut values: Vec<&str> = Vec::new();
        for r in rows {
            if !estimators.contains(&r.estimator) {
                estimators.push(r.estimator);
            }
            if !values.contains(&r.axis_value.as_str()) {
                values.push(&r.axis_value);
            }
        }
        let series = estimators
            .into_iter()
            .map(|estimator| Series {
                estimator,
                points: values
                    .iter()
                    .filter_map(|&v| {
                        let cell: Vec<&ResultRow> =
                            rows.iter().filter(|r| r.estimator == estimator && r.axis_value == v).collect();
                        if cell.is_empty() {
                            return None;
                        }
                        let pick = |f: fn(&ResultRow) -> Option<f64>| {
                            Summary::of(&cell.iter().filter_map(|r| f(r)).collect::<Vec<f64>>())
                        };
                        Some(SeriesPoint {
                            axis_value: v.to_string(),
                            runs: cell.len(),
                            failed: cell.iter().filter(|r| r.status != "ok").count(),
                            pehne: pick(|r| r.pehne),
                            cnee: pick(|r| r.cnee),
                            factual_mse: pick(|r| r.factual_mse),
                        })
                    })
                    .collect(),
            })
            .collect();
        Self { axis, series }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(estimator: Estimator, value: &str, seed: u64, cnee: f64) -> ResultRow {
        ResultRow {
            axis: "beta_xt_grid".into(),
            axis_value: value.into(),
            estimator,
            seed,
            status: "ok".into(),
            pehne: Some(cnee * 2.0),
            cnee: Some(cnee),
            factual_mse: Some(0.5),
            balance_own: None,
            balance_neighbor: Some(0.01),
            selected_alpha: Some(0.1),
            error: None,
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row(Estimator::Hinet, "6", 0, 1.0), row(Estimator::GinBaseline, "6", 0, 2.5)];
        let text = encode_results(&rows).unwrap();
        assert!(text.starts_with("axis,axis_value,estimator,seed,status,pehne,cnee"));
        assert_eq!(decode_results(&text).unwrap(), rows);
    }

    #[test]
    fn bad_rows_are_rejected() {
        let mut r = row(Estimator::Hinet, "6", 0, 1.0);
        r.status = "weird".into();
        assert!(decode_results(&encode_results(&[r]).unwrap()).is_err());
        let r = row(Estimator::Hinet, "6", 0, -1.0);
        assert!(decode_results(&encode_results(&[r]).unwrap()).is_err());
        assert!(decode_results("axis\n1,2\n").is_err());
    }

    #[test]
    fn plot_data_uses_sample_sd() {
        let rows = vec![row(Estimator::Hinet, "6", 0, 1.0), row(Estimator::Hinet, "6", 1, 3.0)];
        let plot = PlotData::from_rows(&rows);
        let cnee = plot.series[0].points[0].cnee.unwrap();
        assert_eq!(cnee.mean, 2.0);
        assert!((cnee.sd.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identical_reports_have_zero_sd() {
        let rows = vec![row(Estimator::Hinet, "0", 0, 1.5), row(Estimator::Hinet, "0", 1, 1.5)];
        let plot = PlotData::from_rows(&rows);
        assert_eq!(plot.series[0].points[0].cnee.unwrap().sd, Some(0.0));
    }
}
