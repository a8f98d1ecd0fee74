//! PEHNE and CNEE over sampled counterfactual networks, and factual MSE.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_M: usize = 50;

/// How many counterfactual networks to score and from which seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSettings {
    /// Number of treatment rates `p_j = j / m`.
    pub m: usize,
    pub seed: u64,
    /// Independent draws per rate. The reported metric averages them; with
    /// more than one, the spread across replicates is reported too.
    pub replicates: usize,
}

impl Default for MetricSettings {
    fn default() -> Self {
        Self {
            m: DEFAULT_M,
            seed: 0,
            replicates: 1,
        }
    }
}

impl MetricSettings {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::param("m", "must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(Error::param("replicates", "must be at least 1"));
        }
        Ok(())
    }

    /// Rate of the `j`-th network, `j` in `1..=m`.
    pub fn rate(&self, j: usize) -> f64 {
        j as f64 / self.m as f64
    }

    pub fn network_seed(&self, j: usize, replicate: usize) -> u64 {
        seed::derive(
            seed::derive(self.seed, "metrics/counterfactual", j as u64),
            "metrics/replicate",
            replicate as u64,
        )
    }

    /// The counterfactual network scored at rate `j`, replicate `r`.
    pub fn network(&self, n: usize, j: usize, replicate: usize) -> Result<Vec<u8>> {
        sample_counterfactual(n, self.rate(j), self.network_seed(j, replicate))
    }
}

/// I.i.d. Bernoulli(`p`) treatment per node.
pub fn sample_counterfactual(n: usize, p: f64, seed: u64) -> Result<Vec<u8>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::param(
            "p",
            format!("rate must lie in (0, 1], got {p}"),
        ));
    }
    let mut rng = seed::rng(seed, "metrics/bernoulli", 0);
    Ok((0..n).map(|_| u8::from(rng.random::<f64>() < p)).collect())
}

/// Per-network errors at one rate, averaged over replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateMse {
    pub j: usize,
    pub p: f64,
    pub pehne: f64,
    pub cnee: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pehne: f64,
    pub cnee: f64,
    pub factual_mse: f64,
    pub per_rate: Vec<RateMse>,
    pub m: usize,
    pub seed: u64,
    pub replicates: usize,
    /// Sample SD of the metric across replicates; absent with one replicate.
    pub pehne_replicate_sd: Option<f64>,
    pub cnee_replicate_sd: Option<f64>,
}

/// A function from a whole-network treatment vector to per-node values.
pub trait NetworkFn: FnMut(&[u8]) -> Result<Vec<f64>> {}
impl<F: FnMut(&[u8]) -> Result<Vec<f64>>> NetworkFn for F {}

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

fn call(f: &mut impl NetworkFn, t: &[u8]) -> Result<Vec<f64>> {
    let out = f(t)?;
    if out.len() != t.len() {
        return Err(Error::shape(
            "metrics",
            format!(
                "predictor returned {} values for {} nodes",
                out.len(),
                t.len()
            ),
        ));
    }
    Ok(out)
}

/// Mean and sample SD; the SD is `None` below two values.
pub fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.len() > 1)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, sd)
}

/// One loop over the sampled networks; `score` maps (predicted, oracle)
/// values at a network to its MSE.
fn rate_series(
    n: usize,
    settings: &MetricSettings,
    mut score: impl FnMut(&[u8]) -> Result<f64>,
) -> Result<Vec<Vec<f64>>> {
    settings.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("metrics need at least one node".into()));
    }
    (1..=settings.m)
        .map(|j| {
            (0..settings.replicates)
                .map(|r| score(&settings.network(n, j, r)?))
                .collect()
        })
        .collect()
}

fn summarize(series: &[Vec<f64>], replicates: usize) -> (Vec<f64>, f64, Option<f64>) {
    let per_rate: Vec<f64> = series
        .iter()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    let metric = per_rate.iter().sum::<f64>() / per_rate.len() as f64;
    let per_replicate: Vec<f64> = (0..replicates)
        .map(|r| series.iter().map(|v| v[r]).sum::<f64>() / series.len() as f64)
        .collect();
    (per_rate, metric, mean_sd(&per_replicate).1)
}

/// PEHNE from ITTE functions: mean over rates of the per-node squared ITTE
/// error on that rate's network. Returns `(metric, per-rate MSEs)`.
pub fn pehne(
    mut predict_itte: impl NetworkFn,
    mut oracle_itte: impl NetworkFn,
    n: usize,
    settings: &MetricSettings,
) -> Result<(f64, Vec<f64>)> {
    let series = rate_series(n, settings, |t| {
        Ok(mse(
            &call(&mut predict_itte, t)?,
            &call(&mut oracle_itte, t)?,
        ))
    })?;
    let (per_rate, metric, _) = summarize(&series, settings.replicates);
    Ok((metric, per_rate))
}

/// CNEE from outcome functions, over the same networks as [`pehne`].
pub fn cnee(
    mut predict_outcome: impl NetworkFn,
    mut oracle_outcome: impl NetworkFn,
    n: usize,
    settings: &MetricSettings,
) -> Result<(f64, Vec<f64>)> {
    let series = rate_series(n, settings, |t| {
        Ok(mse(
            &call(&mut predict_outcome, t)?,
            &call(&mut oracle_outcome, t)?,
        ))
    })?;
    let (per_rate, metric, _) = summarize(&series, settings.replicates);
    Ok((metric, per_rate))
}

/// Both metrics from outcome functions, each network's outcomes computed
/// once. ITTEs are differences against each function's own all-zeros
/// prediction.
pub fn evaluate(
    mut predict_outcome: impl NetworkFn,
    mut oracle_outcome: impl NetworkFn,
    n: usize,
    factual_mse: f64,
    settings: &MetricSettings,
) -> Result<MetricReport> {
    settings.validate()?;
    let zeros = vec![0u8; n];
    let pred0 = call(&mut predict_outcome, &zeros)?;
    let true0 = call(&mut oracle_outcome, &zeros)?;
    let mut pairs = Vec::new();
    let series = rate_series(n, settings, |t| {
        let pred = call(&mut predict_outcome, t)?;
        let truth = call(&mut oracle_outcome, t)?;
        let itte_err = (0..n)
            .map(|i| {
                let e = (pred[i] - pred0[i]) - (truth[i] - true0[i]);
                e * e
            })
            .sum::<f64>()
            / n as f64;
        pairs.push(itte_err);
        Ok(mse(&pred, &truth))
    })?;
    let r = settings.replicates;
    let pehne_series: Vec<Vec<f64>> = pairs.chunks(r).map(<[f64]>::to_vec).collect();
    let (pehne_rates, pehne, pehne_sd) = summarize(&pehne_series, r);
    let (cnee_rates, cnee, cnee_sd) = summarize(&series, r);
    let per_rate = (1..=settings.m)
        .map(|j| RateMse {
            j,
            p: settings.rate(j),
            pehne: pehne_rates[j - 1],
            cnee: cnee_rates[j - 1],
        })
        .collect();
    Ok(MetricReport {
        pehne,
        cnee,
        factual_mse,
        per_rate,
        m: settings.m,
        seed: settings.seed,
        replicates: r,
        pehne_replicate_sd: pehne_sd,
        cnee_replicate_sd: cnee_sd,
    })
}

impl MetricReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Per-rate breakdown with columns `j, p_j, mse_pehne_j, mse_cnee_j`.
    pub fn per_rate_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["j", "p_j", "mse_pehne_j", "mse_cnee_j"])?;
        for r in &self.per_rate {
            w.write_record([
                r.j.to_string(),
                r.p.to_string(),
                r.pehne.to_string(),
                r.cnee.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(m: usize) -> MetricSettings {
        MetricSettings {
            m,
            seed: 11,
            replicates: 1,
        }
    }

    #[test]
    fn full_rate_treats_everyone() {
        assert_eq!(sample_counterfactual(7, 1.0, 3).unwrap(), vec![1; 7]);
    }

    #[test]
    fn rate_outside_unit_interval_is_rejected() {
        assert!(sample_counterfactual(7, 0.0, 3).is_err());
        assert!(sample_counterfactual(7, 1.5, 3).is_err());
    }

    #[test]
    fn half_rate_fraction_within_binomial_bound() {
        let t = sample_counterfactual(10_000, 0.5, 9).unwrap();
        let frac = t.iter().map(|&v| f64::from(v)).sum::<f64>() / 1e4;
        assert!((0.47..=0.53).contains(&frac), "{frac}");
    }

    #[test]
    fn sampler_is_deterministic() {
        let s = settings(5);
        assert_eq!(s.network(50, 3, 0).unwrap(), s.network(50, 3, 0).unwrap());
        assert_ne!(s.network(50, 3, 0).unwrap(), s.network(50, 3, 1).unwrap());
    }

    #[test]
    fn constant_itte_offset_gives_its_square() {
        let oracle = |t: &[u8]| Ok(t.iter().map(|&v| 2.0 * f64::from(v)).collect());
        let shifted = |t: &[u8]| Ok(t.iter().map(|&v| 2.0 * f64::from(v) + 0.5).collect());
        let (v, per_rate) = pehne(shifted, oracle, 20, &settings(10)).unwrap();
        assert_eq!(v, 0.25);
        assert!(per_rate.iter().all(|&x| x == 0.25));
    }

    #[test]
    fn report_metric_is_mean_of_rates() {
        let oracle = |t: &[u8]| Ok(t.iter().map(|&v| f64::from(v)).collect());
        let noisy = |t: &[u8]| {
            Ok(t.iter()
                .enumerate()
                .map(|(i, &v)| f64::from(v) * (1.0 + i as f64 / 10.0))
                .collect())
        };
        let rep = evaluate(noisy, oracle, 30, 0.0, &settings(8)).unwrap();
        let mean_p = rep.per_rate.iter().map(|r| r.pehne).sum::<f64>() / 8.0;
        let mean_c = rep.per_rate.iter().map(|r| r.cnee).sum::<f64>() / 8.0;
        assert!((rep.pehne - mean_p).abs() < 1e-15);
        assert!((rep.cnee - mean_c).abs() < 1e-15);
        // These predictors agree at all-zeros, so PEHNE and CNEE coincide.
        assert!((rep.pehne - rep.cnee).abs() < 1e-15);
        assert!(rep.pehne_replicate_sd.is_none());
    }

    #[test]
    fn evaluate_agrees_with_standalone_metrics() {
        let oracle = |t: &[u8]| {
            Ok(t.iter()
                .enumerate()
                .map(|(i, &v)| i as f64 + f64::from(v))
                .collect())
        };
        let model = |t: &[u8]| Ok(t.iter().map(|&v| 0.3 + 1.7 * f64::from(v)).collect());
        let s = MetricSettings {
            m: 6,
            seed: 2,
            replicates: 3,
        };
        let rep = evaluate(model, oracle, 12, 0.0, &s).unwrap();
        let itte = |f: fn(&[u8]) -> Vec<f64>| {
            move |t: &[u8]| {
                let a = f(t);
                let b = f(&vec![0; t.len()]);
                Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<f64>>())
            }
        };
        fn o(t: &[u8]) -> Vec<f64> {
            t.iter()
                .enumerate()
                .map(|(i, &v)| i as f64 + f64::from(v))
                .collect()
        }
        fn p(t: &[u8]) -> Vec<f64> {
            t.iter().map(|&v| 0.3 + 1.7 * f64::from(v)).collect()
        }
        let (pe, _) = pehne(itte(p), itte(o), 12, &s).unwrap();
        let (cn, _) = cnee(|t: &[u8]| Ok(p(t)), |t: &[u8]| Ok(o(t)), 12, &s).unwrap();
        assert!((rep.pehne - pe).abs() < 1e-12);
        assert!((rep.cnee - cn).abs() < 1e-12);
        assert!(rep.pehne_replicate_sd.is_some());
    }

    #[test]
    fn wrong_length_prediction_is_an_error() {
        let bad = |_: &[u8]| Ok(vec![0.0]);
        let ok = |t: &[u8]| Ok(vec![0.0; t.len()]);
        assert!(cnee(bad, ok, 4, &settings(2)).is_err());
    }

    #[test]
    fn per_rate_csv_has_header_and_m_rows() {
        let f = |t: &[u8]| Ok(vec![0.0; t.len()]);
        let rep = evaluate(f, f, 4, 0.0, &settings(3)).unwrap();
        let csv = rep.per_rate_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "j,p_j,mse_pehne_j,mse_cnee_j");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn sample_sd_of_one_and_three() {
        let (m, sd) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((sd.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }
}
