use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dgp::{DgpParams, ExposureKind, GraphSpec};
use crate::error::{Error, Result};
use crate::graph::{GraphKind, HomophilyParams};
use crate::metrics::MetricSettings;
use crate::model::{Architecture, HiNetConfig, HyperGrid};
use crate::tuning::TuningOptions;

/// Estimators an experiment can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Hinet,
    HinetAlpha0,
    HinetNoGinT,
    GinBaseline,
    NoNetworkBaseline,
    /// Debug estimator that predicts with the true mechanism.
    Oracle,
}

impl Estimator {
    pub const ALL: [Estimator; 6] = [
        Estimator::Hinet,
        Estimator::HinetAlpha0,
        Estimator::HinetNoGinT,
        Estimator::GinBaseline,
        Estimator::NoNetworkBaseline,
        Estimator::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Hinet => "hinet",
            Estimator::HinetAlpha0 => "hinet_alpha0",
            Estimator::HinetNoGinT => "hinet_no_gin_t",
            Estimator::GinBaseline => "gin_baseline",
            Estimator::NoNetworkBaseline => "no_network_baseline",
            Estimator::Oracle => "oracle",
        }
    }

    /// `None` for the oracle.
    pub fn architecture(self) -> Option<Architecture> {
        match self {
            Estimator::Hinet | Estimator::HinetAlpha0 | Estimator::HinetNoGinT => Some(Architecture::Hinet),
            Estimator::GinBaseline => Some(Architecture::Gin),
            Estimator::NoNetworkBaseline => Some(Architecture::NoNetwork),
            Estimator::Oracle => None,
        }
    }

    pub fn use_gin_t(self) -> bool {
        self != Estimator::HinetNoGinT
    }

    pub fn sweeps_alpha(self) -> bool {
        matches!(self, Estimator::Hinet | Estimator::HinetNoGinT)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::param("estimators", format!("unknown estimator `{s}`")))
    }
}

/// Outcome-equation variants compared in the balancing sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpVariant {
    OnlyIndividual,
    OnlySpillover,
    Both,
}

impl DgpVariant {
    pub const ALL: [DgpVariant; 3] = [DgpVariant::OnlyIndividual, DgpVariant::OnlySpillover, DgpVariant::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            DgpVariant::OnlyIndividual => "only_individual",
            DgpVariant::OnlySpillover => "only_spillover",
            DgpVariant::Both => "both",
        }
    }

    pub fn apply(self, params: &DgpParams) -> DgpParams {
        match self {
            DgpVariant::OnlyIndividual => DgpParams {
                beta_spillover: 0.0,
                ..*params
            },
            DgpVariant::OnlySpillover => DgpParams {
                beta_individual: 0.0,
                ..*params
            },
            DgpVariant::Both => *params,
        }
    }
}

impl FromStr for DgpVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DgpVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::param("dgp_variants", format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    BetaXtGrid,
    ExposureKinds,
    DgpVariant,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::BetaXtGrid => "beta_xt_grid",
            SweepAxis::ExposureKinds => "exposure_kinds",
            SweepAxis::DgpVariant => "dgp_variant",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SweepAxis::BetaXtGrid, SweepAxis::ExposureKinds, SweepAxis::DgpVariant]
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::param("sweep_axis", format!("unknown axis `{s}`")))
    }
}

/// One declarative experiment. Every field is a flat TOML key of the same
/// name, and every key can be overridden from the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub d: usize,
    pub beta_xt: f64,
    pub beta_individual: f64,
    pub beta_spillover: f64,
    pub beta_xy: f64,
    pub beta_xny: f64,
    pub beta_eps: f64,
    pub exposure_kind: ExposureKind,
    pub target_treated_rate: f64,
    /// Seed of the mechanism weights, shared by all splits.
    pub dgp_seed: u64,
    /// Seed from which the three split seeds are derived.
    pub data_seed: u64,

    pub graph_kind: GraphKind,
    pub ba_m: usize,
    pub homophily_avg_degree: f64,
    pub homophily_noise_sd: f64,
    pub n_per_split: usize,

    pub hidden_size: Vec<usize>,
    pub epochs: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub dropout: Vec<f64>,
    pub alpha: Vec<f64>,
    pub weight_decay: f64,
    pub alpha_tolerance: f64,
    pub alpha_seeds: usize,

    pub estimators: Vec<Estimator>,
    /// Model initialization seeds; each estimator is trained once per seed.
    pub seeds: Vec<u64>,

    pub m: usize,
    pub replicates: usize,
    pub metric_seed: u64,

    pub output_dir: PathBuf,

    pub sweep_axis: SweepAxis,
    pub beta_xt_grid: Vec<f64>,
    pub exposure_kinds: Vec<ExposureKind>,
    pub dgp_variants: Vec<DgpVariant>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let dgp = DgpParams::default();
        let grid = HyperGrid::default();
        let homophily = HomophilyParams::default();
        Self {
            d: dgp.d,
            beta_xt: dgp.beta_xt,
            beta_individual: dgp.beta_individual,
            beta_spillover: dgp.beta_spillover,
            beta_xy: dgp.beta_xy,
            beta_xny: dgp.beta_xny,
            beta_eps: dgp.beta_eps,
            exposure_kind: dgp.exposure_kind,
            target_treated_rate: dgp.target_treated_rate,
            dgp_seed: 0,
            data_seed: 0,
            graph_kind: GraphKind::Homophily,
            ba_m: GraphSpec::default().ba_m,
            homophily_avg_degree: homophily.target_avg_degree,
            homophily_noise_sd: homophily.noise_sd,
            n_per_split: 5000,
            hidden_size: grid.hidden_size,
            epochs: grid.epochs,
            learning_rate: grid.learning_rate,
            dropout: grid.dropout,
            alpha: grid.alpha,
            weight_decay: HiNetConfig::default().weight_decay,
            alpha_tolerance: TuningOptions::default().alpha_tolerance,
            alpha_seeds: 1,
            estimators: vec![
                Estimator::Hinet,
                Estimator::HinetAlpha0,
                Estimator::HinetNoGinT,
                Estimator::GinBaseline,
                Estimator::NoNetworkBaseline,
            ],
            seeds: vec![0, 1, 2, 3, 4],
            m: crate::metrics::DEFAULT_M,
            replicates: 1,
            metric_seed: 0,
            output_dir: PathBuf::from("runs"),
            sweep_axis: SweepAxis::BetaXtGrid,
            beta_xt_grid: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
            exposure_kinds: ExposureKind::ALL.to_vec(),
            dgp_variants: DgpVariant::ALL.to_vec(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::format("config", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format("config", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp_params().validate()?;
        self.graph_spec_for(self.graph_kind).validate()?;
        if self.n_per_split < 10 {
            return Err(Error::param("n_per_split", "must be at least 10"));
        }
        if self.seeds.is_empty() {
            return Err(Error::param("seeds", "must not be empty"));
        }
        if self.estimators.is_empty() {
            return Err(Error::param("estimators", "must not be empty"));
        }
        self.grid().validate()?;
        for config in self.grid().base_configs(&self.template(Estimator::Hinet, 0)) {
            config.validate()?;
        }
        self.metric_settings().validate()?;
        if !(self.alpha_tolerance >= 0.0 && self.alpha_tolerance.is_finite()) {
            return Err(Error::param("alpha_tolerance", "must be finite and >= 0"));
        }
        if self.alpha_seeds == 0 {
            return Err(Error::param("alpha_seeds", "must be at least 1"));
        }
        match self.sweep_axis {
            SweepAxis::BetaXtGrid if self.beta_xt_grid.is_empty() => {
                return Err(Error::param("beta_xt_grid", "must not be empty"))
            }
            SweepAxis::ExposureKinds if self.exposure_kinds.is_empty() => {
                return Err(Error::param("exposure_kinds", "must not be empty"))
            }
            SweepAxis::DgpVariant if self.dgp_variants.is_empty() => {
                return Err(Error::param("dgp_variants", "must not be empty"))
            }
            _ => {}
        }
        for &b in &self.beta_xt_grid {
            DgpParams {
                beta_xt: b,
                ..self.dgp_params()
            }
            .validate()?;
        }
        Ok(())
    }

    pub fn dgp_params(&self) -> DgpParams {
        DgpParams {
            d: self.d,
            beta_xt: self.beta_xt,
            beta_individual: self.beta_individual,
            beta_spillover: self.beta_spillover,
            beta_xy: self.beta_xy,
            beta_xny: self.beta_xny,
            beta_eps: self.beta_eps,
            exposure_kind: self.exposure_kind,
            target_treated_rate: self.target_treated_rate,
            seed: self.dgp_seed,
        }
    }

    pub fn graph_spec(&self) -> GraphSpec {
        self.graph_spec_for(self.graph_kind)
    }

    fn graph_spec_for(&self, kind: GraphKind) -> GraphSpec {
        GraphSpec {
            kind,
            ba_m: self.ba_m,
            homophily: HomophilyParams {
                target_avg_degree: self.homophily_avg_degree,
                noise_sd: self.homophily_noise_sd,
            },
        }
    }

    pub fn grid(&self) -> HyperGrid {
        HyperGrid {
            hidden_size: self.hidden_size.clone(),
            epochs: self.epochs.clone(),
            learning_rate: self.learning_rate.clone(),
            dropout: self.dropout.clone(),
            alpha: self.alpha.clone(),
        }
    }

    /// Fixed, non-grid model settings of `estimator` for one
    /// initialization seed.
    pub fn template(&self, estimator: Estimator, seed: u64) -> HiNetConfig {
        HiNetConfig {
            seed,
            weight_decay: self.weight_decay,
            use_gin_t: estimator.use_gin_t(),
            ..HiNetConfig::default()
        }
    }

    pub fn tuning_options(&self, estimator: Estimator) -> TuningOptions {
        TuningOptions {
            alpha_tolerance: self.alpha_tolerance,
            alpha_seeds: self.alpha_seeds,
            sweep_alpha: estimator.sweeps_alpha(),
        }
    }

    pub fn metric_settings(&self) -> MetricSettings {
        MetricSettings {
            m: self.m,
            seed: self.metric_seed,
            replicates: self.replicates,
        }
    }
}
