use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphKind, HomophilyParams};

/// How neighbors' treatments are summarized into the spillover driver `z_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExposureKind {
    /// `mean_j t_j * (w_tny · x̃_j)`
    WeightedAvg,
    /// `Σ_j t_j`
    Sum,
    /// `mean_j t_j`
    Proportion,
    /// `H2(p) - 0.5` with `p` the treated share of neighbors.
    Entropy,
    /// `mean_j t_j * (w_tny · x̃_j)²`
    SquaredWeightedAvg,
}

impl ExposureKind {
    pub const ALL: [ExposureKind; 5] = [
        ExposureKind::WeightedAvg,
        ExposureKind::Sum,
        ExposureKind::Proportion,
        ExposureKind::Entropy,
        ExposureKind::SquaredWeightedAvg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExposureKind::WeightedAvg => "weighted_avg",
            ExposureKind::Sum => "sum",
            ExposureKind::Proportion => "proportion",
            ExposureKind::Entropy => "entropy",
            ExposureKind::SquaredWeightedAvg => "squared_weighted_avg",
        }
    }
}

impl std::fmt::Display for ExposureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExposureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExposureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::param("exposure_kind", format!("unknown kind `{s}`")))
    }
}

/// Mechanism parameters shared by every split of one experiment. `seed`
/// drives the weight bank, so splits generated with the same params share
/// the causal mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpParams {
    pub d: usize,
    pub beta_xt: f64,
    pub beta_individual: f64,
    pub beta_spillover: f64,
    pub beta_xy: f64,
    pub beta_xny: f64,
    pub beta_eps: f64,
    pub exposure_kind: ExposureKind,
    pub target_treated_rate: f64,
    pub seed: u64,
}

impl Default for DgpParams {
    fn default() -> Self {
        Self {
            d: 10,
            beta_xt: 6.0,
            beta_individual: 2.0,
            beta_spillover: 2.0,
            beta_xy: 1.5,
            beta_xny: 1.5,
            beta_eps: 0.2,
            exposure_kind: ExposureKind::WeightedAvg,
            target_treated_rate: 0.25,
            seed: 0,
        }
    }
}

impl DgpParams {
    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::param("d", "feature dimension must be at least 1"));
        }
        let betas = [
            ("beta_xt", self.beta_xt),
            ("beta_individual", self.beta_individual),
            ("beta_spillover", self.beta_spillover),
            ("beta_xy", self.beta_xy),
            ("beta_xny", self.beta_xny),
            ("beta_eps", self.beta_eps),
        ];
        for (name, value) in betas {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::param(
                    name,
                    format!("must be a finite value >= 0, got {value}"),
                ));
            }
        }
        if !(self.target_treated_rate > 0.0 && self.target_treated_rate < 1.0) {
            return Err(Error::param(
                "target_treated_rate",
                format!("must lie in (0, 1), got {}", self.target_treated_rate),
            ));
        }
        Ok(())
    }
}

/// Graph generator settings for one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub kind: GraphKind,
    /// Barabási–Albert attachment count.
    pub ba_m: usize,
    pub homophily: HomophilyParams,
}

impl GraphSpec {
    pub fn ba() -> Self {
        Self {
            kind: GraphKind::Ba,
            ..Self::default()
        }
    }

    pub fn homophily() -> Self {
        Self {
            kind: GraphKind::Homophily,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ba_m < 1 {
            return Err(Error::param("ba_m", "must be at least 1"));
        }
        let h = &self.homophily;
        if !(h.target_avg_degree > 0.0 && h.target_avg_degree.is_finite()) {
            return Err(Error::param("homophily_avg_degree", "must be positive and finite"));
        }
        if !(h.noise_sd >= 0.0 && h.noise_sd.is_finite()) {
            return Err(Error::param("homophily_noise_sd", "must be non-negative and finite"));
        }
        Ok(())
    }
}

impl Default for GraphSpec {
    fn default() -> Self {
        Self {
            kind: GraphKind::Ba,
            ba_m: 2,
            homophily: HomophilyParams::default(),
        }
    }
}
