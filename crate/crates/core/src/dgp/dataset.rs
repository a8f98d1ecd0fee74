use serde::{Deserialize, Serialize};

use super::{
    assign_treatments, sample_features, sample_noise, transform_features, DgpParams, GraphSpec,
    StructuralTerms, WeightBank,
};
use crate::error::{Error, Result};
use crate::graph::{
    assortativity_categorical, assortativity_numeric, generate_ba, generate_homophily, GraphKind,
    UndirectedGraph,
};
use crate::seed;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Validation,
    Test,
}

impl SplitTag {
    pub const ALL: [SplitTag; 3] = [SplitTag::Train, SplitTag::Validation, SplitTag::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Validation => "validation",
            SplitTag::Test => "test",
        }
    }
}

/// Seeds of every random stage of one split. All but `split` are derived
/// from `split`, and are stored so a file documents its own provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSeeds {
    pub split: u64,
    pub features: u64,
    pub graph: u64,
    pub treatment: u64,
    pub noise: u64,
}

impl DatasetSeeds {
    pub fn derive(split: u64) -> Self {
        Self {
            split,
            features: seed::derive(split, "features", 0),
            graph: seed::derive(split, "graph", 0),
            treatment: seed::derive(split, "treatment", 0),
            noise: seed::derive(split, "noise", 0),
        }
    }
}

/// One observational split together with the hidden mechanism that
/// generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    params: DgpParams,
    graph_spec: GraphSpec,
    weights: WeightBank,
    seeds: DatasetSeeds,
    split: SplitTag,
    features: Tensor,
    transformed: Tensor,
    treatments: Vec<u8>,
    outcomes: Vec<f64>,
    graph: UndirectedGraph,
    noise: Vec<f64>,
    terms: StructuralTerms,
}

impl Dataset {
    /// Generates a full split: features, graph, treatments and noisy
    /// factual outcomes. The weight bank comes from `params.seed`, everything
    /// else from `split_seed`.
    pub fn generate(
        n: usize,
        graph_spec: &GraphSpec,
        params: &DgpParams,
        split_seed: u64,
        split: SplitTag,
    ) -> Result<Self> {
        params.validate()?;
        if n < 2 {
            return Err(Error::param("n", "a split needs at least 2 nodes"));
        }
        let seeds = DatasetSeeds::derive(split_seed);
        let weights = WeightBank::sample(params.d, params.seed);
        let features = sample_features(n, params.d, seeds.features)?;
        let graph = match graph_spec.kind {
            GraphKind::Ba => generate_ba(n, graph_spec.ba_m, seeds.graph)?,
            GraphKind::Homophily => {
                generate_homophily(&features, graph_spec.homophily, seeds.graph)?
            }
        };
        let treatments = assign_treatments(
            &features,
            &weights.w_xt,
            params.beta_xt,
            params.target_treated_rate,
            seeds.treatment,
        )?;
        Self::from_parts(
            *params,
            *graph_spec,
            weights,
            seeds,
            split,
            features,
            graph,
            treatments,
        )
    }

    /// Assembles a split from explicit pieces, computing transformed features,
    /// the noise draw from `seeds.noise`, and the factual outcomes.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        params: DgpParams,
        graph_spec: GraphSpec,
        weights: WeightBank,
        seeds: DatasetSeeds,
        split: SplitTag,
        features: Tensor,
        graph: UndirectedGraph,
        treatments: Vec<u8>,
    ) -> Result<Self> {
        params.validate()?;
        let n = graph.node_count();
        if features.rows() != n || features.cols() != params.d {
            return Err(Error::InvalidInput(format!(
                "features are {:?}, expected {n}x{}",
                features.shape(),
                params.d
            )));
        }
        if weights.dim() != params.d {
            return Err(Error::InvalidInput(
                "weight bank dimension differs from d".into(),
            ));
        }
        let transformed = transform_features(&features);
        let terms = StructuralTerms::new(&weights, &graph, &transformed)?;
        let noise = sample_noise(n, seeds.noise);
        let outcomes = terms.outcomes(&params, &graph, &treatments, Some(&noise))?;
        Ok(Self {
            params,
            graph_spec,
            weights,
            seeds,
            split,
            features,
            transformed,
            treatments,
            outcomes,
            graph,
            noise,
            terms,
        })
    }

    pub fn params(&self) -> &DgpParams {
        &self.params
    }

    pub fn graph_spec(&self) -> &GraphSpec {
        &self.graph_spec
    }

    pub fn weights(&self) -> &WeightBank {
        &self.weights
    }

    pub fn seeds(&self) -> &DatasetSeeds {
        &self.seeds
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn transformed_features(&self) -> &Tensor {
        &self.transformed
    }

    pub fn treatments(&self) -> &[u8] {
        &self.treatments
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn graph(&self) -> &UndirectedGraph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.node_count()
    }

    pub fn d(&self) -> usize {
        self.params.d
    }

    /// The scaled noise actually added to the factual outcomes, `β_eps ε`.
    pub fn noise_term(&self) -> Vec<f64> {
        self.noise
            .iter()
            .map(|e| self.params.beta_eps * e)
            .collect()
    }

    /// Individual treatment effect driver `h_i = w_ty · x̃_i`.
    pub fn individual_effects(&self) -> &[f64] {
        &self.terms.individual
    }

    /// Noiseless potential outcomes under the treatment vector `t`.
    pub fn potential_outcomes(&self, t: &[u8]) -> Result<Vec<f64>> {
        self.terms.outcomes(&self.params, &self.graph, t, None)
    }

    /// True total effect of `t` relative to nobody treated.
    pub fn true_itte(&self, t: &[u8]) -> Result<Vec<f64>> {
        let treated = self.potential_outcomes(t)?;
        let base = self.potential_outcomes(&vec![0; self.n()])?;
        Ok(treated.iter().zip(&base).map(|(a, b)| a - b).collect())
    }

    pub fn treated_fraction(&self) -> f64 {
        self.treatments.iter().map(|&t| f64::from(t)).sum::<f64>() / self.n() as f64
    }

    pub fn treatment_assortativity(&self) -> Result<f64> {
        assortativity_categorical(&self.graph, &self.treatments)
    }

    pub fn outcome_assortativity(&self) -> Result<f64> {
        assortativity_numeric(&self.graph, &self.outcomes)
    }

    /// Rebuilds a split from stored values and verifies it is
    /// self-consistent: transformed features and outcomes must equal what
    /// the mechanism reproduces, bit for bit.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_stored(
        params: DgpParams,
        graph_spec: GraphSpec,
        weights: WeightBank,
        seeds: DatasetSeeds,
        split: SplitTag,
        features: Tensor,
        transformed: &Tensor,
        graph: UndirectedGraph,
        treatments: Vec<u8>,
        outcomes: &[f64],
    ) -> Result<Self> {
        weights.validate(params.d)?;
        let ds = Self::from_parts(
            params, graph_spec, weights, seeds, split, features, graph, treatments,
        )?;
        if ds
            .transformed
            .data()
            .iter()
            .map(|v| v.to_bits())
            .ne(transformed.data().iter().map(|v| v.to_bits()))
            || ds.transformed.shape() != transformed.shape()
        {
            return Err(Error::InvalidInput(
                "transformed features disagree with the feature transform".into(),
            ));
        }
        if ds.outcomes.len() != outcomes.len()
            || ds
                .outcomes
                .iter()
                .zip(outcomes)
                .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            return Err(Error::InvalidInput(
                "stored outcomes are not reproduced by the mechanism and noise seed".into(),
            ));
        }
        Ok(ds)
    }
}

/// Free-function form of [`Dataset::generate`].
pub fn generate_dataset(
    n: usize,
    graph_spec: &GraphSpec,
    params: &DgpParams,
    split_seed: u64,
    split: SplitTag,
) -> Result<Dataset> {
    Dataset::generate(n, graph_spec, params, split_seed, split)
}

/// Noiseless potential outcomes of `dataset` under `t_cf`.
pub fn potential_outcome_oracle(dataset: &Dataset, t_cf: &[u8]) -> Result<Vec<f64>> {
    dataset.potential_outcomes(t_cf)
}
