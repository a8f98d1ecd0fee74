//! Versioned JSON encoding of datasets. Decoding rebuilds the split from its
//! stored parts and rejects files whose outcomes the mechanism does not
//! reproduce.

use serde::{Deserialize, Serialize};

use crate::dgp::{Dataset, DatasetSeeds, DgpParams, GraphSpec, SplitTag, WeightBank};
use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::tensor::Tensor;

pub const DATASET_FORMAT: &str = "netcausal-dataset";
pub const DATASET_VERSION: u32 = 1;

/// On-disk layout of one split. Matrices are row-major; edges are `[i, j]`
/// with `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub format: String,
    pub version: u32,
    pub params: DgpParams,
    pub graph_spec: GraphSpec,
    pub weight_bank: WeightBank,
    pub seeds: DatasetSeeds,
    pub split_tag: SplitTag,
    pub n: usize,
    pub d: usize,
    pub features: Vec<f64>,
    pub transformed_features: Vec<f64>,
    pub treatments: Vec<u8>,
    pub outcomes: Vec<f64>,
    pub edges: Vec<[usize; 2]>,
}

impl DatasetFile {
    pub fn from_dataset(ds: &Dataset) -> Self {
        Self {
            format: DATASET_FORMAT.to_string(),
            version: DATASET_VERSION,
            params: *ds.params(),
            graph_spec: *ds.graph_spec(),
            weight_bank: ds.weights().clone(),
            seeds: *ds.seeds(),
            split_tag: ds.split(),
            n: ds.n(),
            d: ds.d(),
            features: ds.features().data().to_vec(),
            transformed_features: ds.transformed_features().data().to_vec(),
            treatments: ds.treatments().to_vec(),
            outcomes: ds.outcomes().to_vec(),
            edges: ds.graph().edges().into_iter().map(|(i, j)| [i, j]).collect(),
        }
    }

    pub fn into_dataset(self) -> Result<Dataset> {
        let bad = |reason: String| Error::format("dataset", reason);
        if self.format != DATASET_FORMAT {
            return Err(bad(format!("unknown format tag {:?}", self.format)));
        }
        if self.version != DATASET_VERSION {
            return Err(bad(format!("unsupported version {}", self.version)));
        }
        if self.d != self.params.d {
            return Err(bad(format!("d = {} but params.d = {}", self.d, self.params.d)));
        }
        let cells = self.n.checked_mul(self.d).ok_or_else(|| bad("n * d overflows".into()))?;
        if self.features.len() != cells || self.transformed_features.len() != cells {
            return Err(bad(format!("feature matrices must hold n * d = {cells} values")));
        }
        if self.treatments.len() != self.n || self.outcomes.len() != self.n {
            return Err(bad("treatments and outcomes must hold n values".into()));
        }
        if self.treatments.iter().any(|&t| t > 1) {
            return Err(bad("treatments must be 0 or 1".into()));
        }
        if let Some([i, j]) = self.edges.iter().find(|[i, j]| i >= j) {
            return Err(bad(format!("edge [{i}, {j}] is not ordered i < j")));
        }
        let pairs: Vec<(usize, usize)> = self.edges.iter().map(|&[i, j]| (i, j)).collect();
        let graph = UndirectedGraph::from_edges(self.n, &pairs)?;
        if graph.edge_count() != pairs.len() {
            return Err(bad("duplicate edges".into()));
        }
        let features = Tensor::from_vec(self.n, self.d, self.features)?;
        let transformed = Tensor::from_vec(self.n, self.d, self.transformed_features)?;
        Dataset::from_stored(
            self.params,
            self.graph_spec,
            self.weight_bank,
            self.seeds,
            self.split_tag,
            features,
            &transformed,
            graph,
            self.treatments,
            &self.outcomes,
        )
    }
}

pub fn encode_dataset(ds: &Dataset) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&DatasetFile::from_dataset(ds))?;
    text.push('\n');
    Ok(text)
}

pub fn decode_dataset(text: &str) -> Result<Dataset> {
    serde_json::from_str::<DatasetFile>(text)?.into_dataset()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let params = DgpParams {
            d: 4,
            ..DgpParams::default()
        };
        Dataset::generate(40, &GraphSpec::ba(), &params, 5, SplitTag::Test).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let ds = sample();
        let text = encode_dataset(&ds).unwrap();
        let back = decode_dataset(&text).unwrap();
        assert_eq!(back, ds);
        assert_eq!(encode_dataset(&back).unwrap(), text);
    }

    #[test]
    fn tampered_outcome_is_rejected() {
        let mut file = DatasetFile::from_dataset(&sample());
        file.outcomes[3] += 1e-12;
        assert!(file.into_dataset().is_err());
    }

    #[test]
    fn tampered_feature_is_rejected() {
        let mut file = DatasetFile::from_dataset(&sample());
        file.features[0] += 0.5;
        assert!(file.into_dataset().is_err());
    }

    #[test]
    fn structural_errors_are_rejected() {
        let base = DatasetFile::from_dataset(&sample());
        let mut f = base.clone();
        f.edges.push([3, 3]);
        assert!(f.into_dataset().is_err());
        let mut f = base.clone();
        let e = f.edges[0];
        f.edges.push(e);
        assert!(f.into_dataset().is_err());
        let mut f = base.clone();
        f.treatments[0] = 2;
        assert!(f.into_dataset().is_err());
        let mut f = base.clone();
        f.features.pop();
        assert!(f.into_dataset().is_err());
        let mut f = base;
        f.version = 9;
        assert!(f.into_dataset().is_err());
        assert!(decode_dataset("{}").is_err());
    }
}
