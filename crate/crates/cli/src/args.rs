use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use netcausal::dgp::ExposureKind;
use netcausal::experiment::{DgpVariant, Estimator, ExperimentConfig, SweepAxis};
use netcausal::graph::GraphKind;

#[derive(Debug, Parser)]
#[command(
    name = "netcausal",
    version,
    about = "Treatment-effect experiments under network interference",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the train, validation and test splits.
    Generate(Common),
    /// Tune and train every estimator for every seed.
    Train {
        #[command(flatten)]
        common: Common,
        /// Directory holding the split files (default: <output_dir>/data).
        #[arg(long = "data_dir", alias = "data-dir")]
        data_dir: Option<PathBuf>,
    },
    /// Score trained checkpoints on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Output directory of `train` (default: <output_dir>/train).
        #[arg(long = "train_dir", alias = "train-dir")]
        train_dir: Option<PathBuf>,
        /// Test split file (default: <output_dir>/data/test.json).
        #[arg(long = "test_file", alias = "test-file")]
        test_file: Option<PathBuf>,
    },
    /// Run the full pipeline across a sweep axis.
    Sweep(Common),
    /// Summarize a results CSV into plot data and per-estimator aggregates.
    Report {
        #[command(flatten)]
        common: Common,
        /// Results CSV written by `sweep` (default: <output_dir>/sweep/results.csv).
        #[arg(long)]
        results: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment config; keys match the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Allow writing into an existing output directory.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

macro_rules! overrides {
    (scalars { $($s:ident: $st:ty),* $(,)? } lists { $($l:ident: $lt:ty),* $(,)? }) => {
        /// Per-key overrides of the config file.
        #[derive(Debug, Clone, Default, Args)]
        pub struct Overrides {
            $(
                #[arg(long = stringify!($s), help_heading = "Config keys")]
                pub $s: Option<$st>,
            )*
            $(
                #[arg(long = stringify!($l), value_delimiter = ',', num_args = 1, action = clap::ArgAction::Set, help_heading = "Config keys")]
                pub $l: Option<Vec<$lt>>,
            )*
        }

        impl Overrides {
            pub fn apply(&self, config: &mut ExperimentConfig) {
                $(if let Some(v) = &self.$s { config.$s = v.clone(); })*
                $(if let Some(v) = &self.$l { config.$l = v.clone(); })*
            }
        }
    };
}

overrides! {
    scalars {
        d: usize,
        beta_xt: f64,
        beta_individual: f64,
        beta_spillover: f64,
        beta_xy: f64,
        beta_xny: f64,
        beta_eps: f64,
        exposure_kind: ExposureKind,
        target_treated_rate: f64,
        dgp_seed: u64,
        data_seed: u64,
        graph_kind: GraphKind,
        ba_m: usize,
        homophily_avg_degree: f64,
        homophily_noise_sd: f64,
        n_per_split: usize,
        weight_decay: f64,
        alpha_tolerance: f64,
        alpha_seeds: usize,
        m: usize,
        replicates: usize,
        metric_seed: u64,
        output_dir: PathBuf,
        sweep_axis: SweepAxis,
    }
    lists {
        hidden_size: usize,
        epochs: usize,
        learning_rate: f64,
        dropout: f64,
        alpha: f64,
        estimators: Estimator,
        seeds: u64,
        beta_xt_grid: f64,
        exposure_kinds: ExposureKind,
        dgp_variants: DgpVariant,
    }
}
