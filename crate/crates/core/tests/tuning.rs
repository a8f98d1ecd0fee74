use netcausal::dgp::{Dataset, DgpParams, GraphSpec, SplitTag};
use netcausal::model::{train, Architecture, Checkpoint, HiNetConfig, HyperGrid, Model};
use netcausal::tuning::{grid_search, tune, TuningOptions};
use netcausal::Error;

fn splits() -> (Dataset, Dataset) {
    let params = DgpParams { d: 4, ..DgpParams::default() };
    let spec = GraphSpec::ba();
    (
        Dataset::generate(60, &spec, &params, 1, SplitTag::Train).unwrap(),
        Dataset::generate(40, &spec, &params, 2, SplitTag::Validation).unwrap(),
    )
}

fn template() -> HiNetConfig {
    HiNetConfig { hidden_size: 4, epochs: 5, seed: 3, ..HiNetConfig::default() }
}

fn single(epochs: usize) -> HyperGrid {
    HyperGrid {
        hidden_size: vec![4],
        epochs: vec![epochs],
        learning_rate: vec![1e-2],
        dropout: vec![0.0],
        alpha: vec![0.0],
    }
}

fn json(model: &Model) -> String {
    Checkpoint::from_model(model, "m").to_json().unwrap()
}

#[test]
fn single_point_grid_returns_that_point() {
    let (tr, va) = splits();
    let tuned = grid_search(Architecture::Gin, &tr, &va, &single(6), &template()).unwrap();
    let cfg = tuned.result.selected_config;
    assert_eq!((cfg.hidden_size, cfg.epochs, cfg.learning_rate), (4, 6, 1e-2));
    assert_eq!(tuned.result.loss_table.len(), 1);
    let (model, history) = train(Architecture::Gin, &cfg, &tr, &va).unwrap();
    assert_eq!(json(&tuned.model), json(&model));
    assert_eq!(tuned.history, history);
}

#[test]
fn epoch_snapshots_equal_shorter_runs() {
    let (tr, va) = splits();
    let grid = HyperGrid { epochs: vec![3, 8], ..single(0) };
    let tuned = grid_search(Architecture::NoNetwork, &tr, &va, &grid, &template()).unwrap();
    for entry in &tuned.result.loss_table {
        let (_, history) = train(Architecture::NoNetwork, &entry.config, &tr, &va).unwrap();
        assert_eq!(entry.val_loss, Some(history.last().unwrap().val_loss));
    }
}

#[test]
fn tuning_is_deterministic() {
    let (tr, va) = splits();
    let grid = HyperGrid {
        hidden_size: vec![3, 4],
        epochs: vec![4],
        learning_rate: vec![1e-2, 1e-3],
        dropout: vec![0.0],
        alpha: vec![0.0, 0.5, 1.0],
    };
    let run = || tune(Architecture::Hinet, &tr, &va, &grid, &template(), &TuningOptions::default()).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.result, b.result);
    assert_eq!(json(&a.model), json(&b.model));
    assert_eq!(a.result.alpha_table.as_ref().map(Vec::len), Some(3));
}

#[test]
fn all_divergent_grid_fails() {
    let (tr, va) = splits();
    let grid = HyperGrid { learning_rate: vec![1e200], ..single(20) };
    match grid_search(Architecture::Gin, &tr, &va, &grid, &template()) {
        Err(Error::TuningFailed) => {}
        other => panic!("expected TuningFailed, got {:?}", other.map(|t| t.result)),
    }
}
