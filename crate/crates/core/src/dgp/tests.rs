use super::*;
use crate::graph::UndirectedGraph;

fn path3() -> UndirectedGraph {
    UndirectedGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
}

/// Path 0-1-2, d = 1, x = (0, ln 3, -ln 3) so x̃ = (1/2, 3/4, 1/4).
fn fixture(t: Vec<u8>) -> Dataset {
    let params = DgpParams {
        d: 1,
        beta_eps: 0.0,
        ..DgpParams::default()
    };
    let weights = WeightBank {
        w_xt: vec![0.3],
        w_xy: vec![0.5],
        w_ty: vec![1.0],
        w_xny: vec![-1.0],
        w_tny: vec![0.8],
    };
    let ln3 = 3f64.ln();
    let x = Tensor::from_vec(3, 1, vec![0.0, ln3, -ln3]).unwrap();
    Dataset::from_parts(
        params,
        GraphSpec::ba(),
        weights,
        DatasetSeeds::derive(0),
        SplitTag::Test,
        x,
        path3(),
        t,
    )
    .unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
    }
}

#[test]
fn features_are_deterministic() {
    assert_eq!(
        sample_features(2, 2, 5).unwrap(),
        sample_features(2, 2, 5).unwrap()
    );
    let one = sample_features(1, 1, 0).unwrap();
    assert!(one.item().is_finite());
}

#[test]
fn feature_moments() {
    let x = sample_features(10_000, 10, 17).unwrap();
    for c in 0..10 {
        let col: Vec<f64> = (0..10_000).map(|r| x.get(r, c)).collect();
        let mean = col.iter().sum::<f64>() / 1e4;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 1e4;
        assert!(mean.abs() < 0.05, "col {c} mean {mean}");
        assert!((0.9..=1.1).contains(&var), "col {c} var {var}");
    }
}

#[test]
fn transform_squashes_first_half() {
    let x = Tensor::from_vec(1, 2, vec![0.0, 0.0]).unwrap();
    assert_eq!(transform_features(&x).data(), &[0.5, 0.0]);

    let x = Tensor::from_vec(1, 1, vec![-3.0]).unwrap();
    assert!((transform_features(&x).item() - 0.047_425_873_177_566_78).abs() < 1e-15);

    let x = Tensor::from_vec(1, 4, vec![1.0, -2.0, 3.0, 4.0]).unwrap();
    let y = transform_features(&x);
    assert_eq!(y.data()[..2], [sigmoid(1.0), sigmoid(-2.0)]);
    assert_eq!(y.data()[2..], [3.0, 4.0]);

    // odd d: ceil(5/2) = 3 columns
    let x = Tensor::from_vec(1, 5, vec![0.0; 5]).unwrap();
    assert_eq!(transform_features(&x).data(), &[0.5, 0.5, 0.5, 0.0, 0.0]);
}

#[test]
fn percentile_interpolates() {
    assert_eq!(percentile(&[4.0, 1.0, 3.0, 2.0], 75.0), 3.25);
    assert_eq!(percentile(&[7.0], 75.0), 7.0);
}

#[test]
fn treatment_rates() {
    let n = 5000;
    let x = sample_features(n, 10, 1).unwrap();
    let w = WeightBank::sample(10, 2);
    let frac = |t: &[u8]| t.iter().map(|&v| f64::from(v)).sum::<f64>() / t.len() as f64;

    // β_xt = 0: σ(0) = 1/2 for every node, not the 25% target.
    let t = assign_treatments(&x, &w.w_xt, 0.0, 0.25, 3).unwrap();
    assert!((0.47..=0.53).contains(&frac(&t)), "{}", frac(&t));

    let t = assign_treatments(&x, &w.w_xt, 6.0, 0.25, 3).unwrap();
    assert!((0.20..=0.30).contains(&frac(&t)), "{}", frac(&t));

    // saturated sigmoid: treated set is the top quarter of ν
    let t = assign_treatments(&x, &w.w_xt, 1e6, 0.25, 3).unwrap();
    let nu: Vec<f64> = (0..n).map(|i| dot(&w.w_xt, x.row(i))).collect();
    let cut = percentile(&nu, 75.0);
    for i in 0..n {
        if nu[i] != cut {
            assert_eq!(t[i], u8::from(nu[i] > cut), "node {i}");
        }
    }
    assert!((frac(&t) - 0.25).abs() < 1e-3);

    assert!(assign_treatments(&x, &w.w_xt[..3], 6.0, 0.25, 3).is_err());
}

#[test]
fn treated_fraction_concentrates_with_n() {
    let spread = |n: usize| {
        let fracs: Vec<f64> = (0..20)
            .map(|s| {
                let x = sample_features(n, 10, 100 + s).unwrap();
                let w = WeightBank::sample(10, 200 + s);
                let t = assign_treatments(&x, &w.w_xt, 6.0, 0.25, 300 + s).unwrap();
                t.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64
            })
            .collect();
        let mean = fracs.iter().sum::<f64>() / 20.0;
        fracs.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / 19.0
    };
    assert!(spread(5000) < spread(500));
}

#[test]
fn exposure_examples() {
    // node 0 with neighbors 1..=4 whose treatments are (1,0,0,1)
    let star = UndirectedGraph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
    let xt = Tensor::filled(5, 1, 1.0);
    let t = [0, 1, 0, 0, 1];
    let z = exposure(ExposureKind::Proportion, &star, &t, &xt, &[1.0]).unwrap();
    assert_eq!(z[0], 0.5);
    let z = exposure(ExposureKind::Sum, &star, &t, &xt, &[1.0]).unwrap();
    assert_eq!(z[0], 2.0);
    let z = exposure(ExposureKind::Entropy, &star, &t, &xt, &[1.0]).unwrap();
    assert!((z[0] - 0.5).abs() < 1e-15);
    let z = exposure(ExposureKind::Entropy, &star, &[0; 5], &xt, &[1.0]).unwrap();
    assert_eq!(z[0], -0.5);

    let pair = UndirectedGraph::from_edges(2, &[(0, 1)]).unwrap();
    let xt = Tensor::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
    let z = exposure(ExposureKind::WeightedAvg, &pair, &[0, 1], &xt, &[0.8]).unwrap();
    assert_eq!(z[0], 0.8);
    let z = exposure(
        ExposureKind::SquaredWeightedAvg,
        &pair,
        &[0, 1],
        &xt,
        &[0.8],
    )
    .unwrap();
    assert!((z[0] - 0.64).abs() < 1e-15);
}

#[test]
fn isolated_nodes_have_zero_exposure() {
    let g = UndirectedGraph::from_edges(3, &[(0, 1)]).unwrap();
    let xt = Tensor::filled(3, 2, 0.7);
    for kind in ExposureKind::ALL {
        let z = exposure(kind, &g, &[1, 1, 1], &xt, &[0.5, -0.2]).unwrap();
        assert_eq!(z[2], 0.0, "{kind}");
        assert!(z.iter().all(|v| v.is_finite()));
    }
    assert!(exposure(ExposureKind::Sum, &g, &[1, 2, 0], &xt, &[0.0, 0.0]).is_err());
}

#[test]
fn outcome_examples() {
    let g = path3();
    let xt = Tensor::from_vec(3, 1, vec![0.2, -0.4, 0.9]).unwrap();
    let w = WeightBank {
        w_xt: vec![0.1],
        w_xy: vec![0.2],
        w_ty: vec![-0.7],
        w_xny: vec![0.4],
        w_tny: vec![0.6],
    };
    let zero = DgpParams {
        d: 1,
        beta_xt: 0.0,
        beta_individual: 0.0,
        beta_spillover: 0.0,
        beta_xy: 0.0,
        beta_xny: 0.0,
        beta_eps: 0.0,
        ..DgpParams::default()
    };
    let y = outcome(&zero, &w, &g, &xt, &[1, 0, 1], Some(&[1.0, 2.0, 3.0])).unwrap();
    assert_eq!(y, vec![0.0; 3]);

    let only_individual = DgpParams {
        beta_individual: 1.0,
        ..zero
    };
    let y = outcome(&only_individual, &w, &g, &xt, &[1, 0, 1], None).unwrap();
    close(&y, &[-0.7 * 0.2, 0.0, -0.7 * 0.9], 1e-15);
}

#[test]
fn hand_computed_path_fixture() {
    let ds = fixture(vec![1, 0, 1]);
    close(ds.transformed_features().data(), &[0.5, 0.75, 0.25], 1e-15);
    // h = (0.5, 0.75, 0.25), u = (0.25, 0.375, 0.125), u_N = (-0.75, -0.375, -0.75),
    // z = (0, (0.4 + 0.2)/2, 0)
    close(ds.outcomes(), &[0.25, 0.6, -0.4375], 1e-12);
    // all treated vs none: 2 h_i + 2 z_i with z = (0.6, 0.3, 0.6)
    close(&ds.true_itte(&[1, 1, 1]).unwrap(), &[2.2, 2.1, 1.7], 1e-12);
}

#[test]
fn oracle_matches_factual_minus_noise() {
    let ds = Dataset::generate(
        300,
        &GraphSpec::ba(),
        &DgpParams::default(),
        4,
        SplitTag::Train,
    )
    .unwrap();
    let po = potential_outcome_oracle(&ds, ds.treatments()).unwrap();
    let noise = ds.noise_term();
    for i in 0..ds.n() {
        assert!((po[i] - (ds.outcomes()[i] - noise[i])).abs() < 1e-12);
    }
    let p = ds.params();
    let base = ds.potential_outcomes(&vec![0; ds.n()]).unwrap();
    let direct = outcome(
        &DgpParams {
            beta_individual: 0.0,
            beta_spillover: 0.0,
            ..*p
        },
        ds.weights(),
        ds.graph(),
        ds.transformed_features(),
        &vec![1; ds.n()],
        None,
    )
    .unwrap();
    close(&base, &direct, 1e-12);
}

#[test]
fn oracle_locality_properties() {
    let params = DgpParams {
        beta_spillover: 0.0,
        ..DgpParams::default()
    };
    let ds = Dataset::generate(60, &GraphSpec::ba(), &params, 8, SplitTag::Train).unwrap();
    let mut t = ds.treatments().to_vec();
    let before = ds.potential_outcomes(&t).unwrap();
    t[5] ^= 1;
    let after = ds.potential_outcomes(&t).unwrap();
    for i in (0..60).filter(|&i| i != 5) {
        assert_eq!(before[i], after[i]);
    }

    let params = DgpParams {
        beta_individual: 0.0,
        ..DgpParams::default()
    };
    let ds = Dataset::generate(60, &GraphSpec::ba(), &params, 8, SplitTag::Train).unwrap();
    let mut t = ds.treatments().to_vec();
    let before = ds.potential_outcomes(&t).unwrap();
    t[5] ^= 1;
    assert_eq!(before[5], ds.potential_outcomes(&t).unwrap()[5]);
}

#[test]
fn itte_difference_only_depends_on_changed_neighbors() {
    for kind in [
        ExposureKind::Sum,
        ExposureKind::Proportion,
        ExposureKind::WeightedAvg,
    ] {
        let params = DgpParams {
            exposure_kind: kind,
            ..DgpParams::default()
        };
        let ds = Dataset::generate(80, &GraphSpec::ba(), &params, 21, SplitTag::Train).unwrap();
        let t = ds.treatments().to_vec();
        let mut t2 = t.clone();
        t2[3] ^= 1;
        let (a, b) = (ds.true_itte(&t).unwrap(), ds.true_itte(&t2).unwrap());
        for i in 0..80 {
            let touched = i == 3 || ds.graph().has_edge(i, 3);
            if !touched {
                assert_eq!(a[i], b[i], "{kind} node {i}");
            }
        }
    }
}

#[test]
fn isolated_node_ignores_everyone_else() {
    let ds = fixture(vec![0, 0, 0]);
    let g = ds.graph().with_isolated_node();
    let x = Tensor::from_vec(4, 1, vec![0.0, 3f64.ln(), -3f64.ln(), 1.0]).unwrap();
    let ds = Dataset::from_parts(
        *ds.params(),
        *ds.graph_spec(),
        ds.weights().clone(),
        *ds.seeds(),
        SplitTag::Test,
        x,
        g,
        vec![0, 0, 0, 1],
    )
    .unwrap();
    let a = ds.potential_outcomes(&[0, 0, 0, 1]).unwrap();
    let b = ds.potential_outcomes(&[1, 1, 1, 1]).unwrap();
    assert_eq!(a[3], b[3]);
}

#[test]
fn generation_is_deterministic() {
    for spec in [GraphSpec::ba(), GraphSpec::homophily()] {
        let a = Dataset::generate(200, &spec, &DgpParams::default(), 5, SplitTag::Train).unwrap();
        let b = Dataset::generate(200, &spec, &DgpParams::default(), 5, SplitTag::Train).unwrap();
        assert_eq!(a, b);
        let c = Dataset::generate(200, &spec, &DgpParams::default(), 6, SplitTag::Train).unwrap();
        assert_ne!(a.outcomes(), c.outcomes());
        assert_eq!(a.weights(), c.weights(), "splits share the mechanism");
    }
}

#[test]
fn weight_bank_range() {
    let w = WeightBank::sample(50, 1);
    w.validate(50).unwrap();
    assert!(w.validate(49).is_err());
}
