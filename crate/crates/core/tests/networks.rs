//! Forward passes against a loop oracle and ensemble behavior on toy data.

mod common;

use mfrpn::data::Dataset;
use mfrpn::nnet::{DenseNet, Init, Layer, LeakyRelu};
use mfrpn::rpn::{bootstrap_indices, build_member, train_sf_ensemble, Ensemble, PredictiveEnsemble, TrainConfig};
use mfrpn::seed;
use mfrpn::Matrix;
use rand::Rng;

/// Plain loops over the layer parameters; shares nothing with the library.
fn oracle(net: &DenseNet, x: &[f64]) -> Vec<f64> {
    let slope = net.activation().negative_slope;
    let layers = net.layers();
    let mut a = x.to_vec();
    for (k, layer) in layers.iter().enumerate() {
        let (n_in, n_out) = (net.dims()[k], net.dims()[k + 1]);
        let mut z = vec![0.0; n_out];
        for i in 0..n_out {
            let mut s = layer.biases[i];
            for j in 0..n_in {
                s += layer.weights[i * n_in + j] * a[j];
            }
            z[i] = if k + 1 == layers.len() || s >= 0.0 { s } else { slope * s };
        }
        a = z;
    }
    a
}

#[test]
fn forward_matches_loop_oracle() {
    let mut rng = common::rng(21);
    for case in 0..200 {
        let mut dims = vec![rng.random_range(1..=6)];
        for _ in 0..rng.random_range(0..=4) {
            dims.push(rng.random_range(1..=16));
        }
        dims.push(rng.random_range(1..=4));
        let mut net = DenseNet::new(&dims, LeakyRelu::default(), Init::GlorotUniform, case).unwrap();
        for layer in net.layers_mut() {
            layer.biases.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
        }
        let x = common::random_matrix(&mut rng, 3, dims[0]);
        let out = net.forward(&x).unwrap();
        for r in 0..3 {
            for (got, want) in out.row(r).iter().zip(oracle(&net, x.row(r))) {
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-300), "dims {dims:?}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn negative_pre_activation_is_scaled_by_slope() {
    let layers = vec![
        Layer { weights: vec![1.0], biases: vec![0.0] },
        Layer { weights: vec![1.0], biases: vec![0.0] },
    ];
    let net = DenseNet::from_layers(&[1, 1, 1], layers, LeakyRelu::default()).unwrap();
    assert_eq!(net.forward_one(&[-1.0]).unwrap(), vec![-0.15]);
    assert_eq!(net.forward_one(&[2.0]).unwrap(), vec![2.0]);
}

fn toy_1d(n: usize) -> Dataset {
    let x: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
    let y: Vec<f64> = x.iter().map(|v| (3.0 * v).sin()).collect();
    Dataset::from_arrays("toy", Matrix::column(&x), Matrix::column(&y)).unwrap()
}

fn toy_config(members: usize) -> TrainConfig {
    TrainConfig {
        members,
        ensemble_seed: 2,
        hidden_dims: vec![32, 32],
        steps: 1500,
        batch_size: 32,
        prior_scale: 1.0,
        adam: mfrpn::nnet::AdamConfig {
            base_lr: 3e-3,
            ..Default::default()
        },
        ..TrainConfig::default()
    }
}

fn mean_sigma(p: &PredictiveEnsemble) -> f64 {
    p.sigma.as_slice().iter().sum::<f64>() / p.sigma.as_slice().len() as f64
}

#[test]
fn spread_grows_outside_the_training_interval() {
    let ds = toy_1d(64);
    let e = train_sf_ensemble(&ds, &toy_config(8)).unwrap();
    let inside = mean_sigma(&e.predict(ds.inputs()).unwrap());
    let outside = mean_sigma(&e.predict(&Matrix::column(&[3.0])).unwrap());
    assert!(outside > inside, "sigma at x=3 {outside} vs training interval {inside}");
}

#[test]
fn sixteen_bootstraps_cover_a_thousand_points() {
    for ensemble_seed in 0..5u64 {
        let mut covered = vec![false; 1000];
        for m in 0..16u64 {
            let member_seed = seed::derive(ensemble_seed, m);
            for i in bootstrap_indices(1000, 0.8, seed::derive(member_seed, seed::TAG_BOOTSTRAP)).unwrap() {
                covered[i] = true;
            }
        }
        let frac = covered.iter().filter(|c| **c).count() as f64 / 1000.0;
        assert!(frac >= 0.99, "seed {ensemble_seed}: coverage {frac}");
    }
}

#[test]
fn identical_members_reproduce_the_single_output() {
    let member = build_member(&[2, 7, 3], 1.3, 4).unwrap();
    let x = common::random_matrix(&mut common::rng(3), 5, 2);
    let single = member.predict(&x).unwrap();
    let e = Ensemble {
        members: vec![member; 6],
        normalization_id: "raw".into(),
        config: TrainConfig::default(),
        steps_trained: 0,
        loss_traces: Vec::new(),
    };
    let p = e.predict(&x).unwrap();
    assert_eq!(p.mean, single);
    assert!(p.sigma.as_slice().iter().all(|s| *s == 0.0));
}

#[test]
fn member_training_order_does_not_matter() {
    let ds = toy_1d(20);
    let cfg = TrainConfig { steps: 40, hidden_dims: vec![8], ..toy_config(4) };
    let x = Matrix::column(&[-0.5, 0.25, 2.0]);
    let parallel = train_sf_ensemble(&ds, &cfg).unwrap();
    let sequential = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| train_sf_ensemble(&ds, &cfg))
        .unwrap();
    assert_eq!(parallel, sequential);
    let mut reversed = parallel.clone();
    reversed.members.reverse();
    let (a, b) = (parallel.predict(&x).unwrap(), reversed.predict(&x).unwrap());
    for (u, v) in a.mean.as_slice().iter().zip(b.mean.as_slice()) {
        assert!((u - v).abs() <= 1e-14 * u.abs().max(1.0));
    }
}
