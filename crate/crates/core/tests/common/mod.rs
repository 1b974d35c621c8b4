#![allow(dead_code)]

use mfrpn::data::{Axis, Dataset, Fidelity, Schema};
use mfrpn::metrics::{crps_fair, grouped_metrics, mae, r2, Grouping, MetricConfig};
use mfrpn::mf::{joint_loss, joint_loss_and_grads, MfBatch, MfMember};
use mfrpn::nnet::{DenseNet, Init, LeakyRelu};
use mfrpn::rpn::{PredictiveEnsemble, RpnMember};
use mfrpn::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;
pub const FD_TOL: f64 = 1e-5;
pub const MAX_PARAMS: usize = 200;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
}

fn random_dims(rng: &mut ChaCha8Rng, input: usize, output: usize) -> Vec<usize> {
    let mut d = vec![input];
    for _ in 0..rng.random_range(1..=3) {
        d.push(rng.random_range(2..=6));
    }
    d.push(output);
    d
}

fn count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// `sum_ij c_ij * out_ij`, whose gradient is `backward(x, c)`.
fn functional(net: &DenseNet, x: &Matrix, c: &Matrix) -> f64 {
    let out = net.forward(x).unwrap();
    out.as_slice().iter().zip(c.as_slice()).map(|(o, w)| o * w).sum()
}

fn central_difference(theta: &[f64], k: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut t = theta.to_vec();
    t[k] += FD_STEP;
    let up = f(&t);
    t[k] -= 2.0 * FD_STEP;
    let down = f(&t);
    (up - down) / (2.0 * FD_STEP)
}

/// Checks `nets` random dense nets; returns the worst relative error seen.
pub fn check_dense_nets(seed: u64, nets: usize) -> Result<f64, String> {
    let mut rng = rng(seed);
    let mut worst = 0f64;
    let mut done = 0;
    while done < nets {
        let (i, o) = (rng.random_range(1..=4), rng.random_range(1..=3));
        let dims = random_dims(&mut rng, i, o);
        if count(&dims) > MAX_PARAMS {
            continue;
        }
        done += 1;
        let net = DenseNet::new(&dims, LeakyRelu::default(), Init::GlorotUniform, rng.random()).unwrap();
        let x = random_matrix(&mut rng, 4, i);
        let c = random_matrix(&mut rng, 4, o);
        let grads = net.backward(&x, &c).unwrap().flat();
        let theta = net.params_flat();
        for k in 0..theta.len() {
            let fd = central_difference(&theta, k, |t| {
                let mut probe = net.clone();
                probe.set_params_flat(t).unwrap();
                functional(&probe, &x, &c)
            });
            let e = rel_err(grads[k], fd);
            if e >= FD_TOL {
                return Err(format!("dims {dims:?} param {k}: backprop {} vs finite difference {fd}", grads[k]));
            }
            worst = worst.max(e);
        }
    }
    Ok(worst)
}

fn random_member(rng: &mut ChaCha8Rng) -> MfMember {
    loop {
        let input = rng.random_range(1..=3);
        let mid = rng.random_range(1..=3);
        let out = rng.random_range(1..=2);
        let lf_dims = random_dims(rng, input, mid);
        let hf_dims = random_dims(rng, mid, out);
        if count(&lf_dims) + count(&hf_dims) > MAX_PARAMS {
            continue;
        }
        let act = LeakyRelu::default();
        let lf = RpnMember::build(&lf_dims, &lf_dims, act, Init::GlorotUniform, rng.random_range(0.5..1.5), rng.random()).unwrap();
        let hf = RpnMember::build(&hf_dims, &hf_dims, act, Init::GlorotUniform, rng.random_range(0.5..1.5), rng.random()).unwrap();
        return MfMember::new(lf, hf, 0).unwrap();
    }
}

/// Checks the joint-loss gradients of `members` random MF members, both heads.
pub fn check_mf_members(seed: u64, members: usize) -> Result<f64, String> {
    let mut rng = rng(seed);
    let mut worst = 0f64;
    for _ in 0..members {
        let member = random_member(&mut rng);
        let (i, mid, o) = (member.input_dim(), member.lf_output_dim(), member.hf_output_dim());
        let batch = MfBatch::new(
            random_matrix(&mut rng, 3, i),
            random_matrix(&mut rng, 3, mid),
            random_matrix(&mut rng, 2, i),
            random_matrix(&mut rng, 2, o),
        )
        .unwrap();
        let (loss, grads) = joint_loss_and_grads(&member, &batch, 1.0).unwrap();
        let check = joint_loss(&member, &batch).unwrap();
        if (loss.total() - check.total()).abs() > 1e-12 * check.total().max(1.0) {
            return Err(format!("loss {} vs {}", loss.total(), check.total()));
        }
        for head in 0..2 {
            let (analytic, theta) = if head == 0 {
                (grads.lf.flat(), member.lf.trainable.params_flat())
            } else {
                (grads.hf.flat(), member.hf.trainable.params_flat())
            };
            for k in 0..theta.len() {
                let fd = central_difference(&theta, k, |t| {
                    let mut m = member.clone();
                    let net = if head == 0 { &mut m.lf.trainable } else { &mut m.hf.trainable };
                    net.set_params_flat(t).unwrap();
                    joint_loss(&m, &batch).unwrap().total()
                });
                let e = rel_err(analytic[k], fd);
                if e >= FD_TOL {
                    return Err(format!("head {head} param {k}: backprop {} vs finite difference {fd}", analytic[k]));
                }
                worst = worst.max(e);
            }
        }
    }
    Ok(worst)
}

/// A time x lat x lon grid with random targets and member predictions.
pub fn grid_case(seed: u64, shape: [usize; 3], outs: usize, members: usize) -> (Dataset, PredictiveEnsemble) {
    let mut rng = rng(seed);
    let [nt, nlat, nlon] = shape;
    let axes = vec![
        Axis::new("time", (0..nt).map(|i| 6.0 * i as f64).collect()),
        Axis::new("lat", (0..nlat).map(|i| -60.0 + 40.0 * i as f64).collect()),
        Axis::new("lon", (0..nlon).map(|i| 90.0 * i as f64).collect()),
    ];
    let n = nt * nlat * nlon;
    let schema = Schema::generic("toy", 1, outs, &["time", "lat", "lon"]);
    let x = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
    let y = random_matrix(&mut rng, n, outs);
    let ds = Dataset::on_grid("toy", schema, axes, x, y, Fidelity::Test).unwrap();
    let pred = (0..members).map(|_| random_matrix(&mut rng, n, outs)).collect();
    (ds, PredictiveEnsemble::from_members(pred).unwrap())
}

/// Recomputes every grouped row from an explicit coordinate filter and
/// requires exact equality. Returns the number of rows checked.
pub fn brute_force_grouped(ds: &Dataset, pred: &PredictiveEnsemble) -> Result<usize, String> {
    let cfg = MetricConfig::default();
    let outs = ds.targets().cols();
    let mut rows = 0;
    for g in Grouping::ALL {
        let report = grouped_metrics("toy", ds, pred, g, &cfg).map_err(|e| e.to_string())?;
        let key_pos: Vec<usize> = g.key_axes().iter().map(|a| ds.axis_position(a).unwrap()).collect();
        let mut seen = 0;
        for row in &report.rows {
            let j = ds.schema().output_features.iter().position(|f| f.name == row.variable).unwrap();
            let subset: Vec<usize> = (0..ds.len())
                .filter(|&i| {
                    let c = ds.sample_coords(i);
                    key_pos
                        .iter()
                        .zip(&row.group_values)
                        .all(|(&k, &v)| ds.axes()[k].values[c[k] as usize] == v)
                })
                .collect();
            let y: Vec<f64> = subset.iter().map(|&i| ds.targets().get(i, j)).collect();
            let yhat: Vec<f64> = subset.iter().map(|&i| pred.mean.get(i, j)).collect();
            let crps: f64 = subset
                .iter()
                .map(|&i| {
                    let samples: Vec<f64> = pred.member_outputs.iter().map(|m| m.get(i, j)).collect();
                    crps_fair(&samples, ds.targets().get(i, j)).unwrap()
                })
                .sum::<f64>()
                / subset.len() as f64;
            let sigma = subset.iter().map(|&i| pred.sigma.get(i, j)).sum::<f64>() / subset.len() as f64;
            let want = (subset.len(), mae(&yhat, &y, 1.0).unwrap(), r2(&yhat, &y).ok(), crps, sigma);
            let got = (row.count, row.mae, row.r2, row.crps, row.sigma_mean);
            if got != want {
                return Err(format!("{g} {:?} {}: {got:?} vs {want:?}", row.group_values, row.variable));
            }
            seen += row.count;
        }
        if seen != ds.len() * outs {
            return Err(format!("{g}: rows cover {seen} sample-variables"));
        }
        rows += report.rows.len();
    }
    Ok(rows)
}
