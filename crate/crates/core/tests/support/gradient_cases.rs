//! Central finite-difference checks of every backward rule. Each case panics
//! on the first mismatch.
//!
//! Each case projects the op's output onto a random direction `r`, so the
//! scalar `f(x) = <r, op(x)>` has gradient `backward(r)`. Inputs are resampled
//! until they sit away from kinks (rectifier zeros, pooling ties, exact
//! shapelet matches, argmin switches).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shapecond::nn::{Arch, BackwardOptions, Network, Norm, Pooling};
use shapecond::shapelet::{Candidate, Shapelet, ShapeletPool};
use shapecond::synthesis::{bn_regularizer, bn_regularizer_grads};
use shapecond::tensor::{
    batchnorm_backward, batchnorm_forward, conv1d_backward, conv1d_forward, cross_entropy, linear_backward,
    linear_forward, maxpool1d_backward, maxpool1d_forward, strans_backward, strans_forward, Activation, BnMode,
    BnState, Target, Tensor,
};

const CASES: usize = 50;
const H: f64 = 1e-4;
const TOL: f64 = 1e-4;

fn uniform(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Compares `analytic` with central differences of `f` at up to 24 random
/// coordinates. The relative error uses a floor of 1e-3 on the magnitude so
/// near-zero components are judged absolutely.
fn check(what: &str, x: &[f64], analytic: &[f64], rng: &mut ChaCha8Rng, f: impl Fn(&[f64]) -> f64) {
    assert_eq!(x.len(), analytic.len(), "{what}: gradient length");
    let coords: Vec<usize> = if x.len() <= 24 {
        (0..x.len()).collect()
    } else {
        (0..24).map(|_| rng.random_range(0..x.len())).collect()
    };
    let mut probe = x.to_vec();
    for i in coords {
        probe[i] = x[i] + H;
        let up = f(&probe);
        probe[i] = x[i] - H;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * H);
        let err = (numeric - analytic[i]).abs() / numeric.abs().max(analytic[i].abs()).max(1e-3);
        assert!(
            err < TOL,
            "{what}: coordinate {i} analytic {} numeric {numeric} (relative error {err:e})",
            analytic[i]
        );
    }
}

pub fn conv1d() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..CASES {
        let (b, c_in, c_out) = (rng.random_range(1..3), rng.random_range(1..4), rng.random_range(1..4));
        let k = rng.random_range(1..5);
        let stride = rng.random_range(1..3);
        let padding = rng.random_range(0..3);
        let l = rng.random_range(k.max(2)..12);
        let x = Tensor::new(&[b, c_in, l], uniform(&mut rng, b * c_in * l, 1.0)).unwrap();
        let w = Tensor::new(&[c_out, c_in, k], uniform(&mut rng, c_out * c_in * k, 1.0)).unwrap();
        let bias = Tensor::new(&[c_out], uniform(&mut rng, c_out, 1.0)).unwrap();
        let y = conv1d_forward(&x, &w, &bias, stride, padding).unwrap();
        let r = Tensor::new(y.shape(), uniform(&mut rng, y.numel(), 1.0)).unwrap();
        let g = conv1d_backward(&x, &w, &r, stride, padding, true).unwrap();

        let fx = |v: &[f64]| {
            let x = Tensor::new(x.shape(), v.to_vec()).unwrap();
            dot(conv1d_forward(&x, &w, &bias, stride, padding).unwrap().data(), r.data())
        };
        check("conv input", x.data(), g.input.as_ref().unwrap().data(), &mut rng, fx);
        let fw = |v: &[f64]| {
            let w = Tensor::new(w.shape(), v.to_vec()).unwrap();
            dot(conv1d_forward(&x, &w, &bias, stride, padding).unwrap().data(), r.data())
        };
        check("conv weight", w.data(), g.weight.data(), &mut rng, fw);
        let fb = |v: &[f64]| {
            let bias = Tensor::new(bias.shape(), v.to_vec()).unwrap();
            dot(conv1d_forward(&x, &w, &bias, stride, padding).unwrap().data(), r.data())
        };
        check("conv bias", bias.data(), g.bias.data(), &mut rng, fb);
    }
}

pub fn batchnorm_train_mode() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..CASES {
        let (b, c, l) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(2..8));
        let x = Tensor::new(&[b, c, l], uniform(&mut rng, b * c * l, 2.0)).unwrap();
        let mut state = BnState::new(c);
        state.gamma = Tensor::new(&[c], uniform(&mut rng, c, 2.0)).unwrap();
        state.beta = Tensor::new(&[c], uniform(&mut rng, c, 1.0)).unwrap();
        let (y, cache) = batchnorm_forward(&x, &state, BnMode::Train).unwrap();
        let r = Tensor::new(y.shape(), uniform(&mut rng, y.numel(), 1.0)).unwrap();
        let g = batchnorm_backward(&cache, &state, &x, &r, None).unwrap();

        let fx = |v: &[f64]| {
            let x = Tensor::new(x.shape(), v.to_vec()).unwrap();
            dot(batchnorm_forward(&x, &state, BnMode::Train).unwrap().0.data(), r.data())
        };
        check("bn input", x.data(), g.input.data(), &mut rng, fx);
        let fg = |v: &[f64]| {
            let mut s = state.clone();
            s.gamma = Tensor::new(&[c], v.to_vec()).unwrap();
            dot(batchnorm_forward(&x, &s, BnMode::Train).unwrap().0.data(), r.data())
        };
        check("bn gamma", state.gamma.data(), &g.gamma, &mut rng, fg);
        let fb = |v: &[f64]| {
            let mut s = state.clone();
            s.beta = Tensor::new(&[c], v.to_vec()).unwrap();
            dot(batchnorm_forward(&x, &s, BnMode::Train).unwrap().0.data(), r.data())
        };
        check("bn beta", state.beta.data(), &g.beta, &mut rng, fb);
    }
}

pub fn batchnorm_statistic_gradients() {
    // f = <r, y> + <a, mean> + <s, var>: exercises the extra statistic path.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..CASES {
        let (b, c, l) = (rng.random_range(1..4), rng.random_range(1..3), rng.random_range(2..6));
        let x = Tensor::new(&[b, c, l], uniform(&mut rng, b * c * l, 2.0)).unwrap();
        let state = BnState::new(c);
        let (y, cache) = batchnorm_forward(&x, &state, BnMode::BatchStats).unwrap();
        let r = Tensor::new(y.shape(), uniform(&mut rng, y.numel(), 1.0)).unwrap();
        let a = uniform(&mut rng, c, 1.0);
        let s = uniform(&mut rng, c, 1.0);
        let g = batchnorm_backward(&cache, &state, &x, &r, Some((&a, &s))).unwrap();
        let f = |v: &[f64]| {
            let x = Tensor::new(x.shape(), v.to_vec()).unwrap();
            let (y, cache) = batchnorm_forward(&x, &state, BnMode::BatchStats).unwrap();
            dot(y.data(), r.data()) + dot(&cache.batch_mean, &a) + dot(&cache.batch_var, &s)
        };
        check("bn statistics", x.data(), g.input.data(), &mut rng, f);
    }
}

pub fn linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..CASES {
        let (b, n_in, n_out) = (rng.random_range(1..5), rng.random_range(1..7), rng.random_range(1..5));
        let x = Tensor::new(&[b, n_in], uniform(&mut rng, b * n_in, 1.0)).unwrap();
        let w = Tensor::new(&[n_out, n_in], uniform(&mut rng, n_out * n_in, 1.0)).unwrap();
        let bias = Tensor::new(&[n_out], uniform(&mut rng, n_out, 1.0)).unwrap();
        let r = Tensor::new(&[b, n_out], uniform(&mut rng, b * n_out, 1.0)).unwrap();
        let g = linear_backward(&x, &w, &r).unwrap();
        let fx = |v: &[f64]| dot(linear_forward(&Tensor::new(x.shape(), v.to_vec()).unwrap(), &w, &bias).unwrap().data(), r.data());
        check("linear input", x.data(), g.input.data(), &mut rng, fx);
        let fw = |v: &[f64]| dot(linear_forward(&x, &Tensor::new(w.shape(), v.to_vec()).unwrap(), &bias).unwrap().data(), r.data());
        check("linear weight", w.data(), g.weight.data(), &mut rng, fw);
        let fb = |v: &[f64]| dot(linear_forward(&x, &w, &Tensor::new(bias.shape(), v.to_vec()).unwrap()).unwrap().data(), r.data());
        check("linear bias", bias.data(), g.bias.data(), &mut rng, fb);
    }
}

pub fn activations_away_from_kinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for act in [Activation::Relu, Activation::LeakyRelu, Activation::Sigmoid] {
        for _ in 0..CASES {
            let n = rng.random_range(1..20);
            let v: Vec<f64> = (0..n)
                .map(|_| loop {
                    let z = rng.random_range(-3.0..3.0f64);
                    if z.abs() > 1e-3 {
                        break z;
                    }
                })
                .collect();
            let x = Tensor::new(&[n], v).unwrap();
            let y = act.forward(&x);
            let r = Tensor::new(&[n], uniform(&mut rng, n, 1.0)).unwrap();
            let g = act.backward(&x, &y, &r).unwrap();
            let f = |v: &[f64]| dot(act.forward(&Tensor::new(&[n], v.to_vec()).unwrap()).data(), r.data());
            check(act.name(), x.data(), g.data(), &mut rng, f);
        }
    }
}

pub fn maxpool_away_from_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut done = 0;
    while done < CASES {
        let (b, c, l) = (rng.random_range(1..3), rng.random_range(1..3), rng.random_range(2..12));
        let (k, s) = (rng.random_range(1..4), rng.random_range(1..3));
        let v = uniform(&mut rng, b * c * l, 1.0);
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[1] - w[0] < 1e-3) {
            continue;
        }
        let x = Tensor::new(&[b, c, l], v).unwrap();
        let (y, arg) = maxpool1d_forward(&x, k, s).unwrap();
        let r = Tensor::new(y.shape(), uniform(&mut rng, y.numel(), 1.0)).unwrap();
        let g = maxpool1d_backward(x.shape(), &arg, &r).unwrap();
        let f = |v: &[f64]| dot(maxpool1d_forward(&Tensor::new(x.shape(), v.to_vec()).unwrap(), k, s).unwrap().0.data(), r.data());
        check("maxpool", x.data(), g.data(), &mut rng, f);
        done += 1;
    }
}

pub fn cross_entropy_hard_and_soft() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..CASES {
        let (b, v) = (rng.random_range(1..5), rng.random_range(2..6));
        let z = uniform(&mut rng, b * v, 3.0);
        let hard: Vec<usize> = (0..b).map(|_| rng.random_range(0..v)).collect();
        let mut soft = Vec::new();
        for _ in 0..b {
            let row: Vec<f64> = (0..v).map(|_| rng.random_range(0.01..1.0)).collect();
            let s: f64 = row.iter().sum();
            soft.extend(row.iter().map(|p| p / s));
        }
        let logits = Tensor::new(&[b, v], z.clone()).unwrap();
        for (name, target) in [("ce hard", Target::Hard(&hard)), ("ce soft", Target::Soft(&soft))] {
            let (_, g) = cross_entropy(&logits, target).unwrap();
            let f = |x: &[f64]| cross_entropy(&Tensor::new(&[b, v], x.to_vec()).unwrap(), target).unwrap().0;
            check(name, &z, g.data(), &mut rng, f);
        }
    }
}

fn random_pool(rng: &mut ChaCha8Rng, channels: usize, l: usize, window: usize) -> ShapeletPool {
    let k = rng.random_range(1..4);
    let shapelets = (0..k)
        .map(|_| {
            let len = rng.random_range(1..=l.min(5));
            Shapelet {
                candidate: Candidate {
                    series_index: None,
                    channel: rng.random_range(0..channels),
                    position: rng.random_range(0..=l - len),
                    values: uniform(rng, len, 1.0),
                },
                score: 0.0,
                threshold: 0.0,
            }
        })
        .collect();
    ShapeletPool::new(shapelets, window)
}

pub fn shapelet_transform_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut done = 0;
    while done < CASES {
        let (b, c, l) = (rng.random_range(1..3), rng.random_range(1..3), rng.random_range(5..12));
        let window = rng.random_range(0..3);
        let pool = random_pool(&mut rng, c, l, window);
        let x = Tensor::new(&[b, c, l], uniform(&mut rng, b * c * l, 1.0)).unwrap();
        let (y, cache) = strans_forward(&x, &pool).unwrap();
        if y.data().iter().any(|&d| d <= 1e-3) {
            continue;
        }
        // Stay where the minimizing alignment is locally constant.
        let stable = (0..x.numel()).all(|i| {
            [H, -H].iter().all(|&h| {
                let mut v = x.data().to_vec();
                v[i] += h;
                let (_, c2) = strans_forward(&Tensor::new(x.shape(), v).unwrap(), &pool).unwrap();
                c2.positions == cache.positions
            })
        });
        if !stable {
            continue;
        }
        let r = Tensor::new(y.shape(), uniform(&mut rng, y.numel(), 1.0)).unwrap();
        let g = strans_backward(&x, &pool, &cache, &r).unwrap();
        let f = |v: &[f64]| dot(strans_forward(&Tensor::new(x.shape(), v.to_vec()).unwrap(), &pool).unwrap().0.data(), r.data());
        check("strans", x.data(), g.data(), &mut rng, f);
        done += 1;
    }
}

pub fn shapelet_transform_single_window_matches_norm() {
    // W = 0: the feature is exactly ||x[j..j+l] - s||.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..CASES {
        let l = rng.random_range(4..10);
        let pool = random_pool(&mut rng, 1, l, 0);
        let x = Tensor::new(&[1, 1, l], uniform(&mut rng, l, 1.0)).unwrap();
        let (y, cache) = strans_forward(&x, &pool).unwrap();
        for (i, s) in pool.shapelets().iter().enumerate() {
            let j = s.candidate.position;
            let d: f64 = s
                .candidate
                .values
                .iter()
                .enumerate()
                .map(|(t, v)| (x.data()[j + t] - v).powi(2))
                .sum::<f64>()
                .sqrt();
            assert_eq!(cache.positions[i], j);
            assert!((y.data()[i] - d).abs() < 1e-12);
        }
    }
}

fn net_input_gradient_case(arch: Arch, seed: u64, with_pool: bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, c, l) = (3, 2, 16);
    let pool = with_pool.then(|| random_pool(&mut rng, c, l, 1));
    let net = Network::new(arch, c, 3, pool, seed).unwrap();
    let x = Tensor::new(&[b, c, l], uniform(&mut rng, b * c * l, 1.0)).unwrap();
    let labels = [0, 2, 1];
    let trace = net.forward(&x, BnMode::BatchStats).unwrap();
    let (_, g) = cross_entropy(&trace.logits, Target::Hard(&labels)).unwrap();
    let grads = net
        .backward(
            &trace,
            &g,
            BackwardOptions {
                input_grad: true,
                param_grads: true,
                stat_grads: None,
            },
        )
        .unwrap();
    let f = |v: &[f64]| {
        let t = net.forward(&Tensor::new(x.shape(), v.to_vec()).unwrap(), BnMode::BatchStats).unwrap();
        cross_entropy(&t.logits, Target::Hard(&labels)).unwrap().0
    };
    check("network input", x.data(), grads.input.as_ref().unwrap().data(), &mut rng, f);

    let params: Vec<Tensor> = net.parameters().into_iter().map(|(_, t)| t.clone()).collect();
    for (pi, p) in params.iter().enumerate() {
        let f = |v: &[f64]| {
            let mut n2 = net.clone();
            n2.parameters_mut()[pi].data_mut().copy_from_slice(v);
            let t = n2.forward(&x, BnMode::BatchStats).unwrap();
            cross_entropy(&t.logits, Target::Hard(&labels)).unwrap().0
        };
        check(&format!("network parameter {pi}"), p.data(), grads.params[pi].data(), &mut rng, f);
    }
}

pub fn whole_network_smooth_architectures() {
    // Sigmoid and mean pooling keep the composite free of kinks.
    for (i, norm) in [Norm::None, Norm::Batch, Norm::Instance, Norm::Layer].into_iter().enumerate() {
        let arch = Arch {
            depth: 2,
            width: 4,
            kernel: 3,
            norm,
            activation: Activation::Sigmoid,
            pooling: Pooling::Mean,
        };
        net_input_gradient_case(arch, 100 + i as u64, false);
    }
}

pub fn whole_teacher_network() {
    let arch = Arch {
        depth: 2,
        width: 4,
        kernel: 5,
        activation: Activation::Sigmoid,
        pooling: Pooling::Mean,
        ..Arch::default()
    };
    for seed in 0..5 {
        net_input_gradient_case(arch, 200 + seed, true);
    }
}

pub fn bn_regularizer_input_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for case in 0..CASES {
        let arch = Arch {
            depth: 2,
            width: 3,
            kernel: 3,
            activation: Activation::Sigmoid,
            pooling: Pooling::Mean,
            ..Arch::default()
        };
        let mut net = Network::new(arch, 1, 2, None, case as u64).unwrap();
        // Give the running statistics something other than (0, 1).
        let warm = Tensor::new(&[4, 1, 8], uniform(&mut rng, 32, 2.0)).unwrap();
        let t = net.forward(&warm, BnMode::Train).unwrap();
        net.update_running(&t);
        let running: Vec<(Vec<f64>, Vec<f64>)> = net
            .bn_layers()
            .iter()
            .map(|bn| (bn.state.running_mean.clone(), bn.state.running_var.clone()))
            .collect();
        let running_refs: Vec<(&[f64], &[f64])> = running.iter().map(|(m, v)| (m.as_slice(), v.as_slice())).collect();

        let x = Tensor::new(&[2, 1, 8], uniform(&mut rng, 16, 1.5)).unwrap();
        let trace = net.forward(&x, BnMode::BatchStats).unwrap();
        let stat_grads = bn_regularizer_grads(&trace.bn_batch_stats(), &running_refs, 1.0).unwrap();
        let zero = Tensor::zeros(trace.logits.shape());
        let g = net
            .backward(
                &trace,
                &zero,
                BackwardOptions {
                    input_grad: true,
                    param_grads: false,
                    stat_grads: Some(&stat_grads),
                },
            )
            .unwrap();
        let f = |v: &[f64]| {
            let t = net.forward(&Tensor::new(x.shape(), v.to_vec()).unwrap(), BnMode::BatchStats).unwrap();
            bn_regularizer(&t.bn_batch_stats(), &running_refs).unwrap()
        };
        check("bn regularizer", x.data(), g.input.as_ref().unwrap().data(), &mut rng, f);
    }
}

/// Every check, by name.
#[allow(dead_code)]
pub const ALL: &[(&str, fn())] = &[
    ("conv1d", conv1d),
    ("batchnorm_train_mode", batchnorm_train_mode),
    ("batchnorm_statistic_gradients", batchnorm_statistic_gradients),
    ("linear", linear),
    ("activations_away_from_kinks", activations_away_from_kinks),
    ("maxpool_away_from_ties", maxpool_away_from_ties),
    ("cross_entropy_hard_and_soft", cross_entropy_hard_and_soft),
    ("shapelet_transform_layer", shapelet_transform_layer),
    ("shapelet_transform_single_window_matches_norm", shapelet_transform_single_window_matches_norm),
    ("whole_network_smooth_architectures", whole_network_smooth_architectures),
    ("whole_teacher_network", whole_teacher_network),
    ("bn_regularizer_input_gradient", bn_regularizer_input_gradient),
];
