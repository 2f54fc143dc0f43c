//! Central finite-difference checks of every recorded primitive, in f64.
//! Shared by the gradient tests and the acceptance suite.

use fqa_tensor::{BnMode, Conv2dConfig, ParamStore, RegressionLoss, RunningStats, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-4;
pub const TOL: f64 = 1e-4;
pub const INSTANCES: u64 = 20;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Pushes values away from zero so kinked functions are differentiable at
/// every coordinate within one finite-difference step.
fn away_from_zero(t: Tensor<f64>) -> Tensor<f64> {
    t.map(|v| if v.abs() < 0.05 { v.signum() * 0.05 + v } else { v })
}

/// Runs `f` on `inputs` recorded as variables, then compares every analytic
/// input gradient with a central difference. Returns the worst relative error.
fn check<F>(inputs: &[Tensor<f64>], f: F) -> f64
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Var,
{
    let eval = |ts: &[Tensor<f64>]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ts.iter().map(|t| tape.variable(t.clone())).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).data()[0]
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    let loss = f(&mut tape, &vars);
    let mut store = ParamStore::new();
    tape.backward(loss, &mut store).unwrap();

    let mut worst = 0.0f64;
    for (k, v) in vars.iter().enumerate() {
        let analytic = tape.grad(*v).cloned().unwrap_or_else(|| Tensor::zeros(inputs[k].shape()));
        for i in 0..inputs[k].len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * STEP);
            worst = worst.max(rel_err(analytic.data()[i], numeric));
        }
    }
    worst
}

/// Reduces any tensor to a scalar through a fixed random projection so every
/// output element carries a distinct weight.
fn project(tape: &mut Tape<f64>, y: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let r = random(&mut rng, tape.value(y).shape());
    let rv = tape.constant(r);
    let p = tape.mul(y, rv).unwrap();
    tape.sum(p)
}

fn conv2d(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stride = 1 + (seed % 2) as usize;
    let padding = ((seed / 2) % 2) as usize;
    let depthwise = seed.is_multiple_of(3);
    let (out_c, groups, icg) = if depthwise { (3, 3, 1) } else { (4, 1, 3) };
    let x = random(&mut rng, &[2, 3, 5, 5]);
    let w = random(&mut rng, &[out_c, icg, 3, 3]);
    let cfg = Conv2dConfig::new(stride, padding, groups);
    check(&[x, w], |t, v| {
        let y = t.conv2d(v[0], v[1], cfg).unwrap();
        project(t, y, seed)
    })
}

fn conv2d_1x1(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random(&mut rng, &[2, 3, 5, 5]);
    let w = random(&mut rng, &[5, 3, 1, 1]);
    check(&[x, w], |t, v| {
        let y = t.conv2d(v[0], v[1], Conv2dConfig::default()).unwrap();
        project(t, y, seed)
    })
}

fn batchnorm_train(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random(&mut rng, &[2, 3, 5, 5]);
    let g = random(&mut rng, &[3]);
    let b = random(&mut rng, &[3]);
    let rs = RunningStats::new(3);
    check(&[x, g, b], |t, v| {
        let (y, _) = t.batchnorm(v[0], v[1], v[2], &rs, BnMode::Train, 1e-5).unwrap();
        project(t, y, seed)
    })
}

fn batchnorm_infer(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random(&mut rng, &[2, 3, 5, 5]);
    let g = random(&mut rng, &[3]);
    let b = random(&mut rng, &[3]);
    let rs = RunningStats {
        mean: (0..3).map(|_| rng.random_range(-0.5..0.5)).collect(),
        var: (0..3).map(|_| rng.random_range(0.5..2.0)).collect(),
    };
    check(&[x, g, b], |t, v| {
        let (y, _) = t.batchnorm(v[0], v[1], v[2], &rs, BnMode::Infer, 1e-5).unwrap();
        project(t, y, seed)
    })
}

fn relu(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = away_from_zero(random(&mut rng, &[2, 3, 5, 5]));
    check(&[x], |t, v| {
        let y = t.relu(v[0]);
        project(t, y, seed)
    })
}

fn sigmoid(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random(&mut rng, &[2, 3, 5, 5]).map(|v| 4.0 * v);
    check(&[x], |t, v| {
        let y = t.sigmoid(v[0]);
        project(t, y, seed)
    })
}

fn avgpool(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random(&mut rng, &[2, 3, 5, 5]);
    check(&[x], |t, v| {
        let y = t.global_avgpool(v[0]).unwrap();
        project(t, y, seed)
    })
}

fn linear(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random(&mut rng, &[3, 6]);
    let w = random(&mut rng, &[4, 6]);
    let b = random(&mut rng, &[4]);
    let with = check(&[x.clone(), w.clone(), b], |t, v| {
        let y = t.linear(v[0], v[1], Some(v[2])).unwrap();
        project(t, y, seed)
    });
    let without = check(&[x, w], |t, v| {
        let y = t.linear(v[0], v[1], None).unwrap();
        project(t, y, seed)
    });
    with.max(without)
}

fn add_mul(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random(&mut rng, &[2, 3, 5, 5]);
    let b = random(&mut rng, &[2, 3, 5, 5]);
    check(&[a, b], |t, v| {
        let s = t.add(v[0], v[1]).unwrap();
        let p = t.mul(s, v[1]).unwrap();
        project(t, p, seed)
    })
}

fn squared_loss(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random(&mut rng, &[6, 1]);
    let q: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..1.0)).collect();
    check(&[p], |t, v| t.regression_loss(v[0], &q, RegressionLoss::Squared).unwrap())
}

fn absolute_loss(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..1.0)).collect();
    let offsets = away_from_zero(random(&mut rng, &[6, 1]));
    let p = Tensor::from_fn(&[6, 1], |i| q[i] + offsets.data()[i]);
    check(&[p], |t, v| t.regression_loss(v[0], &q, RegressionLoss::Absolute).unwrap())
}

fn softmax_cross_entropy(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logits = random(&mut rng, &[4, 5]).map(|v| 3.0 * v);
    let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..5)).collect();
    check(&[logits], |t, v| t.softmax_cross_entropy(v[0], &labels).unwrap())
}

fn conv_bn_sigmoid_pool_linear(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random(&mut rng, &[2, 3, 5, 5]);
    let w = random(&mut rng, &[4, 3, 3, 3]);
    let g = random(&mut rng, &[4]);
    let b = random(&mut rng, &[4]).map(|v| v + 0.5);
    let fc = random(&mut rng, &[1, 4]);
    let rs = RunningStats::new(4);
    let q = [0.3, 0.8];
    check(&[x, w, g, b, fc], |t, v| {
        let c = t.conv2d(v[0], v[1], Conv2dConfig::new(1, 1, 1)).unwrap();
        let (n, _) = t.batchnorm(c, v[2], v[3], &rs, BnMode::Train, 1e-5).unwrap();
        let a = t.sigmoid(n);
        let p = t.global_avgpool(a).unwrap();
        let o = t.linear(p, v[4], None).unwrap();
        let s = t.sigmoid(o);
        t.regression_loss(s, &q, RegressionLoss::Squared).unwrap()
    })
}

/// Every primitive check, by name. Each case returns the worst relative
/// error over all input coordinates of one seeded instance.
pub const CASES: &[(&str, fn(u64) -> f64)] = &[
    ("conv2d", conv2d),
    ("conv2d 1x1", conv2d_1x1),
    ("batchnorm train", batchnorm_train),
    ("batchnorm infer", batchnorm_infer),
    ("relu", relu),
    ("sigmoid", sigmoid),
    ("avgpool", avgpool),
    ("linear", linear),
    ("add/mul", add_mul),
    ("squared loss", squared_loss),
    ("absolute loss", absolute_loss),
    ("softmax cross-entropy", softmax_cross_entropy),
    ("conv-bn-sigmoid-pool-linear", conv_bn_sigmoid_pool_linear),
];

/// Worst relative error of `case` over `INSTANCES` seeds.
pub fn worst(case: fn(u64) -> f64) -> f64 {
    (0..INSTANCES).map(case).fold(0.0, f64::max)
}
