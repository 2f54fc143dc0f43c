//! Finite-difference check of the full tinyFQnet regression loss in f64.
//!
//! Train-mode batch norm, every block, the head and the sigmoid are on the
//! path. A coordinate is skipped when the one-sided differences disagree,
//! which means the step crossed a ReLU kink.

use fqa_core::model::{Network, NetworkSpec};
use fqa_tensor::{BnMode, ParamStore, RegressionLoss, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-6;
pub const TOL: f64 = 1e-4;
pub const INSTANCES: u64 = 20;
pub const COORDS: usize = 24;

pub struct ModelCheck {
    pub worst: f64,
    pub checked: usize,
    pub skipped: usize,
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

fn loss(net: &Network<f64>, x: &Tensor<f64>, y: &[f64]) -> f64 {
    let mut tape = Tape::new();
    let out = net.forward(&mut tape, x.clone(), BnMode::Train).unwrap();
    let l = tape.regression_loss(out.output, y, RegressionLoss::Squared).unwrap();
    tape.value(l).data()[0]
}

fn perturb(store: &mut ParamStore<f64>, p: usize, i: usize, delta: f64) {
    store.params_mut()[p].value.data_mut()[i] += delta;
}

/// One seeded instance: random batch-norm affine parameters, a batch of two
/// 64x64 inputs and random targets.
pub fn check_instance(seed: u64) -> ModelCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::<f64>::new(NetworkSpec::tinyfqnet(), seed).unwrap();
    for p in net.store_mut().params_mut() {
        let shape = p.value.shape().to_vec();
        if p.name.ends_with(".gamma") {
            p.value = Tensor::from_fn(&shape, |_| rng.random_range(0.5..1.5));
        } else if p.name.ends_with(".beta") {
            p.value = Tensor::from_fn(&shape, |_| rng.random_range(-0.3..0.3));
        }
    }
    let x = Tensor::from_fn(&[2, 3, 64, 64], |_| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..2).map(|_| rng.random_range(0.05..0.95)).collect();

    let mut tape = Tape::new();
    let out = net.forward(&mut tape, x.clone(), BnMode::Train).unwrap();
    let l = tape.regression_loss(out.output, &y, RegressionLoss::Squared).unwrap();
    net.store_mut().zero_grad();
    tape.backward(l, net.store_mut()).unwrap();
    let f0 = tape.value(l).data()[0];

    let sizes: Vec<usize> = net.store().params().iter().map(|p| p.value.len()).collect();
    let total: usize = sizes.iter().sum();
    let mut result = ModelCheck {
        worst: 0.0,
        checked: 0,
        skipped: 0,
    };
    for _ in 0..COORDS {
        let mut flat = rng.random_range(0..total);
        let p = sizes.iter().position(|&s| {
            if flat < s {
                true
            } else {
                flat -= s;
                false
            }
        });
        let (p, i) = (p.unwrap(), flat);
        let analytic = net.store().params()[p].grad.data()[i];
        perturb(net.store_mut(), p, i, STEP);
        let fp = loss(&net, &x, &y);
        perturb(net.store_mut(), p, i, -2.0 * STEP);
        let fm = loss(&net, &x, &y);
        perturb(net.store_mut(), p, i, STEP);
        let (fwd, bwd) = ((fp - f0) / STEP, (f0 - fm) / STEP);
        if (fwd - bwd).abs() > TOL * fwd.abs().max(bwd.abs()).max(1e-3) {
            result.skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * STEP);
        result.worst = result.worst.max(rel_err(analytic, numeric));
        result.checked += 1;
    }
    result
}

/// Aggregate over `INSTANCES` seeds.
pub fn check_all() -> ModelCheck {
    let mut all = ModelCheck {
        worst: 0.0,
        checked: 0,
        skipped: 0,
    };
    for seed in 0..INSTANCES {
        let r = check_instance(seed);
        all.worst = all.worst.max(r.worst);
        all.checked += r.checked;
        all.skipped += r.skipped;
    }
    all
}
