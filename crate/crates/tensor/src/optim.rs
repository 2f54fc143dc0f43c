use crate::{ParamStore, Real, Tensor};

/// Stochastic gradient descent with heavy-ball momentum and L2 weight decay:
/// `v <- momentum * v + grad + weight_decay * value; value <- value - lr * v`.
#[derive(Clone, Debug)]
pub struct Sgd<T> {
    pub lr: T,
    pub momentum: T,
    pub weight_decay: T,
    velocity: Vec<Tensor<T>>,
}

impl<T: Real> Sgd<T> {
    pub fn new(lr: T, momentum: T, weight_decay: T) -> Self {
        Sgd {
            lr,
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore<T>) {
        if self.velocity.len() != store.params().len() {
            self.velocity = store.params().iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        }
        for (p, v) in store.params_mut().iter_mut().zip(&mut self.velocity) {
            let grad = p.grad.data();
            let value = p.value.data_mut();
            for ((vel, &g), x) in v.data_mut().iter_mut().zip(grad).zip(value.iter_mut()) {
                *vel = self.momentum * *vel + g + self.weight_decay * *x;
                *x -= self.lr * *vel;
            }
        }
    }
}
