use crate::{Real, Tensor};

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of ReLU given its output.
pub(crate) fn relu_backward<T: Real>(out: &Tensor<T>, grad: &Tensor<T>) -> Tensor<T> {
    let mut g = grad.clone();
    for (gv, &o) in g.data_mut().iter_mut().zip(out.data()) {
        if o <= T::zero() {
            *gv = T::zero();
        }
    }
    g
}

/// Logistic function, clamped so the result stays strictly inside (0, 1)
/// even where the exact value rounds to 0 or 1.
pub fn sigmoid<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let half_eps = T::epsilon() / (T::one() + T::one());
    let lo = half_eps;
    let hi = T::one() - half_eps;
    x.map(|v| {
        let s = if v >= T::zero() {
            T::one() / (T::one() + (-v).exp())
        } else {
            let e = v.exp();
            e / (T::one() + e)
        };
        s.max(lo).min(hi)
    })
}

/// Gradient of the sigmoid given its output.
pub(crate) fn sigmoid_backward<T: Real>(out: &Tensor<T>, grad: &Tensor<T>) -> Tensor<T> {
    let mut g = grad.clone();
    for (gv, &s) in g.data_mut().iter_mut().zip(out.data()) {
        *gv *= s * (T::one() - s);
    }
    g
}
