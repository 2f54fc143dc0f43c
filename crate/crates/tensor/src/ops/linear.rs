use crate::{Real, Result, Tensor, TensorError};

/// `y = x * weight^T + bias` for `x: [N, D]`, `weight: [O, D]`, `bias: [O]`.
pub fn linear<T: Real>(x: &Tensor<T>, weight: &Tensor<T>, bias: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    let (n, d) = x.dims2("linear")?;
    let (o, wd) = weight.dims2("linear")?;
    if d != wd {
        return Err(TensorError::ShapeMismatch {
            op: "linear",
            left: "input",
            left_shape: x.shape().to_vec(),
            right: "weight",
            right_shape: weight.shape().to_vec(),
        });
    }
    if let Some(b) = bias {
        if b.len() != o {
            return Err(TensorError::ShapeMismatch {
                op: "linear",
                left: "weight",
                left_shape: weight.shape().to_vec(),
                right: "bias",
                right_shape: b.shape().to_vec(),
            });
        }
    }
    let xs = x.data();
    let ws = weight.data();
    let mut out = Vec::with_capacity(n * o);
    for row in xs.chunks(d) {
        for (j, wrow) in ws.chunks(d).enumerate() {
            let dot: T = row.iter().zip(wrow).map(|(&a, &b)| a * b).sum();
            out.push(dot + bias.map_or(T::zero(), |b| b.data()[j]));
        }
    }
    Tensor::new(&[n, o], out)
}

/// Returns `(grad_x, grad_weight, grad_bias)`.
pub(crate) fn linear_backward<T: Real>(x: &Tensor<T>, weight: &Tensor<T>, grad: &Tensor<T>) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (n, d) = (x.shape()[0], x.shape()[1]);
    let o = weight.shape()[0];
    let g = grad.data();
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = Tensor::zeros(weight.shape());
    let mut gb = Tensor::zeros(&[o]);
    for s in 0..n {
        let xrow = &x.data()[s * d..(s + 1) * d];
        for j in 0..o {
            let gv = g[s * o + j];
            gb.data_mut()[j] += gv;
            let wrow = &weight.data()[j * d..(j + 1) * d];
            for (a, &w) in gx.data_mut()[s * d..(s + 1) * d].iter_mut().zip(wrow) {
                *a += gv * w;
            }
            for (a, &xv) in gw.data_mut()[j * d..(j + 1) * d].iter_mut().zip(xrow) {
                *a += gv * xv;
            }
        }
    }
    (gx, gw, gb)
}
