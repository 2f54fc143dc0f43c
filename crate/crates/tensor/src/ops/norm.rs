//! Per-channel batch normalization over `[N, C, ...]` tensors.

use crate::{par, Real, Result, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    /// Normalize with batch statistics.
    Train,
    /// Normalize with running statistics.
    Infer,
}

/// Mean and biased variance of one batch, per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Real> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        RunningStats {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
        }
    }

    /// `running <- momentum * running + (1 - momentum) * batch`.
    pub fn update(&mut self, batch: &BatchStats<T>, momentum: T) {
        let keep = T::one() - momentum;
        for (r, &b) in self.mean.iter_mut().zip(&batch.mean) {
            *r = momentum * *r + keep * b;
        }
        for (r, &b) in self.var.iter_mut().zip(&batch.var) {
            *r = momentum * *r + keep * b;
        }
    }
}

/// Values kept from the forward pass for the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct BnSaved<T> {
    pub xhat: Tensor<T>,
    pub inv_std: Vec<T>,
    pub train: bool,
}

fn layout<T: Real>(x: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let shape = x.shape();
    if shape.len() < 2 {
        return Err(TensorError::invalid("batchnorm", format!("expected [N, C, ...], got {shape:?}")));
    }
    Ok((shape[0], shape[1], shape[2..].iter().product()))
}

fn check_channels<T>(op: &'static str, x: &[usize], c: usize, v: &[T], name: &'static str) -> Result<()> {
    if v.len() != c {
        return Err(TensorError::ShapeMismatch {
            op,
            left: "input",
            left_shape: x.to_vec(),
            right: name,
            right_shape: vec![v.len()],
        });
    }
    Ok(())
}

/// Sum over every element of channel `c`, iterating samples then positions.
fn channel_sum<T: Real>(n: usize, c_total: usize, hw: usize, c: usize, f: impl Fn(usize) -> T) -> T {
    let mut acc = T::zero();
    for s in 0..n {
        let base = (s * c_total + c) * hw;
        for i in base..base + hw {
            acc += f(i);
        }
    }
    acc
}

pub(crate) fn forward<T: Real>(
    x: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    running: &RunningStats<T>,
    mode: BnMode,
    eps: T,
) -> Result<(Tensor<T>, BnSaved<T>, Option<BatchStats<T>>)> {
    let (n, c, hw) = layout(x)?;
    check_channels("batchnorm", x.shape(), c, gamma, "gamma")?;
    check_channels("batchnorm", x.shape(), c, beta, "beta")?;
    check_channels("batchnorm", x.shape(), c, &running.mean, "running_mean")?;
    check_channels("batchnorm", x.shape(), c, &running.var, "running_var")?;
    let data = x.data();

    let (mean, var, stats) = match mode {
        BnMode::Train => {
            let m = n * hw;
            if m < 2 {
                return Err(TensorError::invalid(
                    "batchnorm",
                    format!("train mode needs more than one value per channel, input shape {:?}", x.shape()),
                ));
            }
            let count = T::from_usize(m).unwrap();
            let stats: Vec<(T, T)> = par::map_range(c, |ch| {
                let mean = channel_sum(n, c, hw, ch, |i| data[i]) / count;
                let var = channel_sum(n, c, hw, ch, |i| {
                    let d = data[i] - mean;
                    d * d
                }) / count;
                (mean, var)
            });
            let mean: Vec<T> = stats.iter().map(|s| s.0).collect();
            let var: Vec<T> = stats.iter().map(|s| s.1).collect();
            let batch = BatchStats {
                mean: mean.clone(),
                var: var.clone(),
            };
            (mean, var, Some(batch))
        }
        BnMode::Infer => (running.mean.clone(), running.var.clone(), None),
    };
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();

    let per = c * hw;
    let mut xhat = Tensor::zeros(x.shape());
    par::for_each_chunk_mut(xhat.data_mut(), per, |s, out| {
        let src = &data[s * per..(s + 1) * per];
        for ch in 0..c {
            let (m, is) = (mean[ch], inv_std[ch]);
            for (o, &v) in out[ch * hw..(ch + 1) * hw].iter_mut().zip(&src[ch * hw..(ch + 1) * hw]) {
                let d = v - m;
                // zero-variance channels with eps = 0 normalize to 0
                *o = if d == T::zero() { T::zero() } else { d * is };
            }
        }
    });
    let mut y = Tensor::zeros(x.shape());
    let xh = xhat.data();
    par::for_each_chunk_mut(y.data_mut(), per, |s, out| {
        let src = &xh[s * per..(s + 1) * per];
        for ch in 0..c {
            let (g, b) = (gamma[ch], beta[ch]);
            for (o, &v) in out[ch * hw..(ch + 1) * hw].iter_mut().zip(&src[ch * hw..(ch + 1) * hw]) {
                *o = g * v + b;
            }
        }
    });
    Ok((
        y,
        BnSaved {
            xhat,
            inv_std,
            train: mode == BnMode::Train,
        },
        stats,
    ))
}

/// Returns `(grad_input, grad_gamma, grad_beta)`.
pub(crate) fn backward<T: Real>(grad_out: &Tensor<T>, saved: &BnSaved<T>, gamma: &[T]) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
    let (n, c, hw) = layout(grad_out)?;
    let dy = grad_out.data();
    let xh = saved.xhat.data();
    let sums: Vec<(T, T)> = par::map_range(c, |ch| {
        let sdy = channel_sum(n, c, hw, ch, |i| dy[i]);
        let sdyx = channel_sum(n, c, hw, ch, |i| dy[i] * xh[i]);
        (sdy, sdyx)
    });
    let grad_beta: Vec<T> = sums.iter().map(|s| s.0).collect();
    let grad_gamma: Vec<T> = sums.iter().map(|s| s.1).collect();
    let m = T::from_usize(n * hw).unwrap();
    let per = c * hw;
    let mut gx = Tensor::zeros(grad_out.shape());
    par::for_each_chunk_mut(gx.data_mut(), per, |s, out| {
        for ch in 0..c {
            let scale = gamma[ch] * saved.inv_std[ch];
            let range = s * per + ch * hw..s * per + (ch + 1) * hw;
            let dst = &mut out[ch * hw..(ch + 1) * hw];
            if saved.train {
                let (sdy, sdyx) = sums[ch];
                for ((o, &g), &xv) in dst.iter_mut().zip(&dy[range.clone()]).zip(&xh[range]) {
                    *o = scale / m * (m * g - sdy - xv * sdyx);
                }
            } else {
                for (o, &g) in dst.iter_mut().zip(&dy[range]) {
                    *o = scale * g;
                }
            }
        }
    });
    Ok((gx, grad_gamma, grad_beta))
}

/// Batch normalization. In train mode the batch statistics normalize the
/// input and are folded into `running` with the given momentum; in infer mode
/// only `running` is read.
pub fn batchnorm<T: Real>(
    input: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    running: &mut RunningStats<T>,
    mode: BnMode,
    momentum: T,
    eps: T,
) -> Result<Tensor<T>> {
    let (y, _, stats) = forward(input, gamma, beta, running, mode, eps)?;
    if let Some(stats) = stats {
        running.update(&stats, momentum);
    }
    Ok(y)
}
