//! Reverse-mode recording of the kernels in [`crate::ops`].

use crate::ops::norm::{self, BnSaved};
use crate::ops::{activation, conv, linear as lin, loss, pool};
use crate::{BatchStats, BnMode, Conv2dConfig, ParamId, ParamStore, Real, RegressionLoss, Result, RunningStats, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Param(ParamId),
    Conv2d {
        x: usize,
        w: usize,
        cfg: Conv2dConfig,
    },
    BatchNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        saved: BnSaved<T>,
    },
    Relu {
        x: usize,
    },
    Sigmoid {
        x: usize,
    },
    AvgPool {
        x: usize,
    },
    Linear {
        x: usize,
        w: usize,
        b: Option<usize>,
    },
    Add {
        a: usize,
        b: usize,
    },
    Mul {
        a: usize,
        b: usize,
    },
    Sum {
        x: usize,
    },
    Regression {
        pred: usize,
        target: Vec<T>,
        mode: RegressionLoss,
    },
    SoftmaxCe {
        logits: usize,
        probs: Tensor<T>,
        labels: Vec<usize>,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records a forward pass so [`Tape::backward`] can replay it in reverse.
///
/// A tape is single-use: after `backward` it rejects a second call, and a
/// new forward pass needs a new tape.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
    consumed: bool,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
            consumed: false,
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Gradient of the last backward pass's loss with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A free input whose gradient is kept (see [`Tape::grad`]).
    pub fn variable(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.push(store.param(id).value.clone(), Op::Param(id), true)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, cfg: Conv2dConfig) -> Result<Var> {
        let y = conv::conv2d(self.value(x), self.value(w), cfg)?;
        let rg = self.rg(x) || self.rg(w);
        Ok(self.push(y, Op::Conv2d { x: x.0, w: w.0, cfg }, rg))
    }

    /// Batch normalization with per-channel `gamma`/`beta`. Train mode also
    /// returns the batch statistics so the caller can update its running
    /// buffers.
    pub fn batchnorm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running: &RunningStats<T>,
        mode: BnMode,
        eps: T,
    ) -> Result<(Var, Option<BatchStats<T>>)> {
        let (y, saved, stats) = norm::forward(self.value(x), self.value(gamma).data(), self.value(beta).data(), running, mode, eps)?;
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        let v = self.push(
            y,
            Op::BatchNorm {
                x: x.0,
                gamma: gamma.0,
                beta: beta.0,
                saved,
            },
            rg,
        );
        Ok((v, stats))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = activation::relu(self.value(x));
        let rg = self.rg(x);
        self.push(y, Op::Relu { x: x.0 }, rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let y = activation::sigmoid(self.value(x));
        let rg = self.rg(x);
        self.push(y, Op::Sigmoid { x: x.0 }, rg)
    }

    pub fn global_avgpool(&mut self, x: Var) -> Result<Var> {
        let y = pool::global_avgpool(self.value(x))?;
        let rg = self.rg(x);
        Ok(self.push(y, Op::AvgPool { x: x.0 }, rg))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let y = lin::linear(self.value(x), self.value(w), b.map(|b| self.value(b)))?;
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        Ok(self.push(
            y,
            Op::Linear {
                x: x.0,
                w: w.0,
                b: b.map(|b| b.0),
            },
            rg,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let mut y = self.value(a).clone();
        y.add_assign(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(y, Op::Add { a: a.0, b: b.0 }, rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "mul",
                left: "lhs",
                left_shape: va.shape().to_vec(),
                right: "rhs",
                right_shape: vb.shape().to_vec(),
            });
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x * y).collect();
        let y = Tensor::new(va.shape(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(y, Op::Mul { a: a.0, b: b.0 }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let y = Tensor::scalar(self.value(x).sum());
        let rg = self.rg(x);
        self.push(y, Op::Sum { x: x.0 }, rg)
    }

    /// Mean regression loss of `pred` (any shape with one value per sample)
    /// against `target`.
    pub fn regression_loss(&mut self, pred: Var, target: &[T], mode: RegressionLoss) -> Result<Var> {
        let l = loss::regression_loss(self.value(pred).data(), target, mode)?;
        let rg = self.rg(pred);
        Ok(self.push(
            Tensor::scalar(l),
            Op::Regression {
                pred: pred.0,
                target: target.to_vec(),
                mode,
            },
            rg,
        ))
    }

    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (l, probs) = loss::softmax_cross_entropy(self.value(logits), labels)?;
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(l),
            Op::SoftmaxCe {
                logits: logits.0,
                probs,
                labels: labels.to_vec(),
            },
            rg,
        ))
    }

    /// Back-propagates from the scalar `loss`. Every parameter gradient in
    /// `store` is overwritten: parameters not reached from `loss` end up zero.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore<T>) -> Result<()> {
        if self.consumed {
            return Err(TensorError::TapeConsumed);
        }
        if !self.value(loss).is_scalar() {
            return Err(TensorError::NonScalarLoss(self.value(loss).shape().to_vec()));
        }
        self.consumed = true;
        store.zero_grad();
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), T::one()));

        for i in (0..=loss.0).rev() {
            let (lower, upper) = grads.split_at_mut(i);
            let Some(g) = upper[0].as_ref() else {
                continue;
            };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let nodes = &self.nodes;
            let mut acc = |idx: usize, t: Tensor<T>| -> Result<()> {
                if !nodes[idx].requires_grad {
                    return Ok(());
                }
                match &mut lower[idx] {
                    Some(existing) => existing.add_assign(&t),
                    slot => {
                        *slot = Some(t);
                        Ok(())
                    }
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => store.param_mut(*id).grad.add_assign(g)?,
                Op::Conv2d { x, w, cfg } => {
                    let (gx, gw) = conv::conv2d_backward(&nodes[*x].value, &nodes[*w].value, g, *cfg, nodes[*x].requires_grad)?;
                    if let Some(gx) = gx {
                        acc(*x, gx)?;
                    }
                    acc(*w, gw)?;
                }
                Op::BatchNorm { x, gamma, beta, saved } => {
                    let (gx, gg, gb) = norm::backward(g, saved, nodes[*gamma].value.data())?;
                    let cshape = nodes[*gamma].value.shape().to_vec();
                    acc(*x, gx)?;
                    acc(*gamma, Tensor::new(&cshape, gg)?)?;
                    acc(*beta, Tensor::new(&cshape, gb)?)?;
                }
                Op::Relu { x } => acc(*x, activation::relu_backward(&node.value, g))?,
                Op::Sigmoid { x } => acc(*x, activation::sigmoid_backward(&node.value, g))?,
                Op::AvgPool { x } => acc(*x, pool::global_avgpool_backward(nodes[*x].value.shape(), g))?,
                Op::Linear { x, w, b } => {
                    let (gx, gw, gb) = lin::linear_backward(&nodes[*x].value, &nodes[*w].value, g);
                    acc(*x, gx)?;
                    acc(*w, gw)?;
                    if let Some(b) = b {
                        let shape = nodes[*b].value.shape().to_vec();
                        acc(*b, gb.reshape(&shape)?)?;
                    }
                }
                Op::Add { a, b } => {
                    acc(*a, g.clone())?;
                    acc(*b, g.clone())?;
                }
                Op::Mul { a, b } => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    let ga = Tensor::new(va.shape(), g.data().iter().zip(vb.data()).map(|(&x, &y)| x * y).collect())?;
                    let gb = Tensor::new(vb.shape(), g.data().iter().zip(va.data()).map(|(&x, &y)| x * y).collect())?;
                    acc(*a, ga)?;
                    acc(*b, gb)?;
                }
                Op::Sum { x } => {
                    let shape = nodes[*x].value.shape().to_vec();
                    acc(*x, Tensor::full(&shape, g.data()[0]))?;
                }
                Op::Regression { pred, target, mode } => {
                    let scale = g.data()[0];
                    let pv = &nodes[*pred].value;
                    let d = loss::regression_loss_grad(pv.data(), target, *mode);
                    acc(*pred, Tensor::new(pv.shape(), d.into_iter().map(|v| v * scale).collect())?)?;
                }
                Op::SoftmaxCe { logits, probs, labels } => {
                    let scale = g.data()[0];
                    let (n, k) = (probs.shape()[0], probs.shape()[1]);
                    let inv_n = T::one() / T::from_usize(n).unwrap();
                    let mut d = probs.clone();
                    for (row, &y) in d.data_mut().chunks_mut(k).zip(labels) {
                        row[y] -= T::one();
                        row.iter_mut().for_each(|v| *v *= inv_n * scale);
                    }
                    acc(*logits, d)?;
                }
            }
        }
        self.grads = grads;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_gradient_is_input() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add_param("w", Tensor::new(&[3], vec![0.3, -1.0, 2.0]).unwrap()).unwrap();
        let x = Tensor::new(&[3], vec![1.5, 2.5, -4.0]).unwrap();
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let xv = tape.constant(x.clone());
        let prod = tape.mul(wv, xv).unwrap();
        let loss = tape.sum(prod);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.param(w).grad, x);
    }

    #[test]
    fn sigmoid_slope_at_zero() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add_param("w", Tensor::scalar(0.0)).unwrap();
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let s = tape.sigmoid(wv);
        let loss = tape.sum(s);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.param(w).grad.data()[0], 0.25);
    }

    #[test]
    fn second_backward_rejected() {
        let mut store = ParamStore::<f32>::new();
        let w = store.add_param("w", Tensor::scalar(1.0)).unwrap();
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let loss = tape.sum(wv);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(tape.backward(loss, &mut store), Err(TensorError::TapeConsumed));
    }

    #[test]
    fn unreached_params_get_zero_gradient() {
        let mut store = ParamStore::<f32>::new();
        let used = store.add_param("used", Tensor::scalar(2.0)).unwrap();
        let unused = store.add_param("unused", Tensor::scalar(3.0)).unwrap();
        store.param_mut(unused).grad = Tensor::scalar(9.0);
        let mut tape = Tape::new();
        let u = tape.param(&store, used);
        let loss = tape.sum(u);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.param(used).grad.data()[0], 1.0);
        assert_eq!(store.param(unused).grad.data()[0], 0.0);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut store = ParamStore::<f32>::new();
        let mut tape = Tape::new();
        let v = tape.variable(Tensor::zeros(&[2]));
        assert!(matches!(tape.backward(v, &mut store), Err(TensorError::NonScalarLoss(_))));
    }
}
