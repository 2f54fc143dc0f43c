use crate::{Real, Result, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegressionLoss {
    /// Mean squared error.
    Squared,
    /// Mean absolute error, the per-sample L2 norm of a scalar residual.
    Absolute,
}

fn check_pair<T: Real>(pred: &[T], target: &[T]) -> Result<()> {
    if pred.is_empty() {
        return Err(TensorError::invalid("regression_loss", "empty batch"));
    }
    if pred.len() != target.len() {
        return Err(TensorError::invalid(
            "regression_loss",
            format!("{} predictions vs {} targets", pred.len(), target.len()),
        ));
    }
    Ok(())
}

pub fn regression_loss<T: Real>(pred: &[T], target: &[T], mode: RegressionLoss) -> Result<T> {
    check_pair(pred, target)?;
    let n = T::from_usize(pred.len()).unwrap();
    let total: T = pred
        .iter()
        .zip(target)
        .map(|(&p, &q)| match mode {
            RegressionLoss::Squared => (p - q) * (p - q),
            RegressionLoss::Absolute => (p - q).abs(),
        })
        .sum();
    Ok(total / n)
}

pub(crate) fn regression_loss_grad<T: Real>(pred: &[T], target: &[T], mode: RegressionLoss) -> Vec<T> {
    let n = T::from_usize(pred.len()).unwrap();
    let two = T::one() + T::one();
    pred.iter()
        .zip(target)
        .map(|(&p, &q)| match mode {
            RegressionLoss::Squared => two * (p - q) / n,
            RegressionLoss::Absolute => {
                if p > q {
                    T::one() / n
                } else if p < q {
                    -T::one() / n
                } else {
                    T::zero()
                }
            }
        })
        .collect()
}

/// Mean softmax cross-entropy of `logits: [N, K]` against class indices.
/// Returns the loss and the softmax probabilities.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let (n, k) = logits.dims2("softmax_cross_entropy")?;
    if n == 0 {
        return Err(TensorError::invalid("softmax_cross_entropy", "empty batch"));
    }
    if labels.len() != n {
        return Err(TensorError::invalid(
            "softmax_cross_entropy",
            format!("{} labels for {} rows", labels.len(), n),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(TensorError::invalid(
            "softmax_cross_entropy",
            format!("label {bad} out of range for {k} classes"),
        ));
    }
    let mut probs = Vec::with_capacity(n * k);
    let mut total = T::zero();
    for (row, &y) in logits.data().chunks(k).zip(labels) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
        let z: T = exps.iter().copied().sum();
        total += z.ln() + max - row[y];
        probs.extend(exps.iter().map(|&e| e / z));
    }
    Ok((total / T::from_usize(n).unwrap(), Tensor::new(&[n, k], probs)?))
}
