use crate::{Real, Result, Tensor, TensorError};

/// Mean over each `H x W` plane: `[N, C, H, W] -> [N, C]`.
pub fn global_avgpool<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4("global_avgpool")?;
    if h == 0 || w == 0 {
        return Err(TensorError::invalid("global_avgpool", "empty spatial plane"));
    }
    let hw = h * w;
    let denom = T::from_usize(hw).unwrap();
    let data = x.data().chunks(hw).map(|plane| plane.iter().copied().sum::<T>() / denom).collect();
    Tensor::new(&[n, c], data)
}

pub(crate) fn global_avgpool_backward<T: Real>(input_shape: &[usize], grad: &Tensor<T>) -> Tensor<T> {
    let hw: usize = input_shape[2..].iter().product();
    let denom = T::from_usize(hw).unwrap();
    let mut out = Tensor::zeros(input_shape);
    for (plane, &g) in out.data_mut().chunks_mut(hw).zip(grad.data()) {
        plane.fill(g / denom);
    }
    out
}
