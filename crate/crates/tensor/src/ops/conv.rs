use crate::{par, Real, Result, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dConfig {
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Default for Conv2dConfig {
    fn default() -> Self {
        Conv2dConfig {
            stride: 1,
            padding: 0,
            groups: 1,
        }
    }
}

impl Conv2dConfig {
    pub fn new(stride: usize, padding: usize, groups: usize) -> Self {
        Conv2dConfig { stride, padding, groups }
    }

    /// Output spatial extent for an input extent and kernel size.
    pub fn output_extent(&self, input: usize, kernel: usize) -> Option<usize> {
        let padded = input + 2 * self.padding;
        if self.stride == 0 || padded < kernel {
            return None;
        }
        Some((padded - kernel) / self.stride + 1)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Geometry {
    n: usize,
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
    icg: usize,
    ocg: usize,
}

impl Geometry {
    pub(crate) fn new(input: &[usize], weight: &[usize], cfg: Conv2dConfig) -> Result<Self> {
        let mismatch = || TensorError::ShapeMismatch {
            op: "conv2d",
            left: "input",
            left_shape: input.to_vec(),
            right: "weight",
            right_shape: weight.to_vec(),
        };
        let (&[n, c_in, h, w], &[c_out, icg, kh, kw]) = (input, weight) else {
            return Err(mismatch());
        };
        if cfg.stride == 0 {
            return Err(TensorError::invalid("conv2d", "stride must be at least 1"));
        }
        if cfg.groups == 0 || c_in % cfg.groups != 0 || c_out % cfg.groups != 0 {
            return Err(TensorError::invalid(
                "conv2d",
                format!(
                    "groups={} must divide input channels {} and output channels {}",
                    cfg.groups, c_in, c_out
                ),
            ));
        }
        if icg * cfg.groups != c_in || kh == 0 || kw == 0 {
            return Err(mismatch());
        }
        let (Some(oh), Some(ow)) = (cfg.output_extent(h, kh), cfg.output_extent(w, kw)) else {
            return Err(TensorError::invalid(
                "conv2d",
                format!("kernel {kh}x{kw} larger than padded input {h}x{w}"),
            ));
        };
        Ok(Geometry {
            n,
            c_in,
            h,
            w,
            c_out,
            kh,
            kw,
            oh,
            ow,
            stride: cfg.stride,
            pad: cfg.padding,
            icg,
            ocg: c_out / cfg.groups,
        })
    }

    pub(crate) fn output_shape(&self) -> [usize; 4] {
        [self.n, self.c_out, self.oh, self.ow]
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    /// Output indices `lo..hi` along one axis whose input tap `o*stride + k - pad`
    /// lands inside `0..extent`.
    fn valid_range(&self, k: usize, extent: usize, out_extent: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = if self.pad > k { (self.pad - k).div_ceil(s) } else { 0 };
        let hi = if extent + self.pad > k {
            (extent + self.pad - k).div_ceil(s).min(out_extent)
        } else {
            0
        };
        (lo.min(hi), hi)
    }

    fn weight_index(&self, oc: usize, icl: usize, ky: usize, kx: usize) -> usize {
        ((oc * self.icg + icl) * self.kh + ky) * self.kw + kx
    }
}

/// 2-d cross-correlation without bias. `weight` is `[out_c, in_c/groups, kh, kw]`.
pub fn conv2d<T: Real>(input: &Tensor<T>, weight: &Tensor<T>, cfg: Conv2dConfig) -> Result<Tensor<T>> {
    let g = Geometry::new(input.shape(), weight.shape(), cfg)?;
    let mut out = Tensor::zeros(&g.output_shape());
    let in_per = g.c_in * g.h * g.w;
    let out_per = g.c_out * g.oh * g.ow;
    let x = input.data();
    let wt = weight.data();
    par::for_each_chunk_mut(out.data_mut(), out_per, |n, o| {
        forward_sample(&g, &x[n * in_per..(n + 1) * in_per], wt, o)
    });
    Ok(out)
}

fn forward_sample<T: Real>(g: &Geometry, x: &[T], wt: &[T], out: &mut [T]) {
    let hw = g.h * g.w;
    let ohw = g.oh * g.ow;
    for oc in 0..g.c_out {
        let group = oc / g.ocg;
        let oplane = &mut out[oc * ohw..(oc + 1) * ohw];
        for icl in 0..g.icg {
            let ic = group * g.icg + icl;
            let iplane = &x[ic * hw..(ic + 1) * hw];
            if g.is_pointwise() {
                let wv = wt[g.weight_index(oc, icl, 0, 0)];
                for (o, &i) in oplane.iter_mut().zip(iplane) {
                    *o += wv * i;
                }
                continue;
            }
            for ky in 0..g.kh {
                let (oy_lo, oy_hi) = g.valid_range(ky, g.h, g.oh);
                for kx in 0..g.kw {
                    let wv = wt[g.weight_index(oc, icl, ky, kx)];
                    let (ox_lo, ox_hi) = g.valid_range(kx, g.w, g.ow);
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    for oy in oy_lo..oy_hi {
                        let iy = oy * g.stride + ky - g.pad;
                        let irow = &iplane[iy * g.w..(iy + 1) * g.w];
                        let orow = &mut oplane[oy * g.ow + ox_lo..oy * g.ow + ox_hi];
                        let ix0 = ox_lo * g.stride + kx - g.pad;
                        if g.stride == 1 {
                            for (o, &i) in orow.iter_mut().zip(&irow[ix0..]) {
                                *o += wv * i;
                            }
                        } else {
                            for (j, o) in orow.iter_mut().enumerate() {
                                *o += wv * irow[ix0 + j * g.stride];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradients of [`conv2d`] with respect to its input (when requested) and weight.
pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    cfg: Conv2dConfig,
    need_input_grad: bool,
) -> Result<(Option<Tensor<T>>, Tensor<T>)> {
    let g = Geometry::new(input.shape(), weight.shape(), cfg)?;
    if grad_out.shape() != g.output_shape() {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d_backward",
            left: "grad_out",
            left_shape: grad_out.shape().to_vec(),
            right: "output",
            right_shape: g.output_shape().to_vec(),
        });
    }
    let in_per = g.c_in * g.h * g.w;
    let out_per = g.c_out * g.oh * g.ow;
    let x = input.data();
    let wt = weight.data();
    let go = grad_out.data();

    let grad_in = need_input_grad.then(|| {
        let mut gi = Tensor::zeros(input.shape());
        par::for_each_chunk_mut(gi.data_mut(), in_per, |n, gin| {
            input_grad_sample(&g, wt, &go[n * out_per..(n + 1) * out_per], gin)
        });
        gi
    });

    let partials = par::map_range(g.n, |n| {
        let mut gw = vec![T::zero(); weight.len()];
        weight_grad_sample(&g, &x[n * in_per..(n + 1) * in_per], &go[n * out_per..(n + 1) * out_per], &mut gw);
        gw
    });
    let mut grad_w = Tensor::zeros(weight.shape());
    for p in &partials {
        for (a, &b) in grad_w.data_mut().iter_mut().zip(p) {
            *a += b;
        }
    }
    Ok((grad_in, grad_w))
}

fn input_grad_sample<T: Real>(g: &Geometry, wt: &[T], go: &[T], gin: &mut [T]) {
    let hw = g.h * g.w;
    let ohw = g.oh * g.ow;
    for oc in 0..g.c_out {
        let group = oc / g.ocg;
        let goplane = &go[oc * ohw..(oc + 1) * ohw];
        for icl in 0..g.icg {
            let ic = group * g.icg + icl;
            let giplane = &mut gin[ic * hw..(ic + 1) * hw];
            if g.is_pointwise() {
                let wv = wt[g.weight_index(oc, icl, 0, 0)];
                for (i, &o) in giplane.iter_mut().zip(goplane) {
                    *i += wv * o;
                }
                continue;
            }
            for ky in 0..g.kh {
                let (oy_lo, oy_hi) = g.valid_range(ky, g.h, g.oh);
                for kx in 0..g.kw {
                    let wv = wt[g.weight_index(oc, icl, ky, kx)];
                    let (ox_lo, ox_hi) = g.valid_range(kx, g.w, g.ow);
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    for oy in oy_lo..oy_hi {
                        let iy = oy * g.stride + ky - g.pad;
                        let grow = &goplane[oy * g.ow + ox_lo..oy * g.ow + ox_hi];
                        let girow = &mut giplane[iy * g.w..(iy + 1) * g.w];
                        let ix0 = ox_lo * g.stride + kx - g.pad;
                        if g.stride == 1 {
                            for (i, &o) in girow[ix0..].iter_mut().zip(grow) {
                                *i += wv * o;
                            }
                        } else {
                            for (j, &o) in grow.iter().enumerate() {
                                girow[ix0 + j * g.stride] += wv * o;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn weight_grad_sample<T: Real>(g: &Geometry, x: &[T], go: &[T], gw: &mut [T]) {
    let hw = g.h * g.w;
    let ohw = g.oh * g.ow;
    for oc in 0..g.c_out {
        let group = oc / g.ocg;
        let goplane = &go[oc * ohw..(oc + 1) * ohw];
        for icl in 0..g.icg {
            let ic = group * g.icg + icl;
            let iplane = &x[ic * hw..(ic + 1) * hw];
            if g.is_pointwise() {
                gw[g.weight_index(oc, icl, 0, 0)] += goplane.iter().zip(iplane).map(|(&a, &b)| a * b).sum::<T>();
                continue;
            }
            for ky in 0..g.kh {
                let (oy_lo, oy_hi) = g.valid_range(ky, g.h, g.oh);
                for kx in 0..g.kw {
                    let (ox_lo, ox_hi) = g.valid_range(kx, g.w, g.ow);
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    let mut acc = T::zero();
                    for oy in oy_lo..oy_hi {
                        let iy = oy * g.stride + ky - g.pad;
                        let irow = &iplane[iy * g.w..(iy + 1) * g.w];
                        let grow = &goplane[oy * g.ow + ox_lo..oy * g.ow + ox_hi];
                        let ix0 = ox_lo * g.stride + kx - g.pad;
                        if g.stride == 1 {
                            acc += grow.iter().zip(&irow[ix0..]).map(|(&a, &b)| a * b).sum::<T>();
                        } else {
                            for (j, &o) in grow.iter().enumerate() {
                                acc += o * irow[ix0 + j * g.stride];
                            }
                        }
                    }
                    gw[g.weight_index(oc, icl, ky, kx)] += acc;
                }
            }
        }
    }
}
