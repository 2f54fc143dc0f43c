use super::spec::{LayerKind, NetworkSpec};
use crate::Result;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ParamCount {
    /// Trainable values (conv and linear weights, biases, BN scale/shift).
    pub params: usize,
    /// BN running statistics.
    pub buffers: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LayerCost {
    pub name: String,
    pub params: usize,
    pub macs: u64,
    pub elementwise: u64,
    pub output: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FlopCount {
    /// Multiply-accumulates of conv and linear layers.
    pub macs: u64,
    /// `2 * macs`.
    pub flops: u64,
    /// Operations of BN, activations, additions and pooling, one per
    /// output element (pooling: one per input element).
    pub elementwise: u64,
    pub layers: Vec<LayerCost>,
}

fn layer_params(kind: &LayerKind) -> (usize, usize) {
    match *kind {
        LayerKind::Conv {
            in_channels,
            out_channels,
            kernel,
            groups,
            ..
        } => (out_channels * (in_channels / groups) * kernel * kernel, 0),
        LayerKind::BatchNorm { channels } => (2 * channels, 2 * channels),
        LayerKind::Linear {
            in_features,
            out_features,
            bias,
        } => (in_features * out_features + if bias { out_features } else { 0 }, 0),
        LayerKind::Relu | LayerKind::Add | LayerKind::AvgPool | LayerKind::Sigmoid => (0, 0),
    }
}

/// Parameter count of a network, independent of input size.
pub fn count_params(spec: &NetworkSpec) -> Result<ParamCount> {
    let mut count = ParamCount { params: 0, buffers: 0 };
    for l in spec.layers(spec.input_size, spec.input_size)? {
        let (p, b) = layer_params(&l.kind);
        count.params += p;
        count.buffers += b;
    }
    Ok(count)
}

/// Per-sample compute for an `h x w` input.
pub fn count_flops(spec: &NetworkSpec, h: usize, w: usize) -> Result<FlopCount> {
    let mut total = FlopCount {
        macs: 0,
        flops: 0,
        elementwise: 0,
        layers: Vec::new(),
    };
    for l in spec.layers(h, w)? {
        let out_elems: u64 = l.output.iter().product::<usize>() as u64;
        let in_elems: u64 = l.input.iter().product::<usize>() as u64;
        let (macs, elementwise) = match l.kind {
            LayerKind::Conv {
                in_channels,
                kernel,
                groups,
                ..
            } => (out_elems * ((in_channels / groups) * kernel * kernel) as u64, 0),
            LayerKind::Linear {
                in_features, out_features, ..
            } => ((in_features * out_features) as u64, 0),
            LayerKind::AvgPool => (0, in_elems),
            LayerKind::BatchNorm { .. } | LayerKind::Relu | LayerKind::Add | LayerKind::Sigmoid => (0, out_elems),
        };
        total.macs += macs;
        total.elementwise += elementwise;
        total.layers.push(LayerCost {
            name: l.name.clone(),
            params: layer_params(&l.kind).0,
            macs,
            elementwise,
            output: l.output,
        });
    }
    total.flops = 2 * total.macs;
    Ok(total)
}
