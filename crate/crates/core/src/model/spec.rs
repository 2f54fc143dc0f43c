use crate::{FqaError, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    /// Scalar quality score through a sigmoid.
    Quality,
    /// Embedding plus a bias-free classifier over identities.
    Recognizer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

/// Inverted-residual block: 1x1 expand, 3x3 depthwise, 1x1 project, each
/// followed by batch norm and ReLU.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub in_channels: usize,
    pub expand_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub residual: bool,
}

impl BlockSpec {
    pub fn new(in_channels: usize, expand_channels: usize, out_channels: usize, stride: usize, residual: bool) -> Self {
        BlockSpec {
            in_channels,
            expand_channels,
            out_channels,
            stride,
            residual,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride != 1 && self.stride != 2 {
            return Err(FqaError::Spec(format!("block stride must be 1 or 2, got {}", self.stride)));
        }
        if self.in_channels == 0 || self.expand_channels == 0 || self.out_channels == 0 {
            return Err(FqaError::Spec("block channels must be positive".into()));
        }
        if self.residual && (self.stride != 1 || self.in_channels != self.out_channels) {
            return Err(FqaError::Spec(format!(
                "residual block needs stride 1 and matching channels, got {}->{} stride {}",
                self.in_channels, self.out_channels, self.stride
            )));
        }
        Ok(())
    }

    /// Channel counts after each of the three convolutions, input first.
    pub fn channel_trace(&self) -> [usize; 4] {
        [self.in_channels, self.expand_channels, self.expand_channels, self.out_channels]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    pub input_size: usize,
    pub in_channels: usize,
    pub stem: ConvSpec,
    pub blocks: Vec<BlockSpec>,
    /// Width of the 1x1 conv between the blocks and the pooling layer.
    pub head_channels: Option<usize>,
    pub embedding_dim: Option<usize>,
    pub num_classes: Option<usize>,
    /// Apply ReLU after the projecting 1x1 conv of each block (as the
    /// quality network is described) rather than keeping it linear.
    pub relu_after_projection: bool,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

pub const DEFAULT_BN_EPS: f64 = 1e-5;
pub const DEFAULT_BN_MOMENTUM: f64 = 0.9;

impl NetworkSpec {
    /// The 7-block quality network for 64x64 crops.
    pub fn tinyfqnet() -> Self {
        NetworkSpec {
            kind: NetworkKind::Quality,
            input_size: 64,
            in_channels: 3,
            stem: ConvSpec {
                out_channels: 11,
                kernel: 3,
                stride: 2,
                padding: 1,
            },
            blocks: vec![
                BlockSpec::new(11, 8, 2, 1, false),
                BlockSpec::new(2, 8, 5, 2, false),
                BlockSpec::new(5, 20, 5, 1, false),
                BlockSpec::new(5, 20, 11, 2, false),
                BlockSpec::new(11, 44, 11, 1, true),
                BlockSpec::new(11, 44, 11, 1, true),
                BlockSpec::new(11, 44, 22, 1, false),
            ],
            head_channels: Some(256),
            embedding_dim: None,
            num_classes: None,
            relu_after_projection: true,
            bn_eps: DEFAULT_BN_EPS,
            bn_momentum: DEFAULT_BN_MOMENTUM,
        }
    }

    /// Desk-scale recognizer built from the same block vocabulary.
    pub fn recognizer(embedding_dim: usize, num_classes: usize) -> Self {
        NetworkSpec {
            kind: NetworkKind::Recognizer,
            input_size: 64,
            in_channels: 3,
            stem: ConvSpec {
                out_channels: 16,
                kernel: 3,
                stride: 2,
                padding: 1,
            },
            blocks: vec![
                BlockSpec::new(16, 32, 24, 2, false),
                BlockSpec::new(24, 72, 24, 1, true),
                BlockSpec::new(24, 72, 48, 2, false),
                BlockSpec::new(48, 144, 48, 1, true),
            ],
            head_channels: Some(128),
            embedding_dim: Some(embedding_dim),
            num_classes: Some(num_classes),
            relu_after_projection: false,
            bn_eps: DEFAULT_BN_EPS,
            bn_momentum: DEFAULT_BN_MOMENTUM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.in_channels == 0 {
            return Err(FqaError::Spec("input size and channels must be positive".into()));
        }
        if self.stem.out_channels == 0 || self.stem.kernel == 0 || self.stem.stride == 0 {
            return Err(FqaError::Spec("stem conv must have positive channels, kernel and stride".into()));
        }
        let mut c = self.stem.out_channels;
        for (i, b) in self.blocks.iter().enumerate() {
            b.validate().map_err(|e| FqaError::Spec(format!("block{}: {e}", i + 1)))?;
            if b.in_channels != c {
                return Err(FqaError::Spec(format!(
                    "block{} expects {} input channels but receives {}",
                    i + 1,
                    b.in_channels,
                    c
                )));
            }
            c = b.out_channels;
        }
        match self.kind {
            NetworkKind::Quality => {
                if self.embedding_dim.is_some() || self.num_classes.is_some() {
                    return Err(FqaError::Spec("quality network has no embedding or classifier".into()));
                }
            }
            NetworkKind::Recognizer => {
                let (Some(e), Some(k)) = (self.embedding_dim, self.num_classes) else {
                    return Err(FqaError::Spec("recognizer needs embedding_dim and num_classes".into()));
                };
                if e < 2 || k < 2 {
                    return Err(FqaError::Spec(format!(
                        "recognizer needs embedding_dim >= 2 and num_classes >= 2, got {e} and {k}"
                    )));
                }
            }
        }
        if !(self.bn_eps >= 0.0 && (0.0..1.0).contains(&self.bn_momentum)) {
            return Err(FqaError::Spec("batch norm eps must be >= 0 and momentum in [0, 1)".into()));
        }
        self.layers(self.input_size, self.input_size).map(|_| ())
    }

    /// Flattened layer list for an `h x w` input, with per-sample shapes.
    pub fn layers(&self, h: usize, w: usize) -> Result<Vec<LayerSpec>> {
        let mut out = Vec::new();
        let mut shape = vec![self.in_channels, h, w];
        let conv = |out: &mut Vec<LayerSpec>,
                    shape: &mut Vec<usize>,
                    name: String,
                    oc: usize,
                    k: usize,
                    s: usize,
                    p: usize,
                    groups: usize,
                    relu: bool|
         -> Result<()> {
            let ext = |v: usize| {
                let padded = v + 2 * p;
                (padded >= k).then(|| (padded - k) / s + 1)
            };
            let (Some(oh), Some(ow)) = (ext(shape[1]), ext(shape[2])) else {
                return Err(FqaError::Spec(format!("{name}: input {:?} too small for a {k}x{k} kernel", shape)));
            };
            let output = vec![oc, oh, ow];
            out.push(LayerSpec {
                name: format!("{name}.conv"),
                kind: LayerKind::Conv {
                    in_channels: shape[0],
                    out_channels: oc,
                    kernel: k,
                    stride: s,
                    padding: p,
                    groups,
                },
                input: shape.clone(),
                output: output.clone(),
            });
            out.push(LayerSpec {
                name: format!("{name}.bn"),
                kind: LayerKind::BatchNorm { channels: oc },
                input: output.clone(),
                output: output.clone(),
            });
            if relu {
                out.push(LayerSpec {
                    name: format!("{name}.relu"),
                    kind: LayerKind::Relu,
                    input: output.clone(),
                    output: output.clone(),
                });
            }
            *shape = output;
            Ok(())
        };
        let st = self.stem;
        conv(
            &mut out,
            &mut shape,
            "stem".into(),
            st.out_channels,
            st.kernel,
            st.stride,
            st.padding,
            1,
            true,
        )?;
        for (i, b) in self.blocks.iter().enumerate() {
            let name = format!("block{}", i + 1);
            let block_in = shape.clone();
            conv(&mut out, &mut shape, format!("{name}.1"), b.expand_channels, 1, 1, 0, 1, true)?;
            conv(
                &mut out,
                &mut shape,
                format!("{name}.2"),
                b.expand_channels,
                3,
                b.stride,
                1,
                b.expand_channels,
                true,
            )?;
            conv(
                &mut out,
                &mut shape,
                format!("{name}.3"),
                b.out_channels,
                1,
                1,
                0,
                1,
                self.relu_after_projection,
            )?;
            if b.residual {
                out.push(LayerSpec {
                    name: format!("{name}.add"),
                    kind: LayerKind::Add,
                    input: block_in,
                    output: shape.clone(),
                });
            }
        }
        if let Some(hc) = self.head_channels {
            conv(&mut out, &mut shape, "head".into(), hc, 1, 1, 0, 1, true)?;
        }
        let pooled = vec![shape[0]];
        out.push(LayerSpec {
            name: "avgpool".into(),
            kind: LayerKind::AvgPool,
            input: shape.clone(),
            output: pooled.clone(),
        });
        let c = shape[0];
        match self.kind {
            NetworkKind::Quality => {
                out.push(LayerSpec {
                    name: "fc".into(),
                    kind: LayerKind::Linear {
                        in_features: c,
                        out_features: 1,
                        bias: true,
                    },
                    input: pooled,
                    output: vec![1],
                });
                out.push(LayerSpec {
                    name: "sigmoid".into(),
                    kind: LayerKind::Sigmoid,
                    input: vec![1],
                    output: vec![1],
                });
            }
            NetworkKind::Recognizer => {
                let e = self.embedding_dim.unwrap_or(0);
                let k = self.num_classes.unwrap_or(0);
                out.push(LayerSpec {
                    name: "embedding".into(),
                    kind: LayerKind::Linear {
                        in_features: c,
                        out_features: e,
                        bias: true,
                    },
                    input: pooled,
                    output: vec![e],
                });
                out.push(LayerSpec {
                    name: "classifier".into(),
                    kind: LayerKind::Linear {
                        in_features: e,
                        out_features: k,
                        bias: false,
                    },
                    input: vec![e],
                    output: vec![k],
                });
            }
        }
        Ok(out)
    }

    /// Output shape of each stage (stem, every block, head conv, pooling and
    /// the final linear layers) for a square input of `size` pixels, as
    /// `[C, H, W]` or `[D]`.
    pub fn stage_shapes(&self, size: usize) -> Result<Vec<(String, Vec<usize>)>> {
        let layers = self.layers(size, size)?;
        let mut stages: Vec<(String, Vec<usize>)> = Vec::new();
        for l in &layers {
            let stage = l.name.split('.').next().unwrap_or(&l.name).to_string();
            if stage == "sigmoid" {
                continue;
            }
            match stages.last_mut() {
                Some((name, shape)) if *name == stage => *shape = l.output.clone(),
                _ => stages.push((stage, l.output.clone())),
            }
        }
        Ok(stages)
    }

    pub fn num_residual_blocks(&self) -> usize {
        self.blocks.iter().filter(|b| b.residual).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub input: Vec<usize>,
    pub output: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerKind {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        groups: usize,
    },
    BatchNorm {
        channels: usize,
    },
    Relu,
    Add,
    AvgPool,
    Linear {
        in_features: usize,
        out_features: usize,
        bias: bool,
    },
    Sigmoid,
}
