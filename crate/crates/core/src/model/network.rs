use super::spec::{NetworkKind, NetworkSpec};
use crate::{FqaError, Result};
use fqa_tensor::{BatchStats, BnMode, BufferId, Conv2dConfig, ParamId, ParamStore, Real, RunningStats, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Convolution (no bias) followed by batch norm and an optional ReLU.
#[derive(Clone, Debug)]
pub struct ConvBn {
    weight: ParamId,
    gamma: ParamId,
    beta: ParamId,
    running_mean: BufferId,
    running_var: BufferId,
    cfg: Conv2dConfig,
    relu: bool,
}

#[derive(Clone, Debug)]
struct Block {
    convs: [ConvBn; 3],
    residual: bool,
}

#[derive(Clone, Debug)]
enum Head {
    Quality {
        weight: ParamId,
        bias: ParamId,
    },
    Recognizer {
        emb_weight: ParamId,
        emb_bias: ParamId,
        classifier: ParamId,
    },
}

/// Batch statistics to fold into a layer's running buffers after a
/// train-mode forward pass.
#[derive(Clone, Debug)]
pub struct BnUpdate<T> {
    mean: BufferId,
    var: BufferId,
    stats: BatchStats<T>,
}

pub struct ForwardOutput<T> {
    /// Sigmoid score `[N, 1]` for quality networks, logits `[N, K]` for
    /// recognizers.
    pub output: Var,
    /// Recognizer feature `[N, D]` (pre-classifier).
    pub embedding: Option<Var>,
    /// Output of every stage, in order.
    pub stages: Vec<(String, Var)>,
    pub bn_updates: Vec<BnUpdate<T>>,
}

/// A network built from a [`NetworkSpec`], owning its parameters.
#[derive(Clone, Debug)]
pub struct Network<T> {
    spec: NetworkSpec,
    store: ParamStore<T>,
    stem: ConvBn,
    blocks: Vec<Block>,
    head_conv: Option<ConvBn>,
    head: Head,
}

struct Builder<'a, T> {
    store: ParamStore<T>,
    rng: &'a mut ChaCha8Rng,
}

impl<T: Real> Builder<'_, T> {
    fn normal(&mut self, shape: &[usize], std: f64) -> Tensor<T> {
        let dist = Normal::new(0.0, std).expect("finite std");
        Tensor::from_fn(shape, |_| T::from_f64_lossy(dist.sample(self.rng)))
    }

    fn conv_bn(&mut self, prefix: &str, idx: &str, in_c: usize, out_c: usize, k: usize, cfg: Conv2dConfig, relu: bool) -> Result<ConvBn> {
        let icg = in_c / cfg.groups;
        let fan_in = (icg * k * k) as f64;
        let w = self.normal(&[out_c, icg, k, k], (2.0 / fan_in).sqrt());
        let weight = self.store.add_param(format!("{prefix}.conv{idx}.weight"), w)?;
        let gamma = self
            .store
            .add_param(format!("{prefix}.bn{idx}.gamma"), Tensor::full(&[out_c], T::one()))?;
        let beta = self.store.add_param(format!("{prefix}.bn{idx}.beta"), Tensor::zeros(&[out_c]))?;
        let running_mean = self
            .store
            .add_buffer(format!("{prefix}.bn{idx}.running_mean"), Tensor::zeros(&[out_c]))?;
        let running_var = self
            .store
            .add_buffer(format!("{prefix}.bn{idx}.running_var"), Tensor::full(&[out_c], T::one()))?;
        Ok(ConvBn {
            weight,
            gamma,
            beta,
            running_mean,
            running_var,
            cfg,
            relu,
        })
    }

    fn linear(&mut self, name: &str, in_f: usize, out_f: usize, bias: bool) -> Result<(ParamId, Option<ParamId>)> {
        let w = self.normal(&[out_f, in_f], (1.0 / in_f as f64).sqrt());
        let wid = self.store.add_param(format!("{name}.weight"), w)?;
        let bid = if bias {
            Some(self.store.add_param(format!("{name}.bias"), Tensor::zeros(&[out_f]))?)
        } else {
            None
        };
        Ok((wid, bid))
    }
}

impl<T: Real> Network<T> {
    /// Builds the network with Kaiming fan-in initialization from `seed`.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Builder {
            store: ParamStore::new(),
            rng: &mut rng,
        };
        let st = spec.stem;
        let stem = b.conv_bn(
            "stem",
            "",
            spec.in_channels,
            st.out_channels,
            st.kernel,
            Conv2dConfig::new(st.stride, st.padding, 1),
            true,
        )?;
        let mut blocks = Vec::with_capacity(spec.blocks.len());
        for (i, bs) in spec.blocks.iter().enumerate() {
            let p = format!("block{}", i + 1);
            let e = bs.expand_channels;
            blocks.push(Block {
                convs: [
                    b.conv_bn(&p, "1", bs.in_channels, e, 1, Conv2dConfig::default(), true)?,
                    b.conv_bn(&p, "2", e, e, 3, Conv2dConfig::new(bs.stride, 1, e), true)?,
                    b.conv_bn(&p, "3", e, bs.out_channels, 1, Conv2dConfig::default(), spec.relu_after_projection)?,
                ],
                residual: bs.residual,
            });
        }
        let mut c = spec.blocks.last().map_or(st.out_channels, |bl| bl.out_channels);
        let head_conv = match spec.head_channels {
            Some(hc) => {
                let h = b.conv_bn("head", "", c, hc, 1, Conv2dConfig::default(), true)?;
                c = hc;
                Some(h)
            }
            None => None,
        };
        let head = match spec.kind {
            NetworkKind::Quality => {
                let (weight, bias) = b.linear("fc", c, 1, true)?;
                Head::Quality {
                    weight,
                    bias: bias.unwrap(),
                }
            }
            NetworkKind::Recognizer => {
                let e = spec.embedding_dim.unwrap();
                let (emb_weight, emb_bias) = b.linear("embedding", c, e, true)?;
                let (classifier, _) = b.linear("classifier", e, spec.num_classes.unwrap(), false)?;
                Head::Recognizer {
                    emb_weight,
                    emb_bias: emb_bias.unwrap(),
                    classifier,
                }
            }
        };
        Ok(Network {
            spec,
            store: b.store,
            stem,
            blocks,
            head_conv,
            head,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    pub fn kind(&self) -> NetworkKind {
        self.spec.kind
    }

    /// Classifier weight `[num_classes, embedding_dim]`; row `y` is the
    /// center of class `y`.
    pub fn classifier_weight(&self) -> Option<&Tensor<T>> {
        match self.head {
            Head::Recognizer { classifier, .. } => Some(&self.store.param(classifier).value),
            Head::Quality { .. } => None,
        }
    }

    fn conv_bn(&self, tape: &mut Tape<T>, x: Var, layer: &ConvBn, mode: BnMode, updates: &mut Vec<BnUpdate<T>>) -> Result<Var> {
        let w = tape.param(&self.store, layer.weight);
        let y = tape.conv2d(x, w, layer.cfg)?;
        let g = tape.param(&self.store, layer.gamma);
        let b = tape.param(&self.store, layer.beta);
        let running = RunningStats {
            mean: self.store.buffer(layer.running_mean).data().to_vec(),
            var: self.store.buffer(layer.running_var).data().to_vec(),
        };
        let eps = T::from_f64_lossy(self.spec.bn_eps);
        let (y, stats) = tape.batchnorm(y, g, b, &running, mode, eps)?;
        if let Some(stats) = stats {
            updates.push(BnUpdate {
                mean: layer.running_mean,
                var: layer.running_var,
                stats,
            });
        }
        Ok(if layer.relu { tape.relu(y) } else { y })
    }

    /// Records a forward pass of an `[N, C, H, W]` batch on `tape`.
    pub fn forward(&self, tape: &mut Tape<T>, input: Tensor<T>, mode: BnMode) -> Result<ForwardOutput<T>> {
        let (_, c, _, _) = input.dims4("network")?;
        if c != self.spec.in_channels {
            return Err(FqaError::invalid(format!(
                "network expects {} input channels, got input shape {:?}",
                self.spec.in_channels,
                input.shape()
            )));
        }
        let mut updates = Vec::new();
        let mut stages = Vec::new();
        let x = tape.constant(input);
        let mut x = self.conv_bn(tape, x, &self.stem, mode, &mut updates)?;
        stages.push(("stem".to_string(), x));
        for (i, block) in self.blocks.iter().enumerate() {
            let input = x;
            for layer in &block.convs {
                x = self.conv_bn(tape, x, layer, mode, &mut updates)?;
            }
            if block.residual {
                x = tape.add(x, input)?;
            }
            stages.push((format!("block{}", i + 1), x));
        }
        if let Some(head) = &self.head_conv {
            x = self.conv_bn(tape, x, head, mode, &mut updates)?;
            stages.push(("head".to_string(), x));
        }
        let pooled = tape.global_avgpool(x)?;
        stages.push(("avgpool".to_string(), pooled));
        let (output, embedding) = match self.head {
            Head::Quality { weight, bias } => {
                let w = tape.param(&self.store, weight);
                let b = tape.param(&self.store, bias);
                let z = tape.linear(pooled, w, Some(b))?;
                stages.push(("fc".to_string(), z));
                (tape.sigmoid(z), None)
            }
            Head::Recognizer {
                emb_weight,
                emb_bias,
                classifier,
            } => {
                let w = tape.param(&self.store, emb_weight);
                let b = tape.param(&self.store, emb_bias);
                let f = tape.linear(pooled, w, Some(b))?;
                stages.push(("embedding".to_string(), f));
                let cw = tape.param(&self.store, classifier);
                let logits = tape.linear(f, cw, None)?;
                stages.push(("classifier".to_string(), logits));
                (logits, Some(f))
            }
        };
        Ok(ForwardOutput {
            output,
            embedding,
            stages,
            bn_updates: updates,
        })
    }

    /// Folds train-mode batch statistics into the running buffers.
    pub fn apply_bn_updates(&mut self, updates: Vec<BnUpdate<T>>) {
        let momentum = T::from_f64_lossy(self.spec.bn_momentum);
        for u in updates {
            let mut rs = RunningStats {
                mean: self.store.buffer(u.mean).data().to_vec(),
                var: self.store.buffer(u.var).data().to_vec(),
            };
            rs.update(&u.stats, momentum);
            self.store.buffer_mut(u.mean).data_mut().copy_from_slice(&rs.mean);
            self.store.buffer_mut(u.var).data_mut().copy_from_slice(&rs.var);
        }
    }

    /// Inference-mode quality scores, one per sample.
    pub fn predict_quality(&self, input: Tensor<T>) -> Result<Vec<T>> {
        if self.kind() != NetworkKind::Quality {
            return Err(FqaError::invalid("predict_quality needs a quality network"));
        }
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, input, BnMode::Infer)?;
        Ok(tape.value(out.output).data().to_vec())
    }

    /// Inference-mode `(embeddings [N, D], logits [N, K])`.
    pub fn embed(&self, input: Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, input, BnMode::Infer)?;
        let emb = out.embedding.ok_or_else(|| FqaError::invalid("embed needs a recognizer network"))?;
        Ok((tape.value(emb).clone(), tape.value(out.output).clone()))
    }

    /// Same structure with parameters converted to another precision.
    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            store: self.store.cast(),
            stem: self.stem.clone(),
            blocks: self.blocks.clone(),
            head_conv: self.head_conv.clone(),
            head: self.head.clone(),
        }
    }
}
