use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::layers::{self, BatchNormCache};
use super::{NnError, Real, Tensor};

/// Index of a node in a [`Network`], in insertion order.
pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv2D,
    Conv1x1,
    MaxPool2x2,
    Upsample2x2,
    BatchNorm,
    ReLU,
    ConcatSkip,
}

#[derive(Debug, Clone)]
enum Op<T> {
    Conv {
        weight: Tensor<T>,
        bias: Tensor<T>,
    },
    BatchNorm {
        gamma: Tensor<T>,
        beta: Tensor<T>,
        mean: Tensor<T>,
        var: Tensor<T>,
    },
    Relu,
    MaxPool,
    Upsample,
    /// Concatenates the running activation with the output of `skip`.
    Concat {
        skip: NodeId,
    },
}

#[derive(Debug, Clone)]
struct Node<T> {
    name: String,
    op: Op<T>,
    channels: usize,
}

/// A chain of layers where concat nodes may reach back to earlier outputs.
#[derive(Debug, Clone)]
pub struct Network<T> {
    input_channels: usize,
    nodes: Vec<Node<T>>,
}

/// Everything a training forward pass keeps for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    input: Tensor<T>,
    outputs: Vec<Tensor<T>>,
    bn: Vec<Option<BatchNormCache<T>>>,
    pool: Vec<Vec<u8>>,
}

impl<T: Real> Tape<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.outputs.last().unwrap_or(&self.input)
    }
}

impl<T: Real> Network<T> {
    pub fn new(input_channels: usize) -> Self {
        Self {
            input_channels,
            nodes: Vec::new(),
        }
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn output_channels(&self) -> usize {
        self.nodes
            .last()
            .map_or(self.input_channels, |n| n.channels)
    }

    /// Id the next pushed node will get; the most recent node is `len() - 1`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, name: &str, op: Op<T>, channels: usize) -> NodeId {
        self.nodes.push(Node {
            name: name.to_string(),
            op,
            channels,
        });
        self.nodes.len() - 1
    }

    /// Square `same` convolution with He-uniform weights and zero bias.
    pub fn conv<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        filters: usize,
        kernel: usize,
        rng: &mut R,
    ) -> NodeId {
        let cin = self.output_channels();
        let fan_in = (kernel * kernel * cin) as f64;
        let limit = libm::sqrt(6.0 / fan_in);
        let weight = (0..kernel * kernel * cin * filters)
            .map(|_| T::from_f64(rng.random_range(-limit..limit)))
            .collect();
        let op = Op::Conv {
            weight: Tensor::from_vec(&[kernel, kernel, cin, filters], weight)
                .expect("non-zero conv dims"),
            bias: Tensor::zeros(&[filters]),
        };
        self.push(name, op, filters)
    }

    pub fn batch_norm(&mut self, name: &str) -> NodeId {
        let c = self.output_channels();
        let op = Op::BatchNorm {
            gamma: Tensor::filled(&[c], T::one()),
            beta: Tensor::zeros(&[c]),
            mean: Tensor::zeros(&[c]),
            var: Tensor::filled(&[c], T::one()),
        };
        self.push(name, op, c)
    }

    pub fn relu(&mut self, name: &str) -> NodeId {
        let c = self.output_channels();
        self.push(name, Op::Relu, c)
    }

    pub fn max_pool(&mut self, name: &str) -> NodeId {
        let c = self.output_channels();
        self.push(name, Op::MaxPool, c)
    }

    pub fn upsample(&mut self, name: &str) -> NodeId {
        let c = self.output_channels();
        self.push(name, Op::Upsample, c)
    }

    /// Concatenate the current activation with the output of `skip` along channels.
    pub fn concat(&mut self, name: &str, skip: NodeId) -> NodeId {
        assert!(skip < self.nodes.len(), "concat source must already exist");
        let c = self.output_channels() + self.nodes[skip].channels;
        self.push(name, Op::Concat { skip }, c)
    }

    pub fn kind(&self, id: NodeId) -> LayerKind {
        match &self.nodes[id].op {
            Op::Conv { weight, .. } if weight.shape()[0] == 1 => LayerKind::Conv1x1,
            Op::Conv { .. } => LayerKind::Conv2D,
            Op::BatchNorm { .. } => LayerKind::BatchNorm,
            Op::Relu => LayerKind::ReLU,
            Op::MaxPool => LayerKind::MaxPool2x2,
            Op::Upsample => LayerKind::Upsample2x2,
            Op::Concat { .. } => LayerKind::ConcatSkip,
        }
    }

    pub fn kinds(&self) -> Vec<LayerKind> {
        (0..self.nodes.len()).map(|i| self.kind(i)).collect()
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id].name
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Output channel count of node `id`.
    pub fn channels(&self, id: NodeId) -> usize {
        self.nodes[id].channels
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(), NnError> {
        let (n, _, _, c) = x.dims4("network")?;
        if n == 0 {
            return Err(NnError::EmptyBatch);
        }
        if c != self.input_channels {
            return Err(NnError::Shape {
                op: "network",
                detail: format!(
                    "input has {c} channels, network expects {}",
                    self.input_channels
                ),
            });
        }
        Ok(())
    }

    fn skip_targets(&self) -> Vec<bool> {
        let mut keep = vec![false; self.nodes.len()];
        for node in &self.nodes {
            if let Op::Concat { skip } = node.op {
                keep[skip] = true;
            }
        }
        keep
    }

    /// Inference-mode forward pass: batch norm uses running statistics.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.forward_with(x, |_, _, _| {})
    }

    /// Inference forward pass that hands every node output to `hook` before
    /// it flows on. The hook may inspect or overwrite the activation.
    pub fn forward_with(
        &self,
        x: &Tensor<T>,
        mut hook: impl FnMut(NodeId, &str, &mut Tensor<T>),
    ) -> Result<Tensor<T>, NnError> {
        self.check_input(x)?;
        let keep = self.skip_targets();
        let mut kept: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        let mut cur = x.clone();
        for (i, node) in self.nodes.iter().enumerate() {
            let mut out = match &node.op {
                Op::Conv { weight, bias } => layers::conv2d_forward(&cur, weight, bias)?,
                Op::BatchNorm {
                    gamma,
                    beta,
                    mean,
                    var,
                } => layers::batchnorm_forward_infer(&cur, gamma, beta, mean, var)?,
                Op::Relu => layers::relu_forward(&cur).0,
                Op::MaxPool => layers::maxpool2x2_forward(&cur)?.0,
                Op::Upsample => layers::upsample2x2_forward(&cur)?,
                Op::Concat { skip } => {
                    let s = kept[*skip].as_ref().expect("skip source computed earlier");
                    layers::concat_channels(&cur, s)?
                }
            };
            hook(i, &node.name, &mut out);
            if keep[i] {
                kept[i] = Some(out.clone());
            }
            cur = out;
        }
        Ok(cur)
    }

    /// Training-mode forward pass: batch norm normalizes with this batch's
    /// statistics. Running statistics are left untouched; see
    /// [`Network::update_running_stats`].
    pub fn forward_train(&self, x: &Tensor<T>) -> Result<Tape<T>, NnError> {
        self.check_input(x)?;
        let n = self.nodes.len();
        let mut outputs: Vec<Tensor<T>> = Vec::with_capacity(n);
        let mut bn = Vec::with_capacity(n);
        let mut pool = Vec::with_capacity(n);
        for (i, node) in self.nodes.iter().enumerate() {
            let cur = if i == 0 { x } else { &outputs[i - 1] };
            let (out, cache, mask) = match &node.op {
                Op::Conv { weight, bias } => {
                    (layers::conv2d_forward(cur, weight, bias)?, None, Vec::new())
                }
                Op::BatchNorm { gamma, beta, .. } => {
                    let (y, c) = layers::batchnorm_forward_train(cur, gamma, beta)?;
                    (y, Some(c), Vec::new())
                }
                Op::Relu => (layers::relu_forward(cur).0, None, Vec::new()),
                Op::MaxPool => {
                    let (y, m) = layers::maxpool2x2_forward(cur)?;
                    (y, None, m)
                }
                Op::Upsample => (layers::upsample2x2_forward(cur)?, None, Vec::new()),
                Op::Concat { skip } => (
                    layers::concat_channels(cur, &outputs[*skip])?,
                    None,
                    Vec::new(),
                ),
            };
            outputs.push(out);
            bn.push(cache);
            pool.push(mask);
        }
        Ok(Tape {
            input: x.clone(),
            outputs,
            bn,
            pool,
        })
    }

    /// Fold the batch statistics recorded in `tape` into the running averages.
    pub fn update_running_stats(&mut self, tape: &Tape<T>) {
        for (node, cache) in self.nodes.iter_mut().zip(&tape.bn) {
            if let (Op::BatchNorm { mean, var, .. }, Some(c)) = (&mut node.op, cache) {
                layers::batchnorm_update_running(mean, var, c);
            }
        }
    }

    /// Gradients of a scalar loss with respect to every trainable parameter
    /// (in [`Network::params`] order) and to the input, given the gradient
    /// at the network output.
    pub fn backward(
        &self,
        tape: &Tape<T>,
        grad_out: &Tensor<T>,
    ) -> Result<(Vec<Tensor<T>>, Tensor<T>), NnError> {
        if grad_out.shape() != tape.output().shape() {
            return Err(NnError::Shape {
                op: "network_backward",
                detail: format!(
                    "grad {:?} vs output {:?}",
                    grad_out.shape(),
                    tape.output().shape()
                ),
            });
        }
        let n = self.nodes.len();
        let mut pending: Vec<Option<Tensor<T>>> = vec![None; n];
        let mut reversed = Vec::new();
        let mut grad = grad_out.clone();
        for i in (0..n).rev() {
            if let Some(extra) = pending[i].take() {
                grad.add_assign(&extra);
            }
            let input = if i == 0 {
                &tape.input
            } else {
                &tape.outputs[i - 1]
            };
            grad = match &self.nodes[i].op {
                Op::Conv { weight, .. } => {
                    let g = layers::conv2d_backward(input, weight, &grad)?;
                    reversed.push(g.bias);
                    reversed.push(g.weight);
                    g.input
                }
                Op::BatchNorm { gamma, .. } => {
                    let cache = tape.bn[i].as_ref().ok_or_else(|| NnError::Shape {
                        op: "network_backward",
                        detail: "tape is missing batch-norm statistics".to_string(),
                    })?;
                    let g = layers::batchnorm_backward(cache, gamma, &grad)?;
                    reversed.push(g.beta);
                    reversed.push(g.gamma);
                    g.input
                }
                Op::Relu => {
                    let mask: Vec<bool> = tape.outputs[i]
                        .data()
                        .iter()
                        .map(|&v| v > T::zero())
                        .collect();
                    layers::relu_backward(&mask, &grad)?
                }
                Op::MaxPool => layers::maxpool2x2_backward(&tape.pool[i], &grad)?,
                Op::Upsample => layers::upsample2x2_backward(&grad)?,
                Op::Concat { skip } => {
                    let ca = if i == 0 {
                        self.input_channels
                    } else {
                        self.nodes[i - 1].channels
                    };
                    let (ga, gb) = layers::split_channels(&grad, ca)?;
                    match &mut pending[*skip] {
                        Some(p) => p.add_assign(&gb),
                        slot => *slot = Some(gb),
                    }
                    ga
                }
            };
        }
        reversed.reverse();
        Ok((reversed, grad))
    }

    /// ReLU signs and pooling winners recorded in `tape`, flattened. Equal
    /// patterns at two points mean the network is a single smooth piece
    /// between them.
    pub fn activation_pattern(&self, tape: &Tape<T>) -> Vec<u8> {
        let mut sig = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            match node.op {
                Op::Relu => sig.extend(
                    tape.outputs[i]
                        .data()
                        .iter()
                        .map(|&v| u8::from(v > T::zero())),
                ),
                Op::MaxPool => sig.extend_from_slice(&tape.pool[i]),
                _ => {}
            }
        }
        sig
    }

    /// Trainable tensors: per conv `kernel, bias`, per batch norm `gamma, beta`.
    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Conv { weight, bias } => out.extend([weight, bias]),
                Op::BatchNorm { gamma, beta, .. } => out.extend([gamma, beta]),
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for node in &mut self.nodes {
            match &mut node.op {
                Op::Conv { weight, bias } => out.extend([weight, bias]),
                Op::BatchNorm { gamma, beta, .. } => out.extend([gamma, beta]),
                _ => {}
            }
        }
        out
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Conv { .. } => {
                    out.push(format!("{}.kernel", node.name));
                    out.push(format!("{}.bias", node.name));
                }
                Op::BatchNorm { .. } => {
                    out.push(format!("{}.gamma", node.name));
                    out.push(format!("{}.beta", node.name));
                }
                _ => {}
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Every persistent tensor, trainable parameters and running statistics alike.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Conv { weight, bias } => {
                    out.push((format!("{}.kernel", node.name), weight));
                    out.push((format!("{}.bias", node.name), bias));
                }
                Op::BatchNorm {
                    gamma,
                    beta,
                    mean,
                    var,
                } => {
                    out.push((format!("{}.gamma", node.name), gamma));
                    out.push((format!("{}.beta", node.name), beta));
                    out.push((format!("{}.moving_mean", node.name), mean));
                    out.push((format!("{}.moving_variance", node.name), var));
                }
                _ => {}
            }
        }
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for node in &mut self.nodes {
            let name = &node.name;
            match &mut node.op {
                Op::Conv { weight, bias } => {
                    out.push((format!("{name}.kernel"), weight));
                    out.push((format!("{name}.bias"), bias));
                }
                Op::BatchNorm {
                    gamma,
                    beta,
                    mean,
                    var,
                } => {
                    out.push((format!("{name}.gamma"), gamma));
                    out.push((format!("{name}.beta"), beta));
                    out.push((format!("{name}.moving_mean"), mean));
                    out.push((format!("{name}.moving_variance"), var));
                }
                _ => {}
            }
        }
        out
    }

    /// Same graph with every tensor converted to another element type.
    pub fn cast<U: Real>(&self) -> Network<U> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node {
                name: n.name.clone(),
                channels: n.channels,
                op: match &n.op {
                    Op::Conv { weight, bias } => Op::Conv {
                        weight: weight.cast(),
                        bias: bias.cast(),
                    },
                    Op::BatchNorm {
                        gamma,
                        beta,
                        mean,
                        var,
                    } => Op::BatchNorm {
                        gamma: gamma.cast(),
                        beta: beta.cast(),
                        mean: mean.cast(),
                        var: var.cast(),
                    },
                    Op::Relu => Op::Relu,
                    Op::MaxPool => Op::MaxPool,
                    Op::Upsample => Op::Upsample,
                    Op::Concat { skip } => Op::Concat { skip: *skip },
                },
            })
            .collect();
        Network {
            input_channels: self.input_channels,
            nodes,
        }
    }
}
