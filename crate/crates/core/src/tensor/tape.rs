//! Reverse-mode gradient tape.
//!
//! Nodes are appended in evaluation order and only ever reference earlier
//! nodes, so the tape is a DAG whose index order is a topological order.
//! [`Tape::backward`] walks it once in reverse.

use crate::error::{Error, Result};

use super::conv::{self, ConvGeom};
use super::ops::{self, BatchStats, LossRegion};
use super::{Element, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Conv3d {
        input: Var,
        weight: Var,
        bias: Var,
        geom: ConvGeom,
    },
    MaxPool {
        input: Var,
        argmax: Vec<usize>,
    },
    Upsample {
        input: Var,
        factor: usize,
    },
    BatchNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        inv_std: Vec<T>,
        batch_stats: bool,
    },
    Relu {
        input: Var,
    },
    Concat {
        inputs: Vec<Var>,
    },
    Mse {
        pred: Var,
        target: Var,
        selector: Vec<bool>,
        count: usize,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sum {
        input: Var,
    },
    WeightedSum {
        input: Var,
        weights: Tensor<T>,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Records operations and propagates gradients back to leaves.
///
/// Leaf gradients accumulate across [`backward`](Tape::backward) calls until
/// [`zero_grad`](Tape::zero_grad).
pub struct Tape<T: Element = f32> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Element> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Leaf whose gradient is tracked (a parameter).
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf without gradient tracking (data, targets).
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads[v.0].as_ref()
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    /// Same-padded 3D convolution. `weight` is `(out, in, k, k, k)`, `bias` is `(out)`.
    pub fn conv3d(&mut self, input: Var, weight: Var, bias: Var, stride: usize) -> Result<Var> {
        let x = self.value(input);
        let wt = self.value(weight);
        let geom = ConvGeom::new(x.dims5()?, wt.shape(), stride)?;
        let b = self.value(bias);
        if b.shape() != [geom.c_out] {
            return Err(Error::Shape(format!(
                "conv bias must be [{}], got {:?}",
                geom.c_out,
                b.shape()
            )));
        }
        let mut out = Tensor::zeros(&[geom.n, geom.c_out, geom.od, geom.oh, geom.ow]);
        conv::forward(&geom, x.data(), wt.data(), b.data(), out.data_mut());
        let needs = self.needs(input) || self.needs(weight) || self.needs(bias);
        Ok(self.push(
            out,
            Op::Conv3d {
                input,
                weight,
                bias,
                geom,
            },
            needs,
        ))
    }

    /// Max pooling with equal window and stride.
    pub fn maxpool3d(&mut self, input: Var, window: usize) -> Result<Var> {
        let (out, argmax) = ops::maxpool_forward(self.value(input), window)?;
        let needs = self.needs(input);
        Ok(self.push(out, Op::MaxPool { input, argmax }, needs))
    }

    /// Nearest-neighbour upsampling.
    pub fn upsample3d(&mut self, input: Var, factor: usize) -> Result<Var> {
        let out = ops::upsample_forward(self.value(input), factor)?;
        let needs = self.needs(input);
        Ok(self.push(out, Op::Upsample { input, factor }, needs))
    }

    /// Train-mode batch norm over `(N, D, H, W)` per channel.
    ///
    /// Returns the batch statistics so the caller can fold them into
    /// running estimates.
    pub fn batch_norm_train(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        eps: T,
    ) -> Result<(Var, BatchStats<T>)> {
        let stats = ops::channel_stats(self.value(input))?;
        let inv_std: Vec<T> = stats.var.iter().map(|&v| (v + eps).sqrt().recip()).collect();
        let v = self.normalize(input, gamma, beta, &stats.mean, inv_std, true)?;
        Ok((v, stats))
    }

    /// Eval-mode batch norm using fixed statistics.
    pub fn batch_norm_eval(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        mean: &Tensor<T>,
        var: &Tensor<T>,
        eps: T,
    ) -> Result<Var> {
        let inv_std = var.data().iter().map(|&v| (v + eps).sqrt().recip()).collect();
        self.normalize(input, gamma, beta, mean.data(), inv_std, false)
    }

    fn normalize(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        mean: &[T],
        inv_std: Vec<T>,
        batch_stats: bool,
    ) -> Result<Var> {
        let x = self.value(input);
        let [n, c, d, h, w] = x.dims5()?;
        let gm = self.value(gamma).data();
        let bt = self.value(beta).data();
        if gm.len() != c || bt.len() != c || mean.len() != c || inv_std.len() != c {
            return Err(Error::Shape(format!(
                "batch norm parameters must have {c} channels"
            )));
        }
        let vol = d * h * w;
        let mut xhat = vec![T::zero(); x.len()];
        let mut out = vec![T::zero(); x.len()];
        for b in 0..n {
            for ch in 0..c {
                let s = (b * c + ch) * vol;
                for i in s..s + vol {
                    let nv = (x.data()[i] - mean[ch]) * inv_std[ch];
                    xhat[i] = nv;
                    out[i] = gm[ch] * nv + bt[ch];
                }
            }
        }
        let out = Tensor::new(x.shape().to_vec(), out)?;
        let needs = self.needs(input) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(
            out,
            Op::BatchNorm {
                input,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            },
            needs,
        ))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let out = self.value(input).map(|v| if v > T::zero() { v } else { T::zero() });
        let needs = self.needs(input);
        self.push(out, Op::Relu { input }, needs)
    }

    /// Stacks 5D tensors along the channel axis.
    pub fn concat_channels(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::Shape("concat of zero tensors".into()))?;
        let [n, _, d, h, w] = self.value(*first).dims5()?;
        let mut channels = 0;
        for &v in inputs {
            let [vn, vc, vd, vh, vw] = self.value(v).dims5()?;
            if (vn, vd, vh, vw) != (n, d, h, w) {
                return Err(Error::Shape(format!(
                    "concat operands disagree: {:?} vs {:?}",
                    self.value(*first).shape(),
                    self.value(v).shape()
                )));
            }
            channels += vc;
        }
        let vol = d * h * w;
        let mut out = Vec::with_capacity(n * channels * vol);
        for b in 0..n {
            for &v in inputs {
                out.extend_from_slice(self.value(v).sample(b));
            }
        }
        let out = Tensor::new(vec![n, channels, d, h, w], out)?;
        let needs = inputs.iter().any(|&v| self.needs(v));
        Ok(self.push(
            out,
            Op::Concat {
                inputs: inputs.to_vec(),
            },
            needs,
        ))
    }

    /// Mean squared error over `region` of each sample's spatial volume.
    pub fn mse_loss(&mut self, pred: Var, target: Var, region: LossRegion) -> Result<Var> {
        let p = self.value(pred);
        let t = self.value(target);
        if p.shape() != t.shape() {
            return Err(Error::Shape(format!(
                "mse operands disagree: {:?} vs {:?}",
                p.shape(),
                t.shape()
            )));
        }
        let [n, c, d, h, w] = p.dims5()?;
        let selector = ops::region_selector([d, h, w], region)?;
        let vol = d * h * w;
        let mut sum = T::zero();
        let mut count = 0usize;
        for nc in 0..n * c {
            for (i, _) in selector.iter().enumerate().filter(|(_, &s)| s) {
                let e = p.data()[nc * vol + i] - t.data()[nc * vol + i];
                sum += e * e;
                count += 1;
            }
        }
        let loss = sum / T::from_usize(count).unwrap();
        let needs = self.needs(pred) || self.needs(target);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Mse {
                pred,
                target,
                selector,
                count,
            },
            needs,
        ))
    }

    /// Elementwise `a + b` of equal shapes.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::Shape(format!("add operands disagree: {:?} vs {:?}", x.shape(), y.shape())));
        }
        let mut out = x.clone();
        out.add_assign(y);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add { a, b }, needs))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let s = self.value(input).sum();
        let needs = self.needs(input);
        self.push(Tensor::scalar(s), Op::Sum { input }, needs)
    }

    /// `Σ input ⊙ weights` for a constant `weights` of the same shape.
    pub fn weighted_sum(&mut self, input: Var, weights: Tensor<T>) -> Result<Var> {
        let x = self.value(input);
        if x.shape() != weights.shape() {
            return Err(Error::Shape(format!(
                "weighted sum shapes disagree: {:?} vs {:?}",
                x.shape(),
                weights.shape()
            )));
        }
        let s = x
            .data()
            .iter()
            .zip(weights.data())
            .map(|(&a, &b)| a * b)
            .sum();
        let needs = self.needs(input);
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum { input, weights }, needs))
    }

    /// Back-propagates from a scalar root, adding into leaf gradients.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).len() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar root, got shape {:?}",
                self.value(root).shape()
            )));
        }
        let mut local: Vec<Option<Tensor<T>>> = (0..=root.0).map(|_| None).collect();
        local[root.0] = Some(Tensor::full(self.value(root).shape(), T::one()));

        for i in (0..=root.0).rev() {
            let Some(g) = local[i].take() else {
                continue;
            };
            if !self.nodes[i].needs_grad {
                continue;
            }
            self.propagate(i, &g, &mut local);
            if matches!(self.nodes[i].op, Op::Leaf) {
                match &mut self.grads[i] {
                    Some(acc) => acc.add_assign(&g),
                    slot => *slot = Some(g),
                }
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Tensor<T>, local: &mut [Option<Tensor<T>>]) {
        let mut send = |v: Var, grad: Tensor<T>| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut local[v.0] {
                Some(acc) => acc.add_assign(&grad),
                slot => *slot = Some(grad),
            }
        };
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Conv3d {
                input,
                weight,
                bias,
                geom,
            } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                let mut gx = self.needs(*input).then(|| Tensor::zeros(x.shape()));
                let mut gw = self.needs(*weight).then(|| Tensor::zeros(w.shape()));
                let mut gb = self
                    .needs(*bias)
                    .then(|| Tensor::zeros(self.value(*bias).shape()));
                conv::backward(
                    geom,
                    x.data(),
                    w.data(),
                    g.data(),
                    gx.as_mut().map(|t| t.data_mut()),
                    gw.as_mut().map(|t| t.data_mut()),
                    gb.as_mut().map(|t| t.data_mut()),
                );
                if let Some(gx) = gx {
                    send(*input, gx);
                }
                if let Some(gw) = gw {
                    send(*weight, gw);
                }
                if let Some(gb) = gb {
                    send(*bias, gb);
                }
            }
            Op::MaxPool { input, argmax } => {
                let mut gx = Tensor::zeros(self.value(*input).shape());
                let d = gx.data_mut();
                for (&src, &gv) in argmax.iter().zip(g.data()) {
                    d[src] += gv;
                }
                send(*input, gx);
            }
            Op::Upsample { input, factor } => {
                let gx = ops::upsample_backward(g, self.value(*input).shape(), *factor);
                send(*input, gx);
            }
            Op::BatchNorm {
                input,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let shape = self.value(*input).shape().to_vec();
                let (n, c) = (shape[0], shape[1]);
                let vol: usize = shape[2..].iter().product();
                let gm = self.value(*gamma).data();
                let gy = g.data();
                let mut dgamma = vec![T::zero(); c];
                let mut dbeta = vec![T::zero(); c];
                for b in 0..n {
                    for ch in 0..c {
                        let s = (b * c + ch) * vol;
                        for j in s..s + vol {
                            dgamma[ch] += gy[j] * xhat[j];
                            dbeta[ch] += gy[j];
                        }
                    }
                }
                if self.needs(*input) {
                    let m = T::from_usize(n * vol).unwrap();
                    let mut gx = vec![T::zero(); gy.len()];
                    for b in 0..n {
                        for ch in 0..c {
                            let s = (b * c + ch) * vol;
                            let scale = gm[ch] * inv_std[ch];
                            for j in s..s + vol {
                                gx[j] = if *batch_stats {
                                    scale * (gy[j] - dbeta[ch] / m - xhat[j] * dgamma[ch] / m)
                                } else {
                                    scale * gy[j]
                                };
                            }
                        }
                    }
                    send(*input, Tensor::new(shape, gx).unwrap());
                }
                send(*gamma, Tensor::new(vec![c], dgamma).unwrap());
                send(*beta, Tensor::new(vec![c], dbeta).unwrap());
            }
            Op::Relu { input } => {
                let x = self.value(*input);
                let gx = Tensor::new(
                    x.shape().to_vec(),
                    x.data()
                        .iter()
                        .zip(g.data())
                        .map(|(&v, &gv)| if v > T::zero() { gv } else { T::zero() })
                        .collect(),
                )
                .unwrap();
                send(*input, gx);
            }
            Op::Concat { inputs } => {
                let n = node.value.shape()[0];
                let mut offset = 0;
                let per_out = node.value.len() / n;
                for &v in inputs {
                    let shape = self.value(v).shape().to_vec();
                    let per = self.value(v).len() / n;
                    if self.needs(v) {
                        let mut gx = Vec::with_capacity(per * n);
                        for b in 0..n {
                            let s = b * per_out + offset;
                            gx.extend_from_slice(&g.data()[s..s + per]);
                        }
                        send(v, Tensor::new(shape, gx).unwrap());
                    }
                    offset += per;
                }
            }
            Op::Mse {
                pred,
                target,
                selector,
                count,
            } => {
                let p = self.value(*pred);
                let t = self.value(*target);
                let vol = selector.len();
                let scale = g.item() * T::from_f64_lossy(2.0) / T::from_usize(*count).unwrap();
                let gp = Tensor::new(
                    p.shape().to_vec(),
                    p.data()
                        .iter()
                        .zip(t.data())
                        .enumerate()
                        .map(|(j, (&a, &b))| {
                            if selector[j % vol] {
                                scale * (a - b)
                            } else {
                                T::zero()
                            }
                        })
                        .collect(),
                )
                .unwrap();
                if self.needs(*target) {
                    send(*target, gp.map(|v| -v));
                }
                send(*pred, gp);
            }
            Op::Add { a, b } => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::Sum { input } => {
                let shape = self.value(*input).shape();
                send(*input, Tensor::full(shape, g.item()));
            }
            Op::WeightedSum { input, weights } => {
                let s = g.item();
                send(*input, weights.map(|w| w * s));
            }
        }
    }
}
