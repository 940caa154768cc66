use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{checkpoint, he_normal, seeded_rng, Element, Tensor};

use super::spec::{Layer, NetworkSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    /// Updated by the optimizer.
    Trainable,
    /// Batch-norm running statistics.
    Buffer,
}

/// Named learnable weights and batch-norm buffers of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams<T = f32> {
    entries: Vec<(String, ParamRole, Tensor<T>)>,
    index: HashMap<String, usize>,
}

impl<T: Element> NetworkParams<T> {
    fn empty() -> Self {
        Self {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn insert(&mut self, name: String, role: ParamRole, value: Tensor<T>) {
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push((name, role, value));
    }

    /// He-initialised weights for `spec`, seeded by `spec.config.seed`.
    pub fn init(spec: &NetworkSpec) -> Self {
        let mut rng = seeded_rng(spec.config.seed);
        let mut p = Self::empty();
        let mut conv = |p: &mut Self, name: &str, cin: usize, cout: usize, k: usize| {
            p.insert(
                format!("{name}.weight"),
                ParamRole::Trainable,
                he_normal(&[cout, cin, k, k, k], &mut rng),
            );
            p.insert(format!("{name}.bias"), ParamRole::Trainable, Tensor::zeros(&[cout]));
        };
        let bn = |p: &mut Self, name: &str, c: usize| {
            p.insert(format!("{name}.gamma"), ParamRole::Trainable, Tensor::full(&[c], T::one()));
            p.insert(format!("{name}.beta"), ParamRole::Trainable, Tensor::zeros(&[c]));
            p.insert(format!("{name}.running_mean"), ParamRole::Buffer, Tensor::zeros(&[c]));
            p.insert(
                format!("{name}.running_var"),
                ParamRole::Buffer,
                Tensor::full(&[c], T::one()),
            );
        };
        for layer in &spec.layers {
            match layer {
                Layer::Conv {
                    name,
                    in_channels,
                    out_channels,
                    kernel,
                } => conv(&mut p, name, *in_channels, *out_channels, *kernel),
                Layer::Dense(d) => {
                    for l in 0..d.layers {
                        let n = format!("{}.{l}", d.name);
                        bn(&mut p, &format!("{n}.bn"), d.layer_input_channels(l));
                        conv(&mut p, &format!("{n}.conv"), d.layer_input_channels(l), d.growth, 3);
                    }
                }
                Layer::ConvStack {
                    name,
                    in_channels,
                    out_channels,
                    convs,
                } => {
                    for i in 0..*convs {
                        let cin = if i == 0 { *in_channels } else { *out_channels };
                        bn(&mut p, &format!("{name}.{i}.bn"), cin);
                        conv(&mut p, &format!("{name}.{i}.conv"), cin, *out_channels, 3);
                    }
                }
                Layer::Transition(t) => {
                    bn(&mut p, &format!("{}.bn", t.name), t.in_channels);
                    conv(&mut p, &format!("{}.conv", t.name), t.in_channels, t.out_channels, 3);
                }
                Layer::Head { name, in_channels } => {
                    bn(&mut p, &format!("{name}.bn"), *in_channels);
                    conv(&mut p, &format!("{name}.conv"), *in_channels, 1, 1);
                    if spec.config.input_skip {
                        // start from the identity map
                        let w = p.get_mut(&format!("{name}.conv.weight")).expect("just inserted");
                        *w = Tensor::zeros(w.shape());
                    }
                }
                Layer::SaveSkip | Layer::ConcatSkip => {}
            }
        }
        p
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.index
            .get(name)
            .map(|&i| &self.entries[i].2)
            .ok_or_else(|| Error::Config(format!("missing parameter {name}")))
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("missing parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        let i = self.position(name)?;
        Ok(&mut self.entries[i].2)
    }

    pub fn by_index(&self, i: usize) -> &Tensor<T> {
        &self.entries[i].2
    }

    pub fn by_index_mut(&mut self, i: usize) -> &mut Tensor<T> {
        &mut self.entries[i].2
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Indices of optimizer-updated tensors, in declaration order.
    pub fn trainable_indices(&self) -> Vec<usize> {
        (0..self.entries.len())
            .filter(|&i| self.entries[i].1 == ParamRole::Trainable)
            .collect()
    }

    /// Mutable views of the trainable tensors, in [`Self::trainable_indices`] order.
    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.entries
            .iter_mut()
            .filter(|e| e.1 == ParamRole::Trainable)
            .map(|e| &mut e.2)
            .collect()
    }

    /// Number of scalar trainable parameters.
    pub fn count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.1 == ParamRole::Trainable)
            .map(|e| e.2.len())
            .sum()
    }

    pub fn cast<U: Element>(&self) -> NetworkParams<U> {
        NetworkParams {
            entries: self
                .entries
                .iter()
                .map(|(n, r, t)| (n.clone(), *r, t.cast()))
                .collect(),
            index: self.index.clone(),
        }
    }
}

impl NetworkParams<f32> {
    pub fn to_named(&self) -> Vec<(String, Tensor<f32>)> {
        self.entries
            .iter()
            .map(|(n, _, t)| (n.clone(), t.clone()))
            .collect()
    }

    /// Replaces every tensor with the checkpoint entry of the same name.
    ///
    /// The checkpoint must hold exactly this network's tensors and shapes.
    pub fn load_named(&mut self, named: Vec<(String, Tensor<f32>)>) -> Result<()> {
        if named.len() != self.entries.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} tensors, network needs {}",
                named.len(),
                self.entries.len()
            )));
        }
        for (name, t) in named {
            let slot = self.get_mut(&name)?;
            if slot.shape() != t.shape() {
                return Err(Error::Shape(format!(
                    "checkpoint tensor {name} is {:?}, network expects {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::save(&self.to_named(), path)
    }
}
