use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::gradcheck::{relative_error, GradCheck};
use crate::tensor::{checkpoint, BatchStats, Element, LossRegion, RunningStats, Tape, Tensor, Var};

use super::params::NetworkParams;
use super::spec::{Layer, NetworkConfig, NetworkSpec, Resample};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running estimates are reported for update.
    Train,
    /// Running statistics; deterministic.
    Eval,
}

/// Result of recording one forward pass on a tape.
pub struct ForwardPass<T: Element> {
    pub output: Var,
    /// `(parameter index, tape leaf)` of every trainable tensor used.
    pub bindings: Vec<(usize, Var)>,
    /// Train-mode batch statistics keyed by the batch-norm layer prefix.
    pub batch_stats: Vec<(String, BatchStats<T>)>,
}

struct Ctx<'a, T: Element> {
    tape: &'a mut Tape<T>,
    params: &'a NetworkParams<T>,
    mode: Mode,
    bindings: Vec<(usize, Var)>,
    stats: Vec<(String, BatchStats<T>)>,
}

impl<T: Element> Ctx<'_, T> {
    fn bind(&mut self, name: &str) -> Result<Var> {
        let i = self.params.position(name)?;
        let v = self.tape.param(self.params.by_index(i).clone());
        self.bindings.push((i, v));
        Ok(v)
    }

    fn conv(&mut self, prefix: &str, x: Var) -> Result<Var> {
        let w = self.bind(&format!("{prefix}.weight"))?;
        let b = self.bind(&format!("{prefix}.bias"))?;
        self.tape.conv3d(x, w, b, 1)
    }

    fn bn_relu(&mut self, prefix: &str, x: Var) -> Result<Var> {
        let gamma = self.bind(&format!("{prefix}.gamma"))?;
        let beta = self.bind(&format!("{prefix}.beta"))?;
        let eps = T::from_f64_lossy(BN_EPS);
        let y = match self.mode {
            Mode::Train => {
                let (y, stats) = self.tape.batch_norm_train(x, gamma, beta, eps)?;
                self.stats.push((prefix.to_string(), stats));
                y
            }
            Mode::Eval => {
                let mean = self.params.get(&format!("{prefix}.running_mean"))?;
                let var = self.params.get(&format!("{prefix}.running_var"))?;
                self.tape.batch_norm_eval(x, gamma, beta, mean, var, eps)?
            }
        };
        Ok(self.tape.relu(y))
    }

    fn unit(&mut self, prefix: &str, x: Var) -> Result<Var> {
        let a = self.bn_relu(&format!("{prefix}.bn"), x)?;
        self.conv(&format!("{prefix}.conv"), a)
    }
}

/// Records `spec` applied to `input` (shape `(N, 1, D, H, W)`) on `tape`.
pub fn forward<T: Element>(
    spec: &NetworkSpec,
    params: &NetworkParams<T>,
    tape: &mut Tape<T>,
    input: Var,
    mode: Mode,
) -> Result<ForwardPass<T>> {
    spec.check_input(tape.value(input).shape())?;
    let mut cx = Ctx {
        tape,
        params,
        mode,
        bindings: Vec::new(),
        stats: Vec::new(),
    };
    let mut x = input;
    let mut skips = Vec::new();
    for layer in &spec.layers {
        x = match layer {
            Layer::Conv { name, .. } => cx.conv(name, x)?,
            Layer::Dense(d) => {
                let mut features = vec![x];
                for l in 0..d.layers {
                    let cat = if features.len() == 1 {
                        features[0]
                    } else {
                        cx.tape.concat_channels(&features)?
                    };
                    features.push(cx.unit(&format!("{}.{l}", d.name), cat)?);
                }
                cx.tape.concat_channels(&features)?
            }
            Layer::ConvStack { name, convs, .. } => {
                for i in 0..*convs {
                    x = cx.unit(&format!("{name}.{i}"), x)?;
                }
                x
            }
            Layer::Transition(t) => match t.resample {
                Resample::None => cx.unit(&t.name, x)?,
                Resample::Down => {
                    let y = cx.unit(&t.name, x)?;
                    cx.tape.maxpool3d(y, 2)?
                }
                Resample::Up => {
                    let u = cx.tape.upsample3d(x, 2)?;
                    cx.unit(&t.name, u)?
                }
            },
            Layer::SaveSkip => {
                skips.push(x);
                x
            }
            Layer::ConcatSkip => {
                let s = skips
                    .pop()
                    .ok_or_else(|| Error::Config("skip stack underflow".into()))?;
                cx.tape.concat_channels(&[x, s])?
            }
            Layer::Head { name, .. } => cx.unit(name, x)?,
        };
    }
    if spec.config.input_skip {
        x = cx.tape.add(x, input)?;
    }
    Ok(ForwardPass {
        output: x,
        bindings: cx.bindings,
        batch_stats: cx.stats,
    })
}

/// Architecture plus weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T: Element = f32> {
    pub spec: NetworkSpec,
    pub params: NetworkParams<T>,
}

impl<T: Element> Model<T> {
    /// Builds the architecture and He-initialises it from `config.seed`.
    pub fn build(config: &NetworkConfig) -> Result<Self> {
        let spec = NetworkSpec::build(config)?;
        let params = NetworkParams::init(&spec);
        Ok(Self { spec, params })
    }

    /// Eval-mode inference on `(N, 1, D, H, W)` input.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let x = tape.constant(input.clone());
        let pass = forward(&self.spec, &self.params, &mut tape, x, Mode::Eval)?;
        Ok(tape.value(pass.output).clone())
    }

    /// Folds train-mode batch statistics into the running estimates.
    pub fn update_running_stats(&mut self, stats: &[(String, BatchStats<T>)], momentum: f64) -> Result<()> {
        let m = T::from_f64_lossy(momentum);
        for (prefix, s) in stats {
            let mean_name = format!("{prefix}.running_mean");
            let var_name = format!("{prefix}.running_var");
            let mut running = RunningStats {
                mean: self.params.get(&mean_name)?.clone(),
                var: self.params.get(&var_name)?.clone(),
            };
            running.update(s, m);
            *self.params.get_mut(&mean_name)? = running.mean;
            *self.params.get_mut(&var_name)? = running.var;
        }
        Ok(())
    }

    pub fn cast<U: Element>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            params: self.params.cast(),
        }
    }
}

impl Model<f32> {
    /// Writes `<path>` (DUW1 weights) and `<path>.arch` (key-value config).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.params.save(path)?;
        let arch = arch_path(path);
        std::fs::write(&arch, self.spec.config.to_kv()).map_err(|e| Error::io(&arch, e))
    }

    /// Loads weights from `path` with the architecture in `<path>.arch`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let arch = arch_path(path);
        let text = std::fs::read_to_string(&arch).map_err(|e| Error::io(&arch, e))?;
        Self::load_with(path, &NetworkConfig::from_kv(&text)?)
    }

    pub fn load_with(path: impl AsRef<Path>, config: &NetworkConfig) -> Result<Self> {
        let mut model = Self::build(config)?;
        model.params.load_named(checkpoint::load(path)?)?;
        Ok(model)
    }
}

/// Finite-difference check of the train-mode MSE loss with respect to the
/// named parameter tensors of `model`.
pub fn check_model_gradients(
    model: &Model<f64>,
    input: &Tensor<f64>,
    target: &Tensor<f64>,
    names: &[&str],
    probes_per_tensor: usize,
    eps: f64,
) -> Result<GradCheck> {
    let loss = |params: &NetworkParams<f64>, tape: &mut Tape<f64>| -> Result<(Var, ForwardPass<f64>)> {
        let x = tape.constant(input.clone());
        let t = tape.constant(target.clone());
        let pass = forward(&model.spec, params, tape, x, Mode::Train)?;
        Ok((tape.mse_loss(pass.output, t, LossRegion::Full)?, pass))
    };
    let value = |params: &NetworkParams<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let (l, _) = loss(params, &mut tape)?;
        Ok(tape.value(l).item())
    };

    let mut tape = Tape::new();
    let (root, pass) = loss(&model.params, &mut tape)?;
    tape.backward(root)?;

    let mut report = GradCheck {
        max_rel_err: 0.0,
        probes: 0,
        worst: None,
    };
    let mut params = model.params.clone();
    for (k, name) in names.iter().enumerate() {
        let idx = params.position(name)?;
        let var = pass
            .bindings
            .iter()
            .find(|b| b.0 == idx)
            .map(|b| b.1)
            .ok_or_else(|| Error::Config(format!("{name} is not used by the forward pass")))?;
        let len = params.by_index(idx).len();
        let zeros = Tensor::zeros(params.by_index(idx).shape());
        let analytic = tape.grad(var).unwrap_or(&zeros);
        let count = probes_per_tensor.min(len);
        for p in 0..count {
            let j = p * len / count;
            let orig = params.by_index(idx).data()[j];
            params.by_index_mut(idx).data_mut()[j] = orig + eps;
            let up = value(&params)?;
            params.by_index_mut(idx).data_mut()[j] = orig - eps;
            let down = value(&params)?;
            params.by_index_mut(idx).data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.data()[j];
            let err = relative_error(a, numeric);
            report.probes += 1;
            if err >= report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((k, j, a, numeric));
            }
        }
    }
    Ok(report)
}

/// Sidecar architecture file next to a checkpoint.
pub fn arch_path(checkpoint: &Path) -> std::path::PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".arch");
    s.into()
}
