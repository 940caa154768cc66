use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ctvol::{default_fill, PatchSpec};
use crate::error::{Error, Result};
use crate::network::{forward, Mode, Model, NetworkConfig, BN_MOMENTUM};
use crate::tensor::{Adam, AdamState, LossRegion, Tape, Tensor};

use super::dataset::{make_example, stack_examples, PatchDataset};

/// Voxels the training loss averages over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LossScope {
    #[default]
    Full,
    MaskOnly,
}

impl fmt::Display for LossScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossScope::Full => "full",
            LossScope::MaskOnly => "mask-only",
        })
    }
}

impl FromStr for LossScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(LossScope::Full),
            "mask-only" | "mask_only" => Ok(LossScope::MaskOnly),
            _ => Err(Error::Config(format!("unknown loss region {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub steps: usize,
    /// Seeds both the weight initialisation and the batch shuffle.
    pub seed: u64,
    pub loss_region: LossScope,
    pub mask_size: usize,
    /// Train on flipped dataset entries too; otherwise identity entries only.
    pub flips: bool,
    pub network: NetworkConfig,
}

impl TrainingConfig {
    /// Learning rate 1e-4, batch 3, mask 16, full-image loss.
    pub fn paper(network: NetworkConfig, steps: usize) -> Self {
        Self {
            lr: 1e-4,
            batch_size: 3,
            steps,
            seed: 0,
            loss_region: LossScope::Full,
            mask_size: 16,
            flips: true,
            network,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be ≥ 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be ≥ 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be finite and ≥ 0", self.lr)));
        }
        self.network.validate()
    }

    pub fn loss(&self) -> LossRegion {
        match self.loss_region {
            LossScope::Full => LossRegion::Full,
            LossScope::MaskOnly => LossRegion::MaskOnly {
                mask_size: self.mask_size,
            },
        }
    }
}

/// Trained model, per-step loss and the ids of the volumes it saw.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    pub history: Vec<f64>,
    pub trained_on: Vec<String>,
}

impl TrainOutcome {
    /// `step,loss` lines with a header.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for (i, l) in self.history.iter().enumerate() {
            out.push_str(&format!("{i},{l}\n"));
        }
        out
    }
}

/// Adam on the MSE of masked patches. Batches walk a seeded permutation of
/// the dataset that is redrawn every epoch.
pub fn train(config: &TrainingConfig, dataset: &PatchDataset) -> Result<TrainOutcome> {
    train_with(config, dataset, |_, _| {})
}

/// [`train`] with a callback receiving `(step, loss)` after every update.
pub fn train_with(
    config: &TrainingConfig,
    dataset: &PatchDataset,
    mut on_step: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    config.validate()?;
    let pool: Vec<usize> = (0..dataset.len())
        .filter(|&i| config.flips || dataset.entries[i].flip.is_identity())
        .collect();
    if pool.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    let specs: Vec<PatchSpec> = pool
        .iter()
        .map(|&i| {
            let s = dataset.entries[i].spec;
            PatchSpec::new(s.origin, s.size, config.mask_size)
        })
        .collect::<Result<_>>()?;

    let mut model = Model::<f32>::build(&config.network.clone().with_seed(config.seed))?;
    let trainable = model.params.trainable_indices();
    let slot: Vec<Option<usize>> = {
        let mut s = vec![None; model.params.len()];
        for (k, &i) in trainable.iter().enumerate() {
            s[i] = Some(k);
        }
        s
    };
    let mut state = AdamState::new(trainable.iter().map(|&i| model.params.by_index(i)));
    let adam = Adam {
        lr: config.lr,
        ..Adam::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let fill = default_fill();
    let mut history = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        let mut batch = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let k = order[cursor];
            cursor += 1;
            let e = &dataset.entries[pool[k]];
            batch.push(make_example(&dataset.volumes[e.volume].volume, &specs[k], e.flip, fill)?);
        }
        let (input, target) = stack_examples(&batch)?;

        let mut tape = Tape::new();
        let x = tape.constant(input);
        let t = tape.constant(target);
        let pass = forward(&model.spec, &model.params, &mut tape, x, Mode::Train)?;
        let loss = tape.mse_loss(pass.output, t, config.loss())?;
        let value = tape.value(loss).item() as f64;
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss { step, lr: config.lr });
        }
        tape.backward(loss)?;

        let mut grads: Vec<Tensor<f32>> = trainable
            .iter()
            .map(|&i| Tensor::zeros(model.params.by_index(i).shape()))
            .collect();
        for &(i, var) in &pass.bindings {
            if let (Some(k), Some(g)) = (slot[i], tape.grad(var)) {
                grads[k].add_assign(g);
            }
        }
        let grad_refs: Vec<&Tensor<f32>> = grads.iter().collect();
        adam.step(&mut model.params.trainable_mut(), &grad_refs, &mut state)?;
        model.update_running_stats(&pass.batch_stats, BN_MOMENTUM)?;

        history.push(value);
        on_step(step, value);
    }

    Ok(TrainOutcome {
        model,
        history,
        trained_on: dataset.volumes.iter().map(|v| v.id.clone()).collect(),
    })
}
