//! Patch datasets, masked-input/target pairs, the training loop and the
//! loss-scope / mask-size ablation.

mod ablate;
mod dataset;
mod train;

pub use ablate::{ablate, ablation_csv, AblationRow};
pub use dataset::{build_dataset, entry_count, make_example, stack_examples, synthetic_volumes, DatasetVolume, Example, PatchDataset, PatchEntry};
pub use train::{train, train_with, LossScope, TrainOutcome, TrainingConfig};
