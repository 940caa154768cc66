//! Minimal tensor library with a reverse-mode gradient tape and the 3D
//! operators the inpainting networks are built from.

mod adam;
pub mod checkpoint;
mod conv;
pub mod gradcheck;
mod element;
mod init;
mod ops;
mod tape;
#[allow(clippy::module_inception)]
mod tensor;

pub use adam::{Adam, AdamState};
pub use element::Element;
pub use init::{he_normal, seeded_rng};
pub use ops::{centered_box, BatchStats, LossRegion, RunningStats};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
