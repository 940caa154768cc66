//! Dense-Unet and the baseline architectures it is compared against.

mod forward;
mod inpaint;
mod params;
mod spec;

pub use forward::{arch_path, check_model_gradients, forward, ForwardPass, Mode, Model, BN_EPS, BN_MOMENTUM};
pub use inpaint::{FlipAveraged, Inpainter, MeanFill};
pub use params::{NetworkParams, ParamRole};
pub use spec::{
    ArchKind, DenseBlockSpec, Layer, NetworkConfig, NetworkSpec, Resample,
    TransitionSpec,
};
