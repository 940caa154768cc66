//! Synthetic CT phantoms: contrast-filled vessels with known lumen geometry
//! and implanted, blooming calcified plaques.

pub(crate) mod centerline;
mod generate;
mod model;
mod suite;

pub use centerline::{Centerline, Closest, Frame, Vec3};
pub use generate::{generate_phantom, true_stenosis, PhantomTruth, Tissue, BLOOM_SIGMA};
pub use model::{quadrant_of, PlaqueModel, VesselModel, CALCIUM_THRESHOLD_HU};
pub use suite::{
    phantom_suite, random_phantom, render_suite, suite_models, RandomPhantom, SuitePhantom,
    SUITE_DIMS, SUITE_NOISE_SIGMA_HU, SUITE_PLAQUE_HU,
};
