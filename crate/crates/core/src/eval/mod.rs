//! Restoration error and stenosis measurement experiments.

mod experiment;
mod figures;
mod restoration;
mod stenosis;

pub use experiment::{experiment2, median, LesionRow, StenosisReport};
pub use figures::{restoration_triptych, volume_diptych};
pub use restoration::{eval_restoration, hu2, region_mse, EvalRegion, RestorationResult, Summary, RESTORATION_CSV_HEADER};
pub use stenosis::{cross_section_area, lesion_windows, measure_stenosis, Interpolation, MeasureConfig};
