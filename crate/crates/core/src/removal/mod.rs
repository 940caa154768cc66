//! Calcium detection and sliding-window progressive inpainting.

mod execute;
mod plan;

pub use execute::{execute_removal, remove_calcium, RemovalConfig, RemovalLogEntry, RemovalOutcome, RemovalReport};
pub use plan::{detect_calcium, grow_detections, plan_removal, RemovalPlan};
