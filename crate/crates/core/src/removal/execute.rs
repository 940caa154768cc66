use serde::Serialize;

use crate::ctvol::{
    apply_inpainting_mask, default_fill, denormalize_tensor, extract_patch, normalize_tensor, write_patch, PatchSpec,
    RegionOfInterest, Volume, MASK_SIZE, PATCH_SIZE,
};
use crate::error::Result;
use crate::network::Inpainter;
use crate::phantom::CALCIUM_THRESHOLD_HU;

use super::plan::{detect_calcium, grow_detections, plan_removal, RemovalPlan};

#[derive(Clone, Debug, PartialEq)]
pub struct RemovalConfig {
    /// Region searched for calcium; the whole volume when `None`.
    pub roi: Option<RegionOfInterest>,
    pub threshold_hu: f64,
    /// Bound on detect/plan/execute rounds.
    pub max_iterations: usize,
    pub patch_size: usize,
    pub mask_size: usize,
    /// Normalized value written into the mask before inference.
    pub fill: f32,
    /// Planning also covers voxels within this Chebyshev distance of a
    /// detection, so the blooming halo below the threshold is repainted
    /// rather than left as context.
    pub halo: usize,
}

impl Default for RemovalConfig {
    fn default() -> Self {
        Self {
            roi: None,
            threshold_hu: CALCIUM_THRESHOLD_HU,
            max_iterations: 50,
            patch_size: PATCH_SIZE,
            mask_size: MASK_SIZE,
            fill: default_fill(),
            halo: 0,
        }
    }
}

impl RemovalConfig {
    fn roi_for(&self, v: &Volume) -> RegionOfInterest {
        self.roi.unwrap_or_else(|| RegionOfInterest::whole(v.dims()))
    }

    /// Plans masks over `detections` grown by `halo`.
    pub fn plan(&self, dims: [usize; 3], detections: &[[usize; 3]]) -> Result<Vec<PatchSpec>> {
        let margin = self.patch_size.saturating_sub(self.mask_size) / 2;
        let targets = grow_detections(dims, detections, self.halo, margin);
        plan_removal(dims, &targets, self.patch_size, self.mask_size)
    }
}

/// One inpainted mask.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemovalLogEntry {
    /// Outer round, from 1.
    pub round: usize,
    /// Step within the round, from 0.
    pub step: usize,
    pub origin: [usize; 3],
    pub mask_origin: [usize; 3],
    pub mask_size: usize,
    /// Detections in the region before and after this step.
    pub pre: usize,
    pub post: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemovalReport {
    /// Rounds executed.
    pub iterations: usize,
    pub initial_detections: usize,
    pub voxels_removed: usize,
    /// Detections left at the end; zero iff `converged`.
    pub residual: usize,
    pub converged: bool,
    #[serde(skip)]
    pub log: Vec<RemovalLogEntry>,
}

impl RemovalReport {
    /// JSON object per log entry, one per line.
    pub fn log_jsonl(&self) -> String {
        self.log
            .iter()
            .map(|e| serde_json::to_string(e).expect("log entries serialize") + "\n")
            .collect()
    }

    /// Specs of every executed step, in order.
    pub fn executed(&self) -> Vec<PatchSpec> {
        self.log
            .iter()
            .map(|e| PatchSpec {
                origin: e.origin,
                size: e.mask_size + 2 * (e.mask_origin[0] - e.origin[0]),
                mask_size: e.mask_size,
            })
            .collect()
    }
}

/// Restored volume plus the account of how it got there.
#[derive(Clone, Debug, PartialEq)]
pub struct RemovalOutcome {
    pub volume: Volume,
    pub report: RemovalReport,
}

fn inpaint_step(volume: &mut Volume, spec: &PatchSpec, inpainter: &dyn Inpainter, fill: f32) -> Result<()> {
    let s = spec.size;
    let patch = normalize_tensor(&extract_patch(volume, spec)?).reshape(vec![1, 1, s, s, s])?;
    let masked = apply_inpainting_mask(&patch, spec.mask_size, fill)?;
    let restored = denormalize_tensor(&inpainter.inpaint(&masked, spec.mask_size)?).reshape(vec![s, s, s])?;
    write_patch(volume, spec, &restored, true)
}

/// Runs `plan` step by step on the evolving volume, then re-detects and
/// re-plans until no calcium is left or `max_iterations` rounds ran.
pub fn execute_removal(
    volume: &Volume,
    plan: &RemovalPlan,
    inpainter: &dyn Inpainter,
    config: &RemovalConfig,
) -> Result<RemovalOutcome> {
    let roi = config.roi_for(volume);
    let mut current = volume.clone();
    let mut detections = detect_calcium(&current, &roi, plan.threshold_hu)?;
    let initial = detections.len();
    let mut log = Vec::new();
    let mut steps = plan.steps.clone();
    let mut round = 0;
    while !detections.is_empty() && round < plan.max_iterations {
        round += 1;
        for (k, spec) in steps.iter().enumerate() {
            let pre = detect_calcium(&current, &roi, plan.threshold_hu)?.len();
            inpaint_step(&mut current, spec, inpainter, config.fill)?;
            let post = detect_calcium(&current, &roi, plan.threshold_hu)?.len();
            log.push(RemovalLogEntry {
                round,
                step: k,
                origin: spec.origin,
                mask_origin: spec.mask_origin(),
                mask_size: spec.mask_size,
                pre,
                post,
            });
        }
        detections = detect_calcium(&current, &roi, plan.threshold_hu)?;
        if !detections.is_empty() {
            steps = config.plan(current.dims(), &detections)?;
        }
    }
    let residual = detections.len();
    Ok(RemovalOutcome {
        volume: current,
        report: RemovalReport {
            iterations: round,
            initial_detections: initial,
            voxels_removed: initial.saturating_sub(residual),
            residual,
            converged: residual == 0,
            log,
        },
    })
}

/// Detect, plan and execute in one call.
pub fn remove_calcium(volume: &Volume, inpainter: &dyn Inpainter, config: &RemovalConfig) -> Result<RemovalOutcome> {
    let roi = config.roi_for(volume);
    let detections = detect_calcium(volume, &roi, config.threshold_hu)?;
    let plan = RemovalPlan {
        steps: config.plan(volume.dims(), &detections)?,
        threshold_hu: config.threshold_hu,
        max_iterations: config.max_iterations,
    };
    execute_removal(volume, &plan, inpainter, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::MeanFill;
    use crate::tensor::Tensor;

    fn config() -> RemovalConfig {
        RemovalConfig {
            patch_size: 16,
            mask_size: 8,
            ..RemovalConfig::default()
        }
    }

    fn with_calcium(points: &[[usize; 3]]) -> Volume {
        let n = 40 * 40 * 40;
        let mut v = Volume::new([40; 3], 0.5, (0..n).map(|i| ((i * 7919) % 400) as i16 - 100).collect()).unwrap();
        for &p in points {
            v.set(p, 1500);
        }
        v
    }

    fn locality(input: &Volume, out: &RemovalOutcome) {
        let masks = out.report.executed();
        for i in input.diff_indices(&out.volume) {
            let p = input.coords(i);
            assert!(masks.iter().any(|s| s.mask_contains(p)), "{p:?} changed outside every mask");
        }
    }

    #[test]
    fn calcium_free_volume_is_untouched() {
        let v = with_calcium(&[]);
        let out = remove_calcium(&v, &MeanFill, &config()).unwrap();
        assert_eq!(out.volume, v);
        assert!(out.report.log.is_empty());
        assert_eq!((out.report.iterations, out.report.residual, out.report.converged), (0, 0, true));
    }

    #[test]
    fn mean_fill_erases_a_segment_locally_and_idempotently() {
        let seg: Vec<[usize; 3]> = (10..31).map(|x| [x, 20, 20]).collect();
        let v = with_calcium(&seg);
        let out = remove_calcium(&v, &MeanFill, &config()).unwrap();
        assert!(out.report.converged);
        assert_eq!(out.report.iterations, 1);
        assert_eq!(out.report.log.len(), 3);
        assert_eq!(out.report.voxels_removed, 21);
        let last = out.report.log.last().unwrap();
        assert_eq!(last.post, 0);
        assert!(out.report.log.iter().all(|e| e.post <= e.pre));
        locality(&v, &out);
        let again = remove_calcium(&out.volume, &MeanFill, &config()).unwrap();
        assert_eq!(again.volume, out.volume);
        assert!(out.report.log_jsonl().lines().count() == 3);
    }

    /// Mean fill that records every input it is shown.
    struct Recorder(std::sync::Mutex<Vec<Tensor<f32>>>);

    impl Inpainter for Recorder {
        fn label(&self) -> String {
            "recorder".into()
        }

        fn inpaint(&self, masked: &Tensor<f32>, mask_size: usize) -> Result<Tensor<f32>> {
            self.0.lock().unwrap().push(masked.clone());
            MeanFill.inpaint(masked, mask_size)
        }
    }

    #[test]
    fn steps_read_the_volume_left_by_earlier_steps() {
        // two detections whose patches overlap the other's mask
        let v = with_calcium(&[[14, 20, 20], [24, 20, 20]]);
        let rec = Recorder(Default::default());
        let out = remove_calcium(&v, &rec, &config()).unwrap();
        let seen = rec.0.into_inner().unwrap();
        let specs = out.report.executed();
        assert_eq!((seen.len(), specs.len()), (2, 2));
        let masked_from = |vol: &Volume| {
            let t = normalize_tensor(&extract_patch(vol, &specs[1]).unwrap()).reshape(vec![1, 1, 16, 16, 16]).unwrap();
            apply_inpainting_mask(&t, 8, default_fill()).unwrap()
        };
        let mut after_first = v.clone();
        inpaint_step(&mut after_first, &specs[0], &MeanFill, default_fill()).unwrap();
        assert_eq!(seen[1], masked_from(&after_first));
        assert_ne!(seen[1], masked_from(&v));
        assert!(out.report.converged);
        locality(&v, &out);
    }

    /// Writes bright values everywhere, so calcium never goes away.
    struct Stubborn;

    impl Inpainter for Stubborn {
        fn label(&self) -> String {
            "stubborn".into()
        }

        fn inpaint(&self, masked: &Tensor<f32>, _: usize) -> Result<Tensor<f32>> {
            Ok(masked.map(|_| 0.6))
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let v = with_calcium(&[[20, 20, 20]]);
        let cfg = RemovalConfig {
            max_iterations: 4,
            ..config()
        };
        let out = remove_calcium(&v, &Stubborn, &cfg).unwrap();
        assert!(!out.report.converged);
        assert_eq!(out.report.iterations, 4);
        assert_eq!(out.report.residual, 512);
        locality(&v, &out);
    }
}
