use crate::error::{Error, Result};
use crate::eval::{eval_restoration, EvalRegion};

use super::dataset::PatchDataset;
use super::train::{train, LossScope, TrainingConfig};

/// One trained configuration and its held-out masked-region error.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub arch: String,
    pub loss_region: LossScope,
    pub mask_size: usize,
    pub steps: usize,
    pub eval_mse_hu2: f64,
    pub final_train_loss: f64,
}

/// Trains every configuration on `train_set` and scores its masked region
/// on `eval_set` (re-masked to each configuration's mask size).
pub fn ablate(grid: &[TrainingConfig], train_set: &PatchDataset, eval_set: &PatchDataset) -> Result<Vec<AblationRow>> {
    if eval_set.is_empty() {
        return Err(Error::Config("ablation needs a non-empty eval set".into()));
    }
    grid.iter()
        .map(|cfg| {
            let out = train(cfg, train_set)?;
            let eval = eval_set.with_mask_size(cfg.mask_size)?;
            let res = eval_restoration(&out.model, &out.trained_on, &eval, EvalRegion::Mask)?;
            Ok(AblationRow {
                arch: cfg.network.kind.to_string(),
                loss_region: cfg.loss_region,
                mask_size: cfg.mask_size,
                steps: cfg.steps,
                eval_mse_hu2: res.summary().mean,
                final_train_loss: *out.history.last().unwrap(),
            })
        })
        .collect()
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("arch,loss_region,mask_size,steps,eval_mse_hu2,final_train_loss\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.arch, r.loss_region, r.mask_size, r.steps, r.eval_mse_hu2, r.final_train_loss
        ));
    }
    out
}
