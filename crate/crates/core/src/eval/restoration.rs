use std::fmt;

use rayon::prelude::*;

use crate::ctvol::{default_fill, HU_RANGE};
use crate::error::{Error, Result};
use crate::network::Inpainter;
use crate::tensor::centered_box;
use crate::trainer::PatchDataset;

/// Voxels a restoration error averages over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EvalRegion {
    /// The centered inpainting mask.
    #[default]
    Mask,
    /// The whole patch.
    Full,
}

impl fmt::Display for EvalRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalRegion::Mask => "mask",
            EvalRegion::Full => "full",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Per-patch restoration error in HU².
#[derive(Clone, Debug, PartialEq)]
pub struct RestorationResult {
    pub label: String,
    pub region: EvalRegion,
    pub per_patch: Vec<f64>,
}

impl RestorationResult {
    pub fn summary(&self) -> Summary {
        let n = self.per_patch.len().max(1) as f64;
        Summary {
            mean: self.per_patch.iter().sum::<f64>() / n,
            min: self.per_patch.iter().copied().fold(f64::INFINITY, f64::min),
            max: self.per_patch.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// `patch,architecture,region,mse_hu2` rows without a header.
    pub fn csv_rows(&self) -> String {
        self.per_patch
            .iter()
            .enumerate()
            .map(|(i, m)| format!("{i},{},{},{m}\n", self.label, self.region))
            .collect()
    }
}

pub const RESTORATION_CSV_HEADER: &str = "patch,architecture,region,mse_hu2\n";

/// Converts a mean squared error in normalized units to HU².
pub fn hu2(normalized_mse: f64) -> f64 {
    HU_RANGE * HU_RANGE * normalized_mse
}

/// Masks every eval patch, inpaints it and scores `region` against the
/// unmasked patch. Fails if any eval volume id is in `trained_on`.
pub fn eval_restoration(
    inpainter: &dyn Inpainter,
    trained_on: &[String],
    eval: &PatchDataset,
    region: EvalRegion,
) -> Result<RestorationResult> {
    let leaked: Vec<String> = eval
        .volume_ids()
        .into_iter()
        .filter(|id| trained_on.iter().any(|t| t == id))
        .map(str::to_string)
        .collect();
    if !leaked.is_empty() {
        return Err(Error::Leakage(leaked));
    }
    let fill = default_fill();
    let per_patch = (0..eval.len())
        .into_par_iter()
        .map(|i| {
            let ex = eval.example(i, fill)?;
            let spec = eval.entries[i].spec;
            let pred = inpainter.inpaint(&ex.input, spec.mask_size)?;
            if pred.shape() != ex.target.shape() {
                return Err(Error::Shape(format!(
                    "inpainter returned {:?} for {:?}",
                    pred.shape(),
                    ex.target.shape()
                )));
            }
            Ok(hu2(region_mse(pred.data(), ex.target.data(), spec.size, spec.mask_size, region)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RestorationResult {
        label: inpainter.label(),
        region,
        per_patch,
    })
}

/// Mean squared difference over the region of one `size³` patch.
pub fn region_mse(pred: &[f32], target: &[f32], size: usize, mask_size: usize, region: EvalRegion) -> Result<f64> {
    let [bz, by, bx] = match region {
        EvalRegion::Mask => centered_box([size; 3], mask_size)?,
        EvalRegion::Full => [(0, size); 3],
    };
    let mut sum = 0.0;
    let mut count = 0usize;
    for z in bz.0..bz.1 {
        for y in by.0..by.1 {
            for x in bx.0..bx.1 {
                let i = (z * size + y) * size + x;
                let e = pred[i] as f64 - target[i] as f64;
                sum += e * e;
                count += 1;
            }
        }
    }
    Ok(sum / count as f64)
}
