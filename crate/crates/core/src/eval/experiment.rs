use rayon::prelude::*;

use crate::error::Result;
use crate::network::Inpainter;
use crate::phantom::SuitePhantom;
use crate::removal::{remove_calcium, RemovalConfig};

use super::stenosis::{lesion_windows, measure_stenosis, MeasureConfig};

/// Stenosis of one calcified lesion: phantom truth and the two readings.
#[derive(Clone, Debug, PartialEq)]
pub struct LesionRow {
    pub phantom: String,
    pub lesion: usize,
    pub truth: f64,
    pub original: f64,
    /// Reading on the calcium-removed volume; `None` when it could not be
    /// measured.
    pub removed: Option<f64>,
    /// Removal finished with no calcium left.
    pub converged: bool,
    pub iterations: usize,
    pub residual: usize,
}

impl LesionRow {
    pub fn original_error(&self) -> f64 {
        (self.original - self.truth).abs()
    }

    pub fn removed_error(&self) -> Option<f64> {
        self.removed.map(|r| (r - self.truth).abs())
    }

    /// Part of the paired comparison: converged and measurable.
    pub fn paired(&self) -> bool {
        self.converged && self.removed.is_some()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StenosisReport {
    pub rows: Vec<LesionRow>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

impl StenosisReport {
    /// `|original − truth|` and `|removed − truth|` over the paired lesions.
    pub fn paired_errors(&self) -> (Vec<f64>, Vec<f64>) {
        self.rows
            .iter()
            .filter(|r| r.paired())
            .map(|r| (r.original_error(), r.removed_error().unwrap()))
            .unzip()
    }

    /// Median absolute errors `(original, removed)` over paired lesions.
    pub fn median_errors(&self) -> Option<(f64, f64)> {
        let (o, r) = self.paired_errors();
        Some((median(&o)?, median(&r)?))
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("phantom,lesion,truth,original,removed,diff_original,diff_removed,converged,iterations,residual\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.phantom,
                r.lesion,
                r.truth,
                r.original,
                opt(r.removed),
                r.original_error(),
                opt(r.removed_error()),
                r.converged,
                r.iterations,
                r.residual
            ));
        }
        out
    }
}

/// Measures every calcified lesion of the suite on the original volume and
/// after [`remove_calcium`]. Phantoms run in parallel.
pub fn experiment2(
    suite: &[SuitePhantom],
    inpainter: &dyn Inpainter,
    removal: &RemovalConfig,
    measure: &MeasureConfig,
) -> Result<StenosisReport> {
    let per_phantom = suite
        .par_iter()
        .map(|p| -> Result<Vec<LesionRow>> {
            let out = remove_calcium(&p.volume, inpainter, removal)?;
            let line = p.truth.centerline();
            (0..p.truth.plaques.len())
                .map(|i| {
                    let (reference, lesion) = lesion_windows(&p.truth, i);
                    Ok(LesionRow {
                        phantom: p.name.clone(),
                        lesion: i,
                        truth: p.truth.stenosis[i],
                        original: measure_stenosis(&p.volume, &line, reference, lesion, measure)?,
                        removed: measure_stenosis(&out.volume, &line, reference, lesion, measure).ok(),
                        converged: out.report.converged,
                        iterations: out.report.iterations,
                        residual: out.report.residual,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StenosisReport {
        rows: per_phantom.into_iter().flatten().collect(),
    })
}
