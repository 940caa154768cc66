use std::collections::BTreeSet;

use crate::ctvol::{
    apply_inpainting_mask, extract_patch, flip_augment, normalize_tensor, patch_grid, FlipAxes, PatchSpec,
    RegionOfInterest, Volume,
};
use crate::error::{Error, Result};
use crate::phantom::{random_phantom, RandomPhantom};
use crate::tensor::{centered_box, Tensor};

/// Volume with a stable identifier used for leakage checks.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetVolume {
    pub id: String,
    pub volume: Volume,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PatchEntry {
    /// Index into [`PatchDataset::volumes`].
    pub volume: usize,
    pub spec: PatchSpec,
    pub flip: FlipAxes,
}

impl DatasetVolume {
    /// Id of the random phantom drawn from `seed`.
    pub fn random_id(seed: u64) -> String {
        format!("random-{seed}")
    }
}

/// Random phantoms for `seeds`, identified by seed so that two sets drawn
/// from overlapping seeds are caught by the leakage check.
pub fn synthetic_volumes(opts: &RandomPhantom, seeds: std::ops::Range<u64>) -> Result<Vec<DatasetVolume>> {
    seeds
        .map(|s| {
            Ok(DatasetVolume {
                id: DatasetVolume::random_id(s),
                volume: random_phantom(opts, s)?.0,
            })
        })
        .collect()
}

/// Enumerated patches over a set of volumes.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchDataset {
    pub volumes: Vec<DatasetVolume>,
    pub entries: Vec<PatchEntry>,
}

impl PatchDataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn volume_ids(&self) -> BTreeSet<&str> {
        self.volumes.iter().map(|v| v.id.as_str()).collect()
    }

    /// Same patches with every mask resized to `mask_size`.
    pub fn with_mask_size(&self, mask_size: usize) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                Ok(PatchEntry {
                    spec: PatchSpec::new(e.spec.origin, e.spec.size, mask_size)?,
                    ..*e
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            volumes: self.volumes.clone(),
            entries,
        })
    }

    /// Keeps the entries selected by `keep`, in order.
    pub fn filter(&self, mut keep: impl FnMut(usize, &PatchEntry) -> bool) -> Self {
        Self {
            volumes: self.volumes.clone(),
            entries: self
                .entries
                .iter()
                .enumerate()
                .filter(|(i, e)| keep(*i, e))
                .map(|(_, e)| *e)
                .collect(),
        }
    }

    /// Every `k`-th entry, starting with the first, up to `limit` entries.
    pub fn subsample(&self, limit: usize) -> Self {
        if self.entries.len() <= limit {
            return self.clone();
        }
        let n = self.entries.len();
        Self {
            volumes: self.volumes.clone(),
            entries: (0..limit).map(|i| self.entries[i * n / limit]).collect(),
        }
    }

    pub fn example(&self, i: usize, fill: f32) -> Result<Example> {
        let e = &self.entries[i];
        make_example(&self.volumes[e.volume].volume, &e.spec, e.flip, fill)
    }

    /// Entries whose target varies by more than `min_range` (normalized
    /// units) inside the mask, so a held-out set is not dominated by flat
    /// background that any filler restores.
    pub fn informative(&self, min_range: f32) -> Result<Self> {
        let mut keep = vec![false; self.entries.len()];
        for (i, e) in self.entries.iter().enumerate() {
            let ex = self.example(i, 0.0)?;
            let n = e.spec.size;
            let [bz, by, bx] = centered_box([n; 3], e.spec.mask_size)?;
            let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
            for z in bz.0..bz.1 {
                for y in by.0..by.1 {
                    for x in bx.0..bx.1 {
                        let v = ex.target.data()[(z * n + y) * n + x];
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
            }
            keep[i] = hi - lo > min_range;
        }
        Ok(self.filter(|i, _| keep[i]))
    }
}

/// Size of a dataset of `n_volumes` × `grid_count` origins.
pub fn entry_count(n_volumes: usize, grid_count: usize, include_flips: bool) -> usize {
    n_volumes * grid_count * if include_flips { 8 } else { 1 }
}

/// Enumerates, for every volume, the patch grid over the centered region
/// of `roi_dims` and optionally the eight flip variants of each patch.
///
/// Entries are ordered by volume, then grid origin in scan order, then flip.
pub fn build_dataset(
    volumes: Vec<DatasetVolume>,
    roi_dims: [usize; 3],
    patch_size: usize,
    mask_size: usize,
    stride: usize,
    include_flips: bool,
) -> Result<PatchDataset> {
    let flips: Vec<FlipAxes> = if include_flips {
        FlipAxes::all().to_vec()
    } else {
        vec![FlipAxes::default()]
    };
    let grid = patch_grid(roi_dims, patch_size, stride)?;
    let mut seen = BTreeSet::new();
    let mut entries = Vec::with_capacity(entry_count(volumes.len(), grid.len(), include_flips));
    for (vi, v) in volumes.iter().enumerate() {
        if !seen.insert(v.id.as_str()) {
            return Err(Error::Config(format!("duplicate volume id {:?}", v.id)));
        }
        let roi = RegionOfInterest::centered(v.volume.dims(), roi_dims)?;
        for &o in &grid {
            let origin = [0, 1, 2].map(|a| roi.origin[a] + o[a]);
            let spec = PatchSpec::new(origin, patch_size, mask_size)?;
            spec.validate(v.volume.dims())?;
            for &flip in &flips {
                entries.push(PatchEntry { volume: vi, spec, flip });
            }
        }
    }
    Ok(PatchDataset { volumes, entries })
}

/// Normalized `(1, 1, s, s, s)` network input and target.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub input: Tensor<f32>,
    pub target: Tensor<f32>,
}

/// Extracts, flips and normalizes a patch; the input has its centered mask
/// replaced by `fill`.
pub fn make_example(volume: &Volume, spec: &PatchSpec, flip: FlipAxes, fill: f32) -> Result<Example> {
    let s = spec.size;
    let patch = flip_augment(&extract_patch(volume, spec)?, flip)?;
    let target = normalize_tensor(&patch).reshape(vec![1, 1, s, s, s])?;
    let input = apply_inpainting_mask(&target, spec.mask_size, fill)?;
    Ok(Example { input, target })
}

/// Concatenates `(1, 1, s, s, s)` examples along the batch axis.
pub fn stack_examples(examples: &[Example]) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let first = examples
        .first()
        .ok_or_else(|| Error::Shape("cannot stack an empty batch".into()))?;
    let shape = first.input.shape().to_vec();
    let mut input = Vec::with_capacity(first.input.len() * examples.len());
    let mut target = Vec::with_capacity(input.capacity());
    for e in examples {
        if e.input.shape() != shape.as_slice() || e.target.shape() != shape.as_slice() {
            return Err(Error::Shape(format!(
                "batch members disagree: {:?} vs {shape:?}",
                e.input.shape()
            )));
        }
        input.extend_from_slice(e.input.data());
        target.extend_from_slice(e.target.data());
    }
    let mut batched = shape;
    batched[0] = examples.len();
    Ok((Tensor::new(batched.clone(), input)?, Tensor::new(batched, target)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctvol::default_fill;
    use crate::tensor::centered_box;

    fn vol(id: &str, dims: [usize; 3]) -> DatasetVolume {
        let n = dims.iter().product();
        DatasetVolume {
            id: id.into(),
            volume: Volume::new(dims, 1.0, (0..n).map(|i| ((i * 37) % 1500) as i16).collect()).unwrap(),
        }
    }

    #[test]
    fn counts() {
        let d = build_dataset(vec![vol("a", [24, 24, 24])], [24, 24, 24], 8, 4, 8, false).unwrap();
        assert_eq!(d.len(), 27);
        let d = build_dataset(vec![vol("a", [24, 24, 24])], [24, 24, 24], 8, 4, 8, true).unwrap();
        assert_eq!(d.len(), 216);
        let two = build_dataset(vec![vol("a", [24, 24, 24]), vol("b", [30, 30, 30])], [24, 24, 24], 8, 4, 8, false)
            .unwrap();
        assert_eq!(two.len(), 54);
        assert!(build_dataset(vec![vol("a", [16, 16, 16])], [24, 24, 24], 8, 4, 8, false).is_err());
        assert!(build_dataset(vec![vol("a", [24; 3]), vol("a", [24; 3])], [24; 3], 8, 4, 8, false).is_err());
        assert_eq!(entry_count(2, 27, false), two.len());
        // the published set: 60 subjects at 400 origins each
        assert_eq!(entry_count(60, 400, false), 24000);
        assert_eq!(entry_count(60, 400, true), 192000);
    }

    #[test]
    fn input_differs_from_target_only_inside_mask() {
        let v = vol("a", [20, 20, 20]);
        let spec = PatchSpec::new([2, 3, 4], 12, 6).unwrap();
        let ex = make_example(&v.volume, &spec, FlipAxes { x: true, y: false, z: true }, default_fill()).unwrap();
        let [bz, by, bx] = centered_box([12, 12, 12], 6).unwrap();
        let mut differs = 0;
        for z in 0..12 {
            for y in 0..12 {
                for x in 0..12 {
                    let i = (z * 12 + y) * 12 + x;
                    let inside =
                        (bz.0..bz.1).contains(&z) && (by.0..by.1).contains(&y) && (bx.0..bx.1).contains(&x);
                    if inside {
                        assert_eq!(ex.input.data()[i], default_fill());
                        differs += (ex.target.data()[i] != default_fill()) as usize;
                    } else {
                        assert_eq!(ex.input.data()[i], ex.target.data()[i]);
                    }
                }
            }
        }
        assert!(differs > 0);
    }

    #[test]
    fn stacking() {
        let v = vol("a", [20, 20, 20]);
        let a = make_example(&v.volume, &PatchSpec::new([0; 3], 8, 4).unwrap(), FlipAxes::default(), 0.0).unwrap();
        let b = make_example(&v.volume, &PatchSpec::new([4; 3], 8, 4).unwrap(), FlipAxes::default(), 0.0).unwrap();
        let (x, t) = stack_examples(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(x.shape(), &[2, 1, 8, 8, 8]);
        assert_eq!(&t.data()[512..], b.target.data());
        assert_eq!(&x.data()[..512], a.input.data());
        assert!(stack_examples(&[]).is_err());
    }
}
