use crate::error::{Error, Result};
use crate::tensor::{centered_box, Tensor};

use super::volume::{normalize_hu, quantize_hu, Volume};

/// Default patch edge in voxels.
pub const PATCH_SIZE: usize = 32;
/// Default inpainting-mask edge in voxels.
pub const MASK_SIZE: usize = 16;
/// Default calcium-bearing region extent `(x, y, z)`.
pub const ROI_DIMS: [usize; 3] = [160, 160, 64];

/// Cubic patch with a centered cubic inpainting mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatchSpec {
    /// Lowest voxel corner `(x, y, z)`.
    pub origin: [usize; 3],
    pub size: usize,
    pub mask_size: usize,
}

impl PatchSpec {
    pub fn new(origin: [usize; 3], size: usize, mask_size: usize) -> Result<Self> {
        let spec = Self {
            origin,
            size,
            mask_size,
        };
        spec.check_mask()?;
        Ok(spec)
    }

    fn check_mask(&self) -> Result<()> {
        if self.size == 0 || self.mask_size == 0 {
            return Err(Error::Geometry("patch and mask sizes must be ≥ 1".into()));
        }
        if self.mask_size > self.size || (self.size - self.mask_size) % 2 != 0 {
            return Err(Error::Geometry(format!(
                "mask {} cannot be centered in patch {}",
                self.mask_size, self.size
            )));
        }
        Ok(())
    }

    /// Checks mask centering and that the patch lies inside `dims`.
    pub fn validate(&self, dims: [usize; 3]) -> Result<()> {
        self.check_mask()?;
        for a in 0..3 {
            if self.origin[a] + self.size > dims[a] {
                return Err(Error::Geometry(format!(
                    "patch at {:?} of size {} exceeds volume {dims:?}",
                    self.origin, self.size
                )));
            }
        }
        Ok(())
    }

    /// Offset of the mask inside the patch along every axis.
    pub fn mask_offset(&self) -> usize {
        (self.size - self.mask_size) / 2
    }

    /// Volume-space lowest corner of the mask.
    pub fn mask_origin(&self) -> [usize; 3] {
        self.origin.map(|o| o + self.mask_offset())
    }

    pub fn mask_contains(&self, p: [usize; 3]) -> bool {
        let m = self.mask_origin();
        (0..3).all(|a| p[a] >= m[a] && p[a] < m[a] + self.mask_size)
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.origin[a] && p[a] < self.origin[a] + self.size)
    }
}

/// Box inside a volume, by default centered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegionOfInterest {
    pub origin: [usize; 3],
    pub dims: [usize; 3],
}

impl RegionOfInterest {
    /// Box of `dims` centered in a volume of `volume_dims`.
    pub fn centered(volume_dims: [usize; 3], dims: [usize; 3]) -> Result<Self> {
        let mut origin = [0; 3];
        for a in 0..3 {
            if dims[a] == 0 || dims[a] > volume_dims[a] {
                return Err(Error::Geometry(format!(
                    "region {dims:?} does not fit volume {volume_dims:?}"
                )));
            }
            origin[a] = (volume_dims[a] - dims[a]) / 2;
        }
        Ok(Self { origin, dims })
    }

    pub fn whole(volume_dims: [usize; 3]) -> Self {
        Self {
            origin: [0; 3],
            dims: volume_dims,
        }
    }

    pub fn validate(&self, volume_dims: [usize; 3]) -> Result<()> {
        for a in 0..3 {
            if self.dims[a] == 0 || self.origin[a] + self.dims[a] > volume_dims[a] {
                return Err(Error::Geometry(format!(
                    "region at {:?} of {:?} exceeds volume {volume_dims:?}",
                    self.origin, self.dims
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.origin[a] && p[a] < self.origin[a] + self.dims[a])
    }
}

/// Patch origins along one axis: `0, stride, 2·stride, …` plus a final
/// origin clamped to `extent − patch` when the stride does not land there.
pub fn axis_origins(extent: usize, patch: usize, stride: usize) -> Result<Vec<usize>> {
    if stride == 0 || stride > patch {
        return Err(Error::Geometry(format!(
            "grid stride {stride} must be in 1..={patch} to cover the region"
        )));
    }
    if patch == 0 || patch > extent {
        return Err(Error::Geometry(format!(
            "patch {patch} larger than region extent {extent}"
        )));
    }
    let last = extent - patch;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if *out.last().unwrap() != last {
        out.push(last);
    }
    Ok(out)
}

/// Origins (relative to the region corner) of a patch grid covering `roi_dims`.
///
/// Ordered with x fastest, matching voxel scan order.
pub fn patch_grid(roi_dims: [usize; 3], patch_size: usize, stride: usize) -> Result<Vec<[usize; 3]>> {
    let xs = axis_origins(roi_dims[0], patch_size, stride)?;
    let ys = axis_origins(roi_dims[1], patch_size, stride)?;
    let zs = axis_origins(roi_dims[2], patch_size, stride)?;
    let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &z in &zs {
        for &y in &ys {
            for &x in &xs {
                out.push([x, y, z]);
            }
        }
    }
    Ok(out)
}

/// Copies a patch out as a `(size, size, size)` tensor of HU values in
/// `(z, y, x)` order.
pub fn extract_patch(v: &Volume, spec: &PatchSpec) -> Result<Tensor<f32>> {
    spec.validate(v.dims())?;
    let s = spec.size;
    let [ox, oy, oz] = spec.origin;
    let mut out = Vec::with_capacity(s * s * s);
    for z in 0..s {
        for y in 0..s {
            let start = v.index([ox, oy + y, oz + z]);
            out.extend(v.data()[start..start + s].iter().map(|&h| h as f32));
        }
    }
    Tensor::new(vec![s, s, s], out)
}

/// Writes HU values back; with `mask_only` just the centered mask sub-box.
pub fn write_patch(v: &mut Volume, spec: &PatchSpec, patch: &Tensor<f32>, mask_only: bool) -> Result<()> {
    spec.validate(v.dims())?;
    let s = spec.size;
    if patch.len() != s * s * s {
        return Err(Error::Shape(format!(
            "patch tensor {:?} does not match patch size {s}",
            patch.shape()
        )));
    }
    let (lo, hi) = if mask_only {
        (spec.mask_offset(), spec.mask_offset() + spec.mask_size)
    } else {
        (0, s)
    };
    let [ox, oy, oz] = spec.origin;
    for z in lo..hi {
        for y in lo..hi {
            for x in lo..hi {
                let value = patch.data()[(z * s + y) * s + x];
                v.set([ox + x, oy + y, oz + z], quantize_hu(value as f64));
            }
        }
    }
    Ok(())
}

/// Sets the centered `mask_size³` box of the trailing three axes to `fill`.
pub fn apply_inpainting_mask(patch: &Tensor<f32>, mask_size: usize, fill: f32) -> Result<Tensor<f32>> {
    let shape = patch.shape();
    if shape.len() < 3 {
        return Err(Error::Shape(format!("patch must be ≥ 3D, got {shape:?}")));
    }
    let r = shape.len();
    let (d, h, w) = (shape[r - 3], shape[r - 2], shape[r - 1]);
    let [bz, by, bx] = centered_box([d, h, w], mask_size)?;
    let mut out = patch.clone();
    let vol = d * h * w;
    for chunk in out.data_mut().chunks_mut(vol) {
        for z in bz.0..bz.1 {
            for y in by.0..by.1 {
                let row = (z * h + y) * w;
                chunk[row + bx.0..row + bx.1].fill(fill);
            }
        }
    }
    Ok(out)
}

/// Default mask fill: normalized 0 HU (water).
pub fn default_fill() -> f32 {
    normalize_hu(0.0) as f32
}

/// Axes to mirror in [`flip_augment`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlipAxes {
    pub x: bool,
    pub y: bool,
    pub z: bool,
}

impl FlipAxes {
    /// The eight flip combinations, identity first.
    pub fn all() -> [FlipAxes; 8] {
        std::array::from_fn(|i| FlipAxes {
            x: i & 1 != 0,
            y: i & 2 != 0,
            z: i & 4 != 0,
        })
    }

    pub fn is_identity(&self) -> bool {
        !(self.x || self.y || self.z)
    }
}

/// Mirrors the trailing `(z, y, x)` axes selected by `axes`.
pub fn flip_augment(patch: &Tensor<f32>, axes: FlipAxes) -> Result<Tensor<f32>> {
    let shape = patch.shape();
    if shape.len() < 3 {
        return Err(Error::Shape(format!("patch must be ≥ 3D, got {shape:?}")));
    }
    if axes.is_identity() {
        return Ok(patch.clone());
    }
    let r = shape.len();
    let (d, h, w) = (shape[r - 3], shape[r - 2], shape[r - 1]);
    let vol = d * h * w;
    let src = patch.data();
    let mut out = vec![0.0f32; src.len()];
    for (c, chunk) in out.chunks_mut(vol).enumerate() {
        let base = c * vol;
        for z in 0..d {
            let sz = if axes.z { d - 1 - z } else { z };
            for y in 0..h {
                let sy = if axes.y { h - 1 - y } else { y };
                for x in 0..w {
                    let sx = if axes.x { w - 1 - x } else { x };
                    chunk[(z * h + y) * w + x] = src[base + (sz * h + sy) * w + sx];
                }
            }
        }
    }
    Tensor::new(shape.to_vec(), out)
}

/// Whole volume as a normalized `(nz, ny, nx)` tensor.
pub fn normalize_volume(v: &Volume) -> Tensor<f32> {
    let [nx, ny, nz] = v.dims();
    Tensor::new(
        vec![nz, ny, nx],
        v.data().iter().map(|&h| normalize_hu(h as f64) as f32).collect(),
    )
    .expect("volume dims are consistent")
}

/// Inverse of [`normalize_volume`], rounding to the HU grid.
pub fn denormalize_volume(t: &Tensor<f32>, spacing_mm: f64) -> Result<Volume> {
    let &[nz, ny, nx] = t.shape() else {
        return Err(Error::Shape(format!("expected (z, y, x) tensor, got {:?}", t.shape())));
    };
    Volume::new(
        [nx, ny, nz],
        spacing_mm,
        t.data()
            .iter()
            .map(|&x| quantize_hu(super::volume::denormalize_hu(x as f64)))
            .collect(),
    )
}

/// Elementwise HU → normalized units.
pub fn normalize_tensor(t: &Tensor<f32>) -> Tensor<f32> {
    t.map(|h| normalize_hu(h as f64) as f32)
}

/// Elementwise normalized units → HU.
pub fn denormalize_tensor(t: &Tensor<f32>) -> Tensor<f32> {
    t.map(|x| super::volume::denormalize_hu(x as f64) as f32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(dims: [usize; 3]) -> Volume {
        let n: usize = dims.iter().product();
        Volume::new(dims, 1.0, (0..n).map(|i| (i % 3000) as i16).collect()).unwrap()
    }

    #[test]
    fn grid_counts() {
        assert_eq!(patch_grid([64, 64, 64], 32, 16).unwrap().len(), 27);
        // 160: 0,16,…,128 → 9 origins; 64: 0,16,32 → 3 origins
        assert_eq!(axis_origins(160, 32, 16).unwrap().len(), 9);
        assert_eq!(patch_grid([160, 160, 64], 32, 16).unwrap().len(), 243);
        assert_eq!(axis_origins(33, 32, 16).unwrap(), vec![0, 1]);
        assert!(axis_origins(31, 32, 16).is_err());
        assert!(axis_origins(64, 32, 0).is_err());
        assert!(axis_origins(64, 8, 9).is_err());
    }

    #[test]
    fn grid_covers_every_voxel() {
        for (extent, patch, stride) in [(50, 16, 8), (33, 32, 16), (17, 5, 4), (8, 8, 3)] {
            let o = axis_origins(extent, patch, stride).unwrap();
            assert!(o.windows(2).all(|w| w[0] < w[1]));
            for v in 0..extent {
                assert!(o.iter().any(|&s| v >= s && v < s + patch), "voxel {v}");
            }
        }
    }

    #[test]
    fn patch_spec_rejects_uncentered_mask() {
        assert!(PatchSpec::new([0; 3], 32, 15).is_err());
        assert!(PatchSpec::new([0; 3], 8, 16).is_err());
        let s = PatchSpec::new([10, 0, 0], 32, 16).unwrap();
        assert!(s.validate([41, 32, 32]).is_err());
        assert!(s.validate([42, 32, 32]).is_ok());
    }

    #[test]
    fn extract_matches_linear_index() {
        let v = ramp([10, 9, 8]);
        let spec = PatchSpec::new([0, 0, 0], 4, 2).unwrap();
        let p = extract_patch(&v, &spec).unwrap();
        for z in 0..4 {
            for y in 0..4 {
                for x in 0..4 {
                    let expected = x + 10 * (y + 9 * z);
                    assert_eq!(p.data()[(z * 4 + y) * 4 + x], expected as f32);
                }
            }
        }
    }

    #[test]
    fn extract_then_write_is_identity() {
        let v = ramp([12, 12, 12]);
        let spec = PatchSpec::new([2, 3, 4], 8, 4).unwrap();
        let p = extract_patch(&v, &spec).unwrap();
        let mut w = v.clone();
        write_patch(&mut w, &spec, &p, false).unwrap();
        assert_eq!(w, v);
        write_patch(&mut w, &spec, &p, true).unwrap();
        assert_eq!(w, v);
    }

    #[test]
    fn mask_only_write_changes_mask_voxels_only() {
        let v = Volume::filled([40, 40, 40], 100).unwrap();
        let spec = PatchSpec::new([3, 4, 5], 32, 16).unwrap();
        let mut w = v.clone();
        write_patch(&mut w, &spec, &Tensor::zeros(&[32, 32, 32]), true).unwrap();
        let changed = v.diff_indices(&w);
        assert_eq!(changed.len(), 16 * 16 * 16);
        assert!(changed.iter().all(|&i| spec.mask_contains(w.coords(i))));
    }

    #[test]
    fn inpainting_mask_counts_and_idempotence() {
        let ones = Tensor::full(&[32, 32, 32], 1.0f32);
        let m = apply_inpainting_mask(&ones, 16, 0.0).unwrap();
        assert_eq!(m.data().iter().filter(|&&v| v == 0.0).count(), 4096);
        assert_eq!(apply_inpainting_mask(&m, 16, 0.0).unwrap(), m);
        let filled = Tensor::full(&[32, 32, 32], 0.25f32);
        assert_eq!(apply_inpainting_mask(&filled, 16, 0.25).unwrap(), filled);
    }

    #[test]
    fn flip_definition_and_involution() {
        let p = Tensor::new(vec![1, 1, 2], vec![1.0f32, 2.0]).unwrap();
        let fx = FlipAxes { x: true, ..Default::default() };
        assert_eq!(flip_augment(&p, fx).unwrap().data(), &[2.0, 1.0]);
        let q = Tensor::from_fn(&[3, 4, 5], |i| i as f32);
        for axes in FlipAxes::all() {
            let twice = flip_augment(&flip_augment(&q, axes).unwrap(), axes).unwrap();
            assert_eq!(twice, q);
        }
    }

    #[test]
    fn flip_of_point_symmetric_patch_is_identity() {
        let n = 4;
        let p = Tensor::from_fn(&[n, n, n], |i| {
            let (z, y, x) = (i / 16, (i / 4) % 4, i % 4);
            let (a, b, c) = (n - 1 - z, n - 1 - y, n - 1 - x);
            ((z * y * x).min(a * b * c) + (z + y + x).min(a + b + c)) as f32
        });
        let all = FlipAxes { x: true, y: true, z: true };
        assert_eq!(flip_augment(&p, all).unwrap(), p);
    }

    #[test]
    fn fill_is_normalized_water() {
        assert!((default_fill() - 1024.0 / 4095.0).abs() < 1e-7);
    }
}
