use crate::error::{Error, Result};

/// Lowest representable HU value (air floor of a 12-bit CT range).
pub const HU_MIN: i16 = -1024;
/// Highest representable HU value.
pub const HU_MAX: i16 = 3071;
/// Width of the HU range used by [`normalize_hu`].
pub const HU_RANGE: f64 = 4095.0;
/// Default isotropic voxel edge in millimetres.
pub const DEFAULT_SPACING_MM: f64 = 0.47;

pub fn clamp_hu(v: i16) -> i16 {
    v.clamp(HU_MIN, HU_MAX)
}

/// Maps HU to `[0, 1]`: `(hu + 1024) / 4095`.
pub fn normalize_hu(hu: f64) -> f64 {
    (hu - HU_MIN as f64) / HU_RANGE
}

/// Inverse of [`normalize_hu`].
pub fn denormalize_hu(x: f64) -> f64 {
    x * HU_RANGE + HU_MIN as f64
}

/// Rounds a real HU value onto the stored integer grid, clamped to range.
pub fn quantize_hu(hu: f64) -> i16 {
    if hu.is_nan() {
        return 0;
    }
    hu.round().clamp(HU_MIN as f64, HU_MAX as f64) as i16
}

/// Scalar CT volume in Hounsfield units with isotropic spacing.
///
/// Voxel `(x, y, z)` lives at `x + nx·(y + ny·z)`: x fastest, z slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    spacing_mm: f64,
    data: Vec<i16>,
}

impl Volume {
    /// Builds a volume, clamping every value into `[HU_MIN, HU_MAX]`.
    pub fn new(dims: [usize; 3], spacing_mm: f64, mut data: Vec<i16>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Geometry(format!("volume dims must be ≥ 1, got {dims:?}")));
        }
        if !(spacing_mm.is_finite() && spacing_mm > 0.0) {
            return Err(Error::Geometry(format!(
                "spacing must be positive, got {spacing_mm}"
            )));
        }
        let n = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::DimensionOverflow(format!("{dims:?}")))?;
        if n != data.len() {
            return Err(Error::Geometry(format!(
                "dims {dims:?} need {n} voxels, got {}",
                data.len()
            )));
        }
        data.iter_mut().for_each(|v| *v = clamp_hu(*v));
        Ok(Self {
            dims,
            spacing_mm,
            data,
        })
    }

    pub fn filled(dims: [usize; 3], hu: i16) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, DEFAULT_SPACING_MM, vec![hu; n])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing_mm(&self) -> f64 {
        self.spacing_mm
    }

    pub fn data(&self) -> &[i16] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, [x, y, z]: [usize; 3]) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn get(&self, p: [usize; 3]) -> i16 {
        self.data[self.index(p)]
    }

    /// Stores a value, clamped into range.
    pub fn set(&mut self, p: [usize; 3], hu: i16) {
        let i = self.index(p);
        self.data[i] = clamp_hu(hu);
    }

    pub fn contains(&self, p: [isize; 3]) -> bool {
        p.iter()
            .zip(&self.dims)
            .all(|(&c, &d)| c >= 0 && (c as usize) < d)
    }

    /// Value of the voxel whose center is nearest to `p`; `None` outside.
    pub fn sample_nearest(&self, p: [f64; 3]) -> Option<i16> {
        let mut q = [0usize; 3];
        for a in 0..3 {
            let r = p[a].round();
            if !(r >= 0.0 && r < self.dims[a] as f64) {
                return None;
            }
            q[a] = r as usize;
        }
        Some(self.get(q))
    }

    /// Trilinear HU sample at a continuous voxel coordinate; `None` outside.
    pub fn sample_trilinear(&self, p: [f64; 3]) -> Option<f64> {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let max = (self.dims[a] - 1) as f64;
            if !(p[a] >= 0.0 && p[a] <= max) {
                return None;
            }
            let f = p[a].floor().min((self.dims[a].max(2) - 2) as f64).max(0.0);
            base[a] = f as usize;
            frac[a] = p[a] - f;
        }
        let mut acc = 0.0;
        for corner in 0..8usize {
            let mut w = 1.0;
            let mut q = [0usize; 3];
            for a in 0..3 {
                let bit = (corner >> a) & 1;
                q[a] = (base[a] + bit).min(self.dims[a] - 1);
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                acc += w * self.get(q) as f64;
            }
        }
        Some(acc)
    }

    pub fn max_hu(&self) -> i16 {
        self.data.iter().copied().max().unwrap_or(HU_MIN)
    }

    /// Adds a constant to every voxel, clamping.
    pub fn shifted(&self, delta: i16) -> Self {
        let mut out = self.clone();
        out.data
            .iter_mut()
            .for_each(|v| *v = clamp_hu(v.saturating_add(delta)));
        out
    }

    /// Voxel indices whose values differ between two equally sized volumes.
    pub fn diff_indices(&self, other: &Volume) -> Vec<usize> {
        assert_eq!(self.dims, other.dims);
        self.data
            .iter()
            .zip(&other.data)
            .enumerate()
            .filter_map(|(i, (a, b))| (a != b).then_some(i))
            .collect()
    }
}
