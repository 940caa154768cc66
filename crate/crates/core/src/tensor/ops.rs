//! Forward/backward kernels for the non-convolution operators.

use crate::error::{Error, Result};

use super::{Element, Tensor};

/// Which voxels the MSE loss averages over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LossRegion {
    /// Every voxel of the output.
    #[default]
    Full,
    /// Only the centered cubic inpainting mask of the given edge length.
    MaskOnly { mask_size: usize },
}

/// Half-open per-axis bounds `[lo, hi)` of the centered mask inside a volume.
pub fn centered_box(spatial: [usize; 3], mask_size: usize) -> Result<[(usize, usize); 3]> {
    let mut out = [(0, 0); 3];
    for (axis, &extent) in spatial.iter().enumerate() {
        if mask_size == 0 || mask_size > extent || (extent - mask_size) % 2 != 0 {
            return Err(Error::Geometry(format!(
                "mask {mask_size} cannot be centered in extent {extent}"
            )));
        }
        let lo = (extent - mask_size) / 2;
        out[axis] = (lo, lo + mask_size);
    }
    Ok(out)
}

/// Per-voxel 0/1 selection weights of `region` for a `(D, H, W)` volume.
pub(crate) fn region_selector(spatial: [usize; 3], region: LossRegion) -> Result<Vec<bool>> {
    let [d, h, w] = spatial;
    match region {
        LossRegion::Full => Ok(vec![true; d * h * w]),
        LossRegion::MaskOnly { mask_size } => {
            let [bz, by, bx] = centered_box(spatial, mask_size)?;
            let mut sel = vec![false; d * h * w];
            for z in bz.0..bz.1 {
                for y in by.0..by.1 {
                    for x in bx.0..bx.1 {
                        sel[(z * h + y) * w + x] = true;
                    }
                }
            }
            Ok(sel)
        }
    }
}

pub(crate) fn maxpool_forward<T: Element>(
    input: &Tensor<T>,
    window: usize,
) -> Result<(Tensor<T>, Vec<usize>)> {
    let [n, c, d, h, w] = input.dims5()?;
    if window == 0 || d % window != 0 || h % window != 0 || w % window != 0 {
        return Err(Error::Shape(format!(
            "spatial dims {d}x{h}x{w} not divisible by pool window {window}"
        )));
    }
    let (od, oh, ow) = (d / window, h / window, w / window);
    let x = input.data();
    let mut out = Vec::with_capacity(n * c * od * oh * ow);
    let mut argmax = Vec::with_capacity(out.capacity());
    for nc in 0..n * c {
        let base = nc * d * h * w;
        for z in 0..od {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut best = base + ((z * window) * h + y * window) * w + xo * window;
                    for dz in 0..window {
                        for dy in 0..window {
                            let row = base + ((z * window + dz) * h + y * window + dy) * w;
                            for dx in 0..window {
                                let idx = row + xo * window + dx;
                                // strict comparison keeps the first maximum in scan order
                                if x[idx] > x[best] {
                                    best = idx;
                                }
                            }
                        }
                    }
                    out.push(x[best]);
                    argmax.push(best);
                }
            }
        }
    }
    Ok((Tensor::new(vec![n, c, od, oh, ow], out)?, argmax))
}

pub(crate) fn upsample_forward<T: Element>(input: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    let [n, c, d, h, w] = input.dims5()?;
    if factor == 0 {
        return Err(Error::Shape("upsample factor must be positive".into()));
    }
    let (od, oh, ow) = (d * factor, h * factor, w * factor);
    let x = input.data();
    let mut out = Vec::with_capacity(n * c * od * oh * ow);
    for nc in 0..n * c {
        let base = nc * d * h * w;
        for z in 0..od {
            for y in 0..oh {
                let row = base + ((z / factor) * h + y / factor) * w;
                out.extend((0..ow).map(|xo| x[row + xo / factor]));
            }
        }
    }
    Tensor::new(vec![n, c, od, oh, ow], out)
}

pub(crate) fn upsample_backward<T: Element>(
    grad_out: &Tensor<T>,
    in_shape: &[usize],
    factor: usize,
) -> Tensor<T> {
    let (d, h, w) = (in_shape[2], in_shape[3], in_shape[4]);
    let (oh, ow) = (h * factor, w * factor);
    let od = d * factor;
    let nc = in_shape[0] * in_shape[1];
    let g = grad_out.data();
    let mut gx = Tensor::zeros(in_shape);
    let gxd = gx.data_mut();
    for p in 0..nc {
        let ibase = p * d * h * w;
        let obase = p * od * oh * ow;
        for z in 0..od {
            for y in 0..oh {
                let irow = ibase + ((z / factor) * h + y / factor) * w;
                let orow = obase + (z * oh + y) * ow;
                for xo in 0..ow {
                    gxd[irow + xo / factor] += g[orow + xo];
                }
            }
        }
    }
    gx
}

/// Per-channel statistics of one train-mode batch-norm call.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats<T = f32> {
    pub mean: Vec<T>,
    /// Biased (population) variance used for normalization.
    pub var: Vec<T>,
    /// Number of values per channel.
    pub count: usize,
}

/// Running mean/variance tracked for eval-mode batch norm.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats<T = f32> {
    pub mean: Tensor<T>,
    pub var: Tensor<T>,
}

impl<T: Element> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: Tensor::zeros(&[channels]),
            var: Tensor::full(&[channels], T::one()),
        }
    }

    /// `running = (1 − momentum)·running + momentum·batch`, with the
    /// unbiased batch variance.
    pub fn update(&mut self, stats: &BatchStats<T>, momentum: T) {
        let keep = T::one() - momentum;
        let m = T::from_usize(stats.count).unwrap();
        let correction = if stats.count > 1 {
            m / (m - T::one())
        } else {
            T::one()
        };
        for (r, &b) in self.mean.data_mut().iter_mut().zip(&stats.mean) {
            *r = keep * *r + momentum * b;
        }
        for (r, &b) in self.var.data_mut().iter_mut().zip(&stats.var) {
            *r = keep * *r + momentum * b * correction;
        }
    }
}

pub(crate) fn channel_stats<T: Element>(input: &Tensor<T>) -> Result<BatchStats<T>> {
    let [n, c, d, h, w] = input.dims5()?;
    let vol = d * h * w;
    let count = n * vol;
    if count == 0 {
        return Err(Error::Shape("batch norm over an empty batch".into()));
    }
    let x = input.data();
    let m = T::from_usize(count).unwrap();
    let mut mean = vec![T::zero(); c];
    let mut var = vec![T::zero(); c];
    for ch in 0..c {
        let mut s = T::zero();
        for b in 0..n {
            s += x[(b * c + ch) * vol..(b * c + ch + 1) * vol].iter().copied().sum::<T>();
        }
        let mu = s / m;
        let mut q = T::zero();
        for b in 0..n {
            for &v in &x[(b * c + ch) * vol..(b * c + ch + 1) * vol] {
                q += (v - mu) * (v - mu);
            }
        }
        mean[ch] = mu;
        var[ch] = q / m;
    }
    Ok(BatchStats { mean, var, count })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_box_requires_even_margin() {
        assert_eq!(centered_box([32, 32, 32], 16).unwrap(), [(8, 24); 3]);
        assert_eq!(centered_box([16, 8, 4], 4).unwrap(), [(6, 10), (2, 6), (0, 4)]);
        assert!(centered_box([16, 16, 16], 5).is_err());
        assert!(centered_box([8, 8, 8], 10).is_err());
        assert!(centered_box([8, 8, 8], 0).is_err());
    }

    #[test]
    fn mask_selector_counts() {
        let sel = region_selector([8, 8, 8], LossRegion::MaskOnly { mask_size: 4 }).unwrap();
        assert_eq!(sel.iter().filter(|&&s| s).count(), 64);
        assert!(sel[(4 * 8 + 4) * 8 + 4] && !sel[0]);
    }

    #[test]
    fn channel_stats_are_population_moments() {
        // channel 0 holds 0..8 across two samples, channel 1 is constant
        let mut data = vec![0.0f64; 16];
        for b in 0..2 {
            for i in 0..4 {
                data[b * 8 + i] = (b * 4 + i) as f64;
                data[b * 8 + 4 + i] = 3.0;
            }
        }
        let x = Tensor::new(vec![2, 2, 1, 2, 2], data).unwrap();
        let s = channel_stats(&x).unwrap();
        assert_eq!(s.count, 8);
        assert_eq!(s.mean, vec![3.5, 3.0]);
        assert_eq!(s.var, vec![5.25, 0.0]);

        let mut r = RunningStats::<f64>::new(2);
        r.update(&s, 0.1);
        assert!((r.mean.data()[0] - 0.35).abs() < 1e-15);
        // unbiased: 5.25 · 8/7 = 6
        assert!((r.var.data()[0] - (0.9 + 0.6)).abs() < 1e-15);
        assert!((r.var.data()[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn upsample_repeats_values() {
        let x = Tensor::new(vec![1, 1, 1, 1, 2], vec![1.0f64, 2.0]).unwrap();
        let y = upsample_forward(&x, 2).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2, 4]);
        assert_eq!(&y.data()[..4], &[1.0, 1.0, 2.0, 2.0]);
    }
}
