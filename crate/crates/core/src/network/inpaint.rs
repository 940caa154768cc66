use crate::ctvol::{flip_augment, FlipAxes};
use crate::error::{Error, Result};
use crate::tensor::{centered_box, Tensor};

use super::forward::Model;

/// Anything that fills the centered mask of normalized `(N, 1, D, H, W)`
/// patches. Implementations return a tensor of the input shape.
pub trait Inpainter: Sync {
    fn label(&self) -> String;
    fn inpaint(&self, masked: &Tensor<f32>, mask_size: usize) -> Result<Tensor<f32>>;
}

impl<T: Inpainter + ?Sized> Inpainter for &T {
    fn label(&self) -> String {
        (**self).label()
    }

    fn inpaint(&self, masked: &Tensor<f32>, mask_size: usize) -> Result<Tensor<f32>> {
        (**self).inpaint(masked, mask_size)
    }
}

impl Inpainter for Model<f32> {
    fn label(&self) -> String {
        self.spec.kind().to_string()
    }

    fn inpaint(&self, masked: &Tensor<f32>, _mask_size: usize) -> Result<Tensor<f32>> {
        self.predict(masked)
    }
}

/// Test-time augmentation: the mean of the wrapped inpainter's outputs over
/// all eight axis flips, each mapped back to the input orientation.
pub struct FlipAveraged<'a>(pub &'a dyn Inpainter);

impl Inpainter for FlipAveraged<'_> {
    fn label(&self) -> String {
        format!("{}+flips", self.0.label())
    }

    fn inpaint(&self, masked: &Tensor<f32>, mask_size: usize) -> Result<Tensor<f32>> {
        let mut acc = vec![0.0f32; masked.len()];
        let all = FlipAxes::all();
        for axes in all {
            let out = flip_augment(&self.0.inpaint(&flip_augment(masked, axes)?, mask_size)?, axes)?;
            for (a, v) in acc.iter_mut().zip(out.data()) {
                *a += v;
            }
        }
        let k = all.len() as f32;
        Tensor::new(masked.shape().to_vec(), acc.into_iter().map(|a| a / k).collect())
    }
}

/// Baseline that predicts each patch's unmasked-region mean inside the mask
/// and passes the context through unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanFill;

impl Inpainter for MeanFill {
    fn label(&self) -> String {
        "mean-fill".into()
    }

    fn inpaint(&self, masked: &Tensor<f32>, mask_size: usize) -> Result<Tensor<f32>> {
        let [n, c, d, h, w] = masked.dims5()?;
        let [bz, by, bx] = centered_box([d, h, w], mask_size)?;
        let inside = |z: usize, y: usize, x: usize| {
            (bz.0..bz.1).contains(&z) && (by.0..by.1).contains(&y) && (bx.0..bx.1).contains(&x)
        };
        let vol = d * h * w;
        let mut out = masked.clone();
        for chunk in out.data_mut().chunks_mut(vol).take(n * c) {
            let mut sum = 0.0f64;
            let mut count = 0usize;
            for z in 0..d {
                for y in 0..h {
                    for x in 0..w {
                        if !inside(z, y, x) {
                            sum += chunk[(z * h + y) * w + x] as f64;
                            count += 1;
                        }
                    }
                }
            }
            if count == 0 {
                return Err(Error::Shape("mask covers the whole patch; no context to average".into()));
            }
            let mean = (sum / count as f64) as f32;
            for z in bz.0..bz.1 {
                for y in by.0..by.1 {
                    let row = (z * h + y) * w;
                    chunk[row + bx.0..row + bx.1].fill(mean);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_fill_uses_context_only() {
        let t = Tensor::from_fn(&[1, 1, 4, 4, 4], |i| if i % 2 == 0 { 1.0 } else { 3.0 });
        let masked = crate::ctvol::apply_inpainting_mask(&t, 2, 100.0).unwrap();
        let out = MeanFill.inpaint(&masked, 2).unwrap();
        let [bz, by, bx] = centered_box([4, 4, 4], 2).unwrap();
        for z in 0..4 {
            for y in 0..4 {
                for x in 0..4 {
                    let i = (z * 4 + y) * 4 + x;
                    let m = (bz.0..bz.1).contains(&z) && (by.0..by.1).contains(&y) && (bx.0..bx.1).contains(&x);
                    let want = if m { 2.0 } else { masked.data()[i] };
                    assert_eq!(out.data()[i], want);
                }
            }
        }
        assert!(MeanFill.inpaint(&masked, 4).is_err());
    }

    #[test]
    fn flip_average_of_an_equivariant_fill_is_unchanged() {
        let t = Tensor::from_fn(&[2, 1, 6, 6, 6], |i| ((i * 37) % 11) as f32 / 11.0);
        let masked = crate::ctvol::apply_inpainting_mask(&t, 2, 0.5).unwrap();
        let plain = MeanFill.inpaint(&masked, 2).unwrap();
        let avg = FlipAveraged(&MeanFill).inpaint(&masked, 2).unwrap();
        assert_eq!(avg.shape(), plain.shape());
        for (a, b) in avg.data().iter().zip(plain.data()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert_eq!(FlipAveraged(&MeanFill).label(), "mean-fill+flips");
    }
}
