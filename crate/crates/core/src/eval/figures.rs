use crate::ctvol::{
    apply_inpainting_mask, denormalize_tensor, encode_pgm_row, extract_patch, normalize_tensor, PatchSpec, Volume,
};
use crate::error::Result;
use crate::network::Inpainter;
use crate::tensor::Tensor;

fn patch_volume(t: &Tensor<f32>, size: usize, spacing: f64) -> Result<Volume> {
    // (z, y, x) patch order is the volume's storage order
    Volume::new(
        [size; 3],
        spacing,
        t.data().iter().map(|&h| crate::ctvol::quantize_hu(h as f64)).collect(),
    )
}

/// Middle axial slice of a patch as original | masked | restored, a 16-bit
/// PGM image.
pub fn restoration_triptych(volume: &Volume, spec: &PatchSpec, inpainter: &dyn Inpainter, fill: f32) -> Result<Vec<u8>> {
    let s = spec.size;
    let hu = extract_patch(volume, spec)?;
    let x = normalize_tensor(&hu).reshape(vec![1, 1, s, s, s])?;
    let masked = apply_inpainting_mask(&x, spec.mask_size, fill)?;
    let restored = inpainter.inpaint(&masked, spec.mask_size)?;
    let sp = volume.spacing_mm();
    let a = patch_volume(&hu, s, sp)?;
    let b = patch_volume(&denormalize_tensor(&masked), s, sp)?;
    let c = patch_volume(&denormalize_tensor(&restored), s, sp)?;
    let z = s / 2;
    encode_pgm_row(&[(&a, z), (&b, z), (&c, z)])
}

/// Axial slice `z` of two volumes side by side (before | after).
pub fn volume_diptych(before: &Volume, after: &Volume, z: usize) -> Result<Vec<u8>> {
    encode_pgm_row(&[(before, z), (after, z)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::MeanFill;

    #[test]
    fn triptych_is_three_patches_wide() {
        let v = Volume::filled([20, 20, 20], 100).unwrap();
        let spec = PatchSpec::new([2, 2, 2], 8, 4).unwrap();
        let img = restoration_triptych(&v, &spec, &MeanFill, 0.0).unwrap();
        assert!(img.starts_with(b"P5\n24 8\n4095\n"));
        assert_eq!(img.len(), b"P5\n24 8\n4095\n".len() + 24 * 8 * 2);
        let d = volume_diptych(&v, &v, 3).unwrap();
        assert!(d.starts_with(b"P5\n40 20\n"));
    }
}
