//! CT volumes: Hounsfield-unit semantics, patch geometry and file formats.

mod format;
mod patch;
mod volume;

pub use format::{
    decode_volume, encode_pgm_row, encode_volume, load_volume, save_pgm_slice, save_volume,
    CTV_MAGIC,
};
pub use patch::{
    apply_inpainting_mask, axis_origins, default_fill, denormalize_tensor, denormalize_volume,
    extract_patch, flip_augment, normalize_tensor, normalize_volume, patch_grid, write_patch,
    FlipAxes, PatchSpec, RegionOfInterest, MASK_SIZE, PATCH_SIZE, ROI_DIMS,
};
pub use volume::{
    clamp_hu, denormalize_hu, normalize_hu, quantize_hu, Volume, DEFAULT_SPACING_MM, HU_MAX,
    HU_MIN, HU_RANGE,
};
