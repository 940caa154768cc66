//! HU clamping, normalisation and the CTV/PGM file formats.
use ct_inpaint::ctvol::{
    clamp_hu, decode_volume, encode_volume, normalize_hu, normalize_volume, save_pgm_slice, Volume,
    CTV_MAGIC, HU_MAX, HU_MIN,
};

fn main() -> ct_inpaint::Result<()> {
    println!("HU range [{HU_MIN}, {HU_MAX}], magic {:?}", std::str::from_utf8(&CTV_MAGIC).unwrap());
    for hu in [-3000i16, -1024, 0, 350, 2400, 3071, 4000] {
        println!("{hu:>6} HU -> clamped {:>5} -> normalized {:.4}", clamp_hu(hu), normalize_hu(clamp_hu(hu) as f64));
    }

    let dims = [8, 6, 4];
    let data = (0..dims.iter().product::<usize>()).map(|i| (i as i16) * 40 - 1000).collect();
    let v = Volume::new(dims, 0.5, data)?;
    let bytes = encode_volume(&v);
    let back = decode_volume(&bytes)?;
    assert_eq!(back, v);
    println!("{} voxels -> {} bytes, round trip exact", v.len(), bytes.len());

    let t = normalize_volume(&v);
    println!("tensor shape {:?}, range {:.3}..{:.3}", t.shape(), t.data()[0], t.data()[t.len() - 1]);

    let dir = std::env::temp_dir().join("ct_inpaint_example");
    std::fs::create_dir_all(&dir).map_err(|e| ct_inpaint::Error::Format(e.to_string()))?;
    save_pgm_slice(&v, 2, dir.join("slice.pgm"))?;
    println!("wrote {}", dir.join("slice.pgm").display());
    Ok(())
}
