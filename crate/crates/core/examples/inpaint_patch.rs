//! Masks one patch, fills it by mean fill and by a briefly trained network,
//! and writes the original | masked | restored triptych.
use ct_inpaint::ctvol::{default_fill, PatchSpec};
use ct_inpaint::eval::{eval_restoration, restoration_triptych, EvalRegion};
use ct_inpaint::network::{ArchKind, MeanFill, NetworkConfig};
use ct_inpaint::phantom::RandomPhantom;
use ct_inpaint::trainer::{build_dataset, synthetic_volumes, train_with, TrainingConfig};

fn main() -> ct_inpaint::Result<()> {
    let opts = RandomPhantom::default();
    let train = build_dataset(synthetic_volumes(&opts, 0..4)?, [32; 3], 16, 8, 8, true)?;
    let eval = build_dataset(synthetic_volumes(&opts, 100..102)?, [32; 3], 16, 8, 8, false)?;

    let mut cfg = TrainingConfig::paper(NetworkConfig::desk(ArchKind::DenseUnet), 80);
    cfg.lr = 1e-3;
    cfg.mask_size = 8;
    let out = train_with(&cfg, &train, |_, _| {})?;

    for (label, mse) in [
        ("mean-fill", eval_restoration(&MeanFill, &[], &eval, EvalRegion::Mask)?),
        ("dense-unet", eval_restoration(&out.model, &out.trained_on, &eval, EvalRegion::Mask)?),
    ] {
        let s = mse.summary();
        println!("{label:<10} masked MSE mean {:>9.1} HU²  (min {:.1}, max {:.1})", s.mean, s.min, s.max);
    }

    let spec = PatchSpec::new([8, 8, 8], 16, 8)?;
    let img = restoration_triptych(&eval.volumes[0].volume, &spec, &out.model, default_fill())?;
    let path = std::env::temp_dir().join("triptych.pgm");
    std::fs::write(&path, img).map_err(|e| ct_inpaint::Error::Format(e.to_string()))?;
    println!("wrote {}", path.display());
    Ok(())
}
