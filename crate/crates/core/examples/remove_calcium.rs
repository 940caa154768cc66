//! Sliding-window calcium removal on the suite.
//!
//! With no argument the mask is filled with the surrounding mean; pass a
//! checkpoint path (with its `.arch` sidecar) to use a trained network,
//! averaged over flips, with a one-voxel halo around each detection.
use ct_inpaint::network::{FlipAveraged, Inpainter, MeanFill, Model};
use ct_inpaint::phantom::phantom_suite;
use ct_inpaint::removal::{detect_calcium, remove_calcium, RemovalConfig};
use ct_inpaint::ctvol::RegionOfInterest;

fn main() -> ct_inpaint::Result<()> {
    let model = std::env::args().nth(1).map(Model::<f32>::load).transpose()?;
    let (inpainter, cfg): (Box<dyn Inpainter>, RemovalConfig) = match &model {
        Some(m) => (Box::new(FlipAveraged(m)), RemovalConfig { patch_size: 24, mask_size: 8, halo: 1, ..RemovalConfig::default() }),
        None => (Box::new(MeanFill), RemovalConfig { patch_size: 16, mask_size: 8, ..RemovalConfig::default() }),
    };
    for p in phantom_suite(3)? {
        let before = detect_calcium(&p.volume, &RegionOfInterest::whole(p.volume.dims()), cfg.threshold_hu)?.len();
        let out = remove_calcium(&p.volume, inpainter.as_ref(), &cfg)?;
        let r = &out.report;
        println!(
            "{:<9} {:>4} calcified voxels  rounds {:>2}  steps {:>3}  changed {:>5}  residual {:>3}  converged {}",
            p.name,
            before,
            r.iterations,
            r.executed().len(),
            r.voxels_removed,
            r.residual,
            r.converged
        );
    }
    Ok(())
}
