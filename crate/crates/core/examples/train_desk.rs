//! Trains a desk-sized Dense-Unet for a few steps and saves a checkpoint.
//!
//! `cargo run --release --example train_desk -- 200` trains for 200 steps.
use ct_inpaint::network::{ArchKind, NetworkConfig};
use ct_inpaint::phantom::RandomPhantom;
use ct_inpaint::trainer::{build_dataset, synthetic_volumes, train_with, TrainingConfig};

fn main() -> ct_inpaint::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let volumes = synthetic_volumes(&RandomPhantom::default(), 0..4)?;
    let data = build_dataset(volumes, [32; 3], 16, 8, 8, true)?;
    println!("{} training patches (with flips)", data.len());

    let mut cfg = TrainingConfig::paper(NetworkConfig::desk(ArchKind::DenseUnet), steps);
    cfg.lr = 1e-3;
    cfg.mask_size = 8;
    let out = train_with(&cfg, &data, |step, loss| {
        if step % 10 == 0 {
            println!("step {step:>4}  loss {loss:.3e}");
        }
    })?;
    let path = std::env::temp_dir().join("desk.duw");
    out.model.save(&path)?;
    println!("saved {} (trained on {} volumes)", path.display(), out.trained_on.len());
    Ok(())
}
