//! Builds every architecture at both presets and reports sizes and shapes.
use ct_inpaint::network::{ArchKind, Model, NetworkConfig};
use ct_inpaint::tensor::Tensor;

fn main() -> ct_inpaint::Result<()> {
    for (preset, make, size) in [
        ("desk", NetworkConfig::desk as fn(ArchKind) -> NetworkConfig, 16),
        ("paper", NetworkConfig::paper, 32),
    ] {
        for kind in ArchKind::ALL {
            let model = Model::<f32>::build(&make(kind))?;
            let x = Tensor::<f32>::zeros(&[1, 1, size, size, size]);
            let t = std::time::Instant::now();
            let y = model.predict(&x)?;
            println!(
                "{preset:<5} {kind:<12} {:>8} parameters  {:>3} layers  out {:?}  {:.2?}",
                model.params.count(),
                model.spec.layers.len(),
                y.shape(),
                t.elapsed()
            );
        }
    }
    Ok(())
}
