//! Finite-difference checks of the convolution and of a whole network.
use ct_inpaint::network::{check_model_gradients, ArchKind, Model, NetworkConfig};
use ct_inpaint::tensor::gradcheck::check_gradients;
use ct_inpaint::tensor::{he_normal, seeded_rng, Tensor};

fn main() -> ct_inpaint::Result<()> {
    let mut rng = seeded_rng(3);
    let x: Tensor<f64> = he_normal(&[2, 3, 6, 6, 6], &mut rng);
    let w: Tensor<f64> = he_normal(&[4, 3, 3, 3, 3], &mut rng);
    let b: Tensor<f64> = he_normal(&[4], &mut rng);
    let r = check_gradients(&[x, w, b], 20, 1e-6, |tape, v| {
        let y = tape.conv3d(v[0], v[1], v[2], 1)?;
        let y = tape.relu(y);
        Ok(tape.sum(y))
    })?;
    println!("conv3d + relu: {} probes, max relative error {:.2e}", r.probes, r.max_rel_err);

    for kind in ArchKind::ALL {
        let mut model = Model::<f64>::build(&NetworkConfig::desk(kind).with_seed(1))?;
        // a zero head would hide the upstream gradients
        let head = model.params.get_mut("head.conv.weight")?;
        *head = he_normal(head.shape(), &mut rng);
        let x: Tensor<f64> = he_normal(&[2, 1, 8, 8, 8], &mut rng);
        let t: Tensor<f64> = he_normal(&[2, 1, 8, 8, 8], &mut rng);
        let r = check_model_gradients(&model, &x, &t, &["stem.weight", "head.conv.weight"], 8, 1e-6)?;
        println!("{kind:<12} {} probes, max relative error {:.2e}", r.probes, r.max_rel_err);
    }
    Ok(())
}
