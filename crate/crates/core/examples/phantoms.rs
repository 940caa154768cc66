//! Renders the evaluation suite and a few random training phantoms.
use ct_inpaint::phantom::{phantom_suite, random_phantom, RandomPhantom, Tissue};

fn main() -> ct_inpaint::Result<()> {
    for p in phantom_suite(7)? {
        let q = &p.truth.plaques[0];
        println!(
            "{:<9} dims {:?}  plaque {:>4.1}..{:<4.1} quadrants {}  true stenosis {:>5.1}%  calcium voxels {:>4}  max {} HU",
            p.name,
            p.volume.dims(),
            q.interval.0,
            q.interval.1,
            q.quadrants,
            p.truth.stenosis[0],
            p.truth.count(Tissue::Plaque),
            p.volume.max_hu(),
        );
    }
    let opts = RandomPhantom::default();
    for seed in 0..4 {
        let (v, t) = random_phantom(&opts, seed)?;
        println!(
            "random-{seed}: lumen {:>5} wall {:>5} plaque {:>4} voxels, max {} HU",
            t.count(Tissue::Lumen),
            t.count(Tissue::Wall),
            t.count(Tissue::Plaque),
            v.max_hu()
        );
    }
    Ok(())
}
