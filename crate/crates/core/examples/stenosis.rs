//! Percent stenosis on the suite: ground truth, the blooming-inflated
//! reading of the raw volume, and the reading after mean-fill removal.
use ct_inpaint::eval::{experiment2, lesion_windows, measure_stenosis, MeasureConfig};
use ct_inpaint::network::MeanFill;
use ct_inpaint::phantom::phantom_suite;
use ct_inpaint::removal::RemovalConfig;

fn main() -> ct_inpaint::Result<()> {
    let suite = phantom_suite(3)?;
    let cfg = MeasureConfig::default();
    for p in &suite {
        let (reference, lesion) = lesion_windows(&p.truth, 0);
        let got = measure_stenosis(&p.volume, &p.truth.centerline(), reference, lesion, &cfg)?;
        println!("{:<9} reference {reference:.1?} lesion {lesion:.1?}  truth {:>5.1}  measured {got:>5.1}", p.name, p.truth.stenosis[0]);
    }
    let removal = RemovalConfig { patch_size: 16, mask_size: 8, ..RemovalConfig::default() };
    let report = experiment2(&suite, &MeanFill, &removal, &cfg)?;
    print!("{}", report.to_csv());
    if let Some((o, r)) = report.median_errors() {
        println!("median |error| original {o:.1}, after mean-fill removal {r:.1}");
    }
    Ok(())
}
