use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ctvol::Volume;
use crate::error::Result;

use super::centerline::{Centerline, Vec3};
use super::generate::{generate_phantom, PhantomTruth};
use super::model::{PlaqueModel, VesselModel};

pub const SUITE_DIMS: [usize; 3] = [64, 48, 48];
pub const SUITE_NOISE_SIGMA_HU: f64 = 10.0;
/// Calcium intensity of the evaluation battery; bright enough that the
/// point-spread pushes adjacent lumen over the calcium threshold.
pub const SUITE_PLAQUE_HU: f64 = 2400.0;

/// One named phantom of the evaluation battery.
#[derive(Clone, Debug, PartialEq)]
pub struct SuitePhantom {
    pub name: String,
    pub volume: Volume,
    pub truth: PhantomTruth,
}

/// Vessel and plaque models of the battery, without rendering.
pub fn suite_models() -> Vec<(&'static str, VesselModel, Vec<PlaqueModel>)> {
    let plaque = |a: f64, b: f64, q: u8, f: f64| PlaqueModel::new((a, b), q, f).with_hu(SUITE_PLAQUE_HU);

    let straight = VesselModel::straight([5.0, 24.0, 24.0], [59.0, 24.0, 24.0], 4.0);

    let curve: Vec<Vec3> = (6..=58)
        .map(|x| {
            let t = (x - 6) as f64 / 52.0;
            [x as f64, 20.0 + 10.0 * (PI * t).sin(), 24.0 + 4.0 * (PI * t).cos()]
        })
        .collect();
    let n = curve.len();
    let curved = VesselModel::new(curve, vec![3.5; n]);

    let short = VesselModel::straight([6.0, 12.0, 16.0], [58.0, 36.0, 32.0], 4.0);
    let severe = VesselModel::straight([6.0, 20.0, 14.0], [58.0, 28.0, 34.0], 4.0);
    let mut long_plaque = plaque(8.0, 46.0, 2, 0.3);
    long_plaque.first_quadrant = 1;

    vec![
        ("straight", straight.clone(), vec![plaque(24.0, 31.0, 2, 0.3).with_soft_margin(5.0)]),
        ("curved", curved, vec![plaque(20.0, 27.0, 1, 0.0)]),
        ("short", short, vec![plaque(26.0, 31.0, 2, 0.5).with_soft_margin(4.0)]),
        ("long", straight, vec![long_plaque]),
        ("severe", severe, vec![plaque(22.0, 30.0, 3, 0.5).with_soft_margin(4.0)]),
    ]
}

/// Renders the battery: straight and curved vessels, a plaque shorter than
/// the mask, one longer than 32 voxels and a three-quadrant severe lesion.
/// The straight, short and severe narrowings run a few voxels past their
/// calcium, as in mixed plaques.
/// Phantom `i` draws its noise from `seed + i`.
pub fn phantom_suite(seed: u64) -> Result<Vec<SuitePhantom>> {
    render_suite(seed, SUITE_NOISE_SIGMA_HU)
}

/// [`phantom_suite`] with an explicit noise level (0 for noiseless).
pub fn render_suite(seed: u64, noise_sigma_hu: f64) -> Result<Vec<SuitePhantom>> {
    suite_models()
        .into_iter()
        .enumerate()
        .map(|(i, (name, vessel, plaques))| {
            let (volume, truth) =
                generate_phantom(&vessel, &plaques, SUITE_DIMS, noise_sigma_hu, seed.wrapping_add(i as u64))?;
            Ok(SuitePhantom {
                name: name.to_string(),
                volume,
                truth,
            })
        })
        .collect()
}

/// Options for [`random_phantom`].
#[derive(Clone, Debug, PartialEq)]
pub struct RandomPhantom {
    pub dims: [usize; 3],
    pub noise_sigma_hu: f64,
    /// Probability of a calcified plaque.
    pub calcified: f64,
    /// Probability of a calcium-free narrowing of the radius profile.
    pub soft_stenosis: f64,
    pub radius: (f64, f64),
}

impl Default for RandomPhantom {
    fn default() -> Self {
        Self {
            dims: [32, 32, 32],
            noise_sigma_hu: SUITE_NOISE_SIGMA_HU,
            calcified: 0.25,
            soft_stenosis: 0.5,
            radius: (2.5, 4.5),
        }
    }
}

fn bezier(a: Vec3, m: Vec3, b: Vec3, t: f64) -> Vec3 {
    let u = 1.0 - t;
    [0, 1, 2].map(|k| u * u * a[k] + 2.0 * u * t * m[k] + t * t * b[k])
}

/// Randomly oriented, gently curved vessel crossing the volume near its
/// center; used to build training sets.
pub fn random_phantom(opts: &RandomPhantom, seed: u64) -> Result<(Volume, PhantomTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = rng.gen_range(opts.radius.0..opts.radius.1);
    let axis = rng.gen_range(0..3usize);
    let margin = r.ceil() + 1.0;
    let center: Vec3 = [0, 1, 2].map(|k| opts.dims[k] as f64 / 2.0 - 0.5);
    let jitter = |rng: &mut ChaCha8Rng, k: usize| {
        let room = (opts.dims[k] as f64 / 2.0 - margin - 1.0).max(0.0);
        center[k] + rng.gen_range(-room..=room) * 0.5
    };
    let mut a = [0.0; 3];
    let mut b = [0.0; 3];
    let mut m = [0.0; 3];
    for k in 0..3 {
        if k == axis {
            a[k] = margin;
            b[k] = opts.dims[k] as f64 - 1.0 - margin;
            m[k] = center[k];
        } else {
            a[k] = jitter(&mut rng, k);
            b[k] = jitter(&mut rng, k);
            m[k] = jitter(&mut rng, k);
        }
    }
    if rng.gen_bool(0.5) {
        std::mem::swap(&mut a, &mut b);
    }
    let steps = (opts.dims[axis] as f64 - 2.0 * margin).ceil().max(2.0) as usize;
    let points: Vec<Vec3> = (0..=steps)
        .map(|i| bezier(a, m, b, i as f64 / steps as f64))
        .collect();
    let mut vessel = VesselModel::new(points, vec![r; steps + 1]);
    let len = Centerline::new(vessel.centerline.clone())?.length();

    if rng.gen_bool(opts.soft_stenosis) {
        let f = rng.gen_range(0.2..0.6);
        let mid = rng.gen_range(0.3..0.7) * len;
        let half = rng.gen_range(2.0..6.0);
        vessel = vessel.with_narrowing((mid - half, mid + half), f, 3.0)?;
    }
    let mut plaques = Vec::new();
    if rng.gen_bool(opts.calcified) {
        let mid = rng.gen_range(0.3..0.7) * len;
        let half = rng.gen_range(2.0..5.0);
        let mut p = PlaqueModel::new(
            ((mid - half).max(0.0), (mid + half).min(len)),
            rng.gen_range(1..=3),
            rng.gen_range(0.0..0.5),
        )
        .with_hu(rng.gen_range(1500.0..2600.0));
        p.first_quadrant = rng.gen_range(0..4);
        p.soft_margin = rng.gen_range(0.0..4.0);
        plaques.push(p);
    }
    generate_phantom(&vessel, &plaques, opts.dims, opts.noise_sigma_hu, seed)
}
