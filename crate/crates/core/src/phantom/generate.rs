use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ctvol::{quantize_hu, Volume, DEFAULT_SPACING_MM};
use crate::error::{Error, Result};
use crate::kv::{field, list, parse_kv};

use super::centerline::Centerline;
use super::model::{quadrant_of, PlaqueModel, VesselModel, CALCIUM_THRESHOLD_HU};

/// Standard deviation in voxels of the blooming point-spread.
pub const BLOOM_SIGMA: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Tissue {
    Background = 0,
    Wall = 1,
    Lumen = 2,
    Plaque = 3,
}

impl Tissue {
    pub fn from_label(v: i16) -> Option<Self> {
        Some(match v {
            0 => Tissue::Background,
            1 => Tissue::Wall,
            2 => Tissue::Lumen,
            3 => Tissue::Plaque,
            _ => return None,
        })
    }
}

/// Everything known about a generated phantom.
#[derive(Clone, Debug, PartialEq)]
pub struct PhantomTruth {
    pub vessel: VesselModel,
    pub plaques: Vec<PlaqueModel>,
    /// Per-voxel [`Tissue`] code, same grid as the phantom.
    pub labels: Volume,
    /// True percent stenosis of each plaque.
    pub stenosis: Vec<f64>,
    pub noise_sigma_hu: f64,
    pub seed: u64,
}

/// Geometry queries shared by the generator and the truth record.
pub(crate) struct Geometry<'a> {
    pub centerline: Centerline,
    vessel: &'a VesselModel,
    plaques: &'a [PlaqueModel],
}

impl<'a> Geometry<'a> {
    pub fn new(vessel: &'a VesselModel, plaques: &'a [PlaqueModel], dims: [usize; 3]) -> Result<Self> {
        let centerline = vessel.validate(dims)?;
        for p in plaques {
            p.validate(centerline.length())?;
        }
        Ok(Self {
            centerline,
            vessel,
            plaques,
        })
    }

    pub fn reference_radius(&self, s: f64) -> f64 {
        self.centerline.interpolate(&self.vessel.radius_profile, s)
    }

    pub fn lumen_radius(&self, s: f64) -> f64 {
        let f = self
            .plaques
            .iter()
            .map(|p| p.narrowing * p.weight(s))
            .fold(0.0, f64::max);
        self.reference_radius(s) * (1.0 - f)
    }

    /// Tissue ignoring calcium, and the plaque (if any) occupying the point.
    fn classify(&self, p: [f64; 3]) -> (Tissue, Option<usize>) {
        let c = self.centerline.closest(p);
        let r = self.lumen_radius(c.s);
        let base = if c.distance <= r {
            Tissue::Lumen
        } else if c.distance <= self.reference_radius(c.s) + self.vessel.wall_thickness {
            Tissue::Wall
        } else {
            Tissue::Background
        };
        if c.distance > r {
            let q = quadrant_of(self.centerline.angle(&c));
            for (i, pl) in self.plaques.iter().enumerate() {
                if pl.covers(c.s) && pl.quadrant_calcified(q) && c.distance <= r + pl.thickness {
                    return (base, Some(i));
                }
            }
        }
        (base, None)
    }

    fn base_hu(&self, t: Tissue) -> f64 {
        match t {
            Tissue::Background => self.vessel.background_hu,
            Tissue::Wall => self.vessel.wall_hu,
            Tissue::Lumen => self.vessel.contrast_hu,
            Tissue::Plaque => unreachable!(),
        }
    }

    /// `(1 − (r_min / r_ref)²)·100` over the plaque interval.
    pub fn true_stenosis(&self, plaque: &PlaqueModel) -> f64 {
        let (a, b) = plaque.interval;
        let n = ((b - a) / 0.05).ceil().max(1.0) as usize;
        let ratio = (0..=n)
            .map(|i| {
                let s = a + (b - a) * i as f64 / n as f64;
                self.lumen_radius(s) / self.reference_radius(s)
            })
            .fold(f64::INFINITY, f64::min);
        (1.0 - ratio * ratio) * 100.0
    }
}

fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-r..=r)
        .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Separable Gaussian blur with zero boundary, x fastest.
fn blur(field: &[f64], dims: [usize; 3], sigma: f64) -> Vec<f64> {
    let taps = gaussian_taps(sigma);
    let r = (taps.len() / 2) as isize;
    let stride = [1, dims[0], dims[0] * dims[1]];
    let mut cur = field.to_vec();
    for axis in 0..3 {
        let mut next = vec![0.0; cur.len()];
        for (i, out) in next.iter_mut().enumerate() {
            let c = (i / stride[axis]) % dims[axis];
            let mut acc = 0.0;
            for (k, &w) in taps.iter().enumerate() {
                let j = c as isize + k as isize - r;
                if j >= 0 && (j as usize) < dims[axis] {
                    acc += w * cur[i - c * stride[axis] + j as usize * stride[axis]];
                }
            }
            *out = acc;
        }
        cur = next;
    }
    cur
}

/// Renders a vessel with `plaques` into a volume of `dims = [nx, ny, nz]`.
///
/// Each voxel takes the base HU of the region containing its center.
/// Calcium is added as an excess over the underlying tissue and smeared by a
/// Gaussian of [`BLOOM_SIGMA`] voxels. Labels are taken from the noiseless
/// quantized result: every voxel above [`CALCIUM_THRESHOLD_HU`] is plaque.
/// Noise is i.i.d. `N(0, σ²)` drawn from ChaCha8 seeded with `seed`, one draw
/// per voxel in storage order.
pub fn generate_phantom(
    vessel: &VesselModel,
    plaques: &[PlaqueModel],
    dims: [usize; 3],
    noise_sigma_hu: f64,
    seed: u64,
) -> Result<(Volume, PhantomTruth)> {
    if !(noise_sigma_hu >= 0.0 && noise_sigma_hu.is_finite()) {
        return Err(Error::Phantom(format!("noise sigma {noise_sigma_hu} must be ≥ 0")));
    }
    let margin = 3.0 * noise_sigma_hu;
    if !(CALCIUM_THRESHOLD_HU > vessel.contrast_hu + margin) {
        return Err(Error::Phantom(format!(
            "contrast {} HU + 3σ ({margin}) reaches the {CALCIUM_THRESHOLD_HU} HU threshold",
            vessel.contrast_hu
        )));
    }
    if let Some(p) = plaques
        .iter()
        .find(|p| !(p.plaque_hu - margin > CALCIUM_THRESHOLD_HU))
    {
        return Err(Error::Phantom(format!(
            "plaque {} HU − 3σ ({margin}) falls to the {CALCIUM_THRESHOLD_HU} HU threshold",
            p.plaque_hu
        )));
    }
    let geom = Geometry::new(vessel, plaques, dims)?;
    let n = dims[0] * dims[1] * dims[2];
    let mut base = Vec::with_capacity(n);
    let mut tissue = Vec::with_capacity(n);
    let mut excess = vec![0.0; n];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let (t, plaque) = geom.classify([x as f64, y as f64, z as f64]);
                let v0 = geom.base_hu(t);
                if let Some(i) = plaque {
                    excess[base.len()] = plaques[i].plaque_hu - v0;
                }
                base.push(v0);
                tissue.push(t);
            }
        }
    }
    let bloom = if plaques.is_empty() {
        excess
    } else {
        blur(&excess, dims, BLOOM_SIGMA)
    };
    let clean: Vec<f64> = base.iter().zip(&bloom).map(|(a, b)| a + b).collect();
    let labels: Vec<i16> = clean
        .iter()
        .zip(&tissue)
        .map(|(&v, &t)| {
            if quantize_hu(v) as f64 > CALCIUM_THRESHOLD_HU {
                Tissue::Plaque as i16
            } else {
                t as i16
            }
        })
        .collect();

    let data: Vec<i16> = if noise_sigma_hu > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma_hu)
            .map_err(|e| Error::Phantom(format!("noise distribution: {e}")))?;
        clean
            .iter()
            .map(|&v| quantize_hu(v + normal.sample(&mut rng)))
            .collect()
    } else {
        clean.iter().map(|&v| quantize_hu(v)).collect()
    };

    let stenosis = plaques.iter().map(|p| geom.true_stenosis(p)).collect();
    let truth = PhantomTruth {
        vessel: vessel.clone(),
        plaques: plaques.to_vec(),
        labels: Volume::new(dims, DEFAULT_SPACING_MM, labels)?,
        stenosis,
        noise_sigma_hu,
        seed,
    };
    Ok((Volume::new(dims, DEFAULT_SPACING_MM, data)?, truth))
}

/// True percent stenosis of plaque `index`.
///
/// # Panics
/// If `index` is out of range.
pub fn true_stenosis(truth: &PhantomTruth, index: usize) -> f64 {
    truth.stenosis[index]
}

impl PhantomTruth {
    pub fn dims(&self) -> [usize; 3] {
        self.labels.dims()
    }

    pub fn centerline(&self) -> Centerline {
        Centerline::new(self.vessel.centerline.clone()).expect("validated at generation")
    }

    /// Narrowed lumen radius at arc length `s`.
    pub fn lumen_radius(&self, s: f64) -> f64 {
        self.geometry().lumen_radius(s)
    }

    pub fn reference_radius(&self, s: f64) -> f64 {
        self.geometry().reference_radius(s)
    }

    fn geometry(&self) -> Geometry<'_> {
        Geometry::new(&self.vessel, &self.plaques, self.dims()).expect("validated at generation")
    }

    /// Storage indices of plaque-labelled voxels, ascending.
    pub fn plaque_indices(&self) -> Vec<usize> {
        self.labels
            .data()
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == Tissue::Plaque as i16).then_some(i))
            .collect()
    }

    pub fn count(&self, t: Tissue) -> usize {
        self.labels.data().iter().filter(|&&l| l == t as i16).count()
    }

    /// Plain-text sidecar; labels travel separately as a CTV volume.
    pub fn to_kv(&self) -> String {
        let v = &self.vessel;
        let pts: Vec<String> = v
            .centerline
            .iter()
            .map(|p| format!("{} {} {}", p[0], p[1], p[2]))
            .collect();
        let radii: Vec<String> = v.radius_profile.iter().map(|r| r.to_string()).collect();
        let d = self.dims();
        let mut out = format!(
            "dims = {},{},{}\nnoise_sigma_hu = {}\nseed = {}\ncontrast_hu = {}\nwall_hu = {}\n\
             background_hu = {}\nwall_thickness = {}\ncenterline = {}\nradius_profile = {}\nplaques = {}\n",
            d[0],
            d[1],
            d[2],
            self.noise_sigma_hu,
            self.seed,
            v.contrast_hu,
            v.wall_hu,
            v.background_hu,
            v.wall_thickness,
            pts.join(","),
            radii.join(","),
            self.plaques.len()
        );
        for (i, p) in self.plaques.iter().enumerate() {
            out.push_str(&format!(
                "plaque.{i}.interval = {},{}\nplaque.{i}.quadrants = {}\nplaque.{i}.first_quadrant = {}\n\
                 plaque.{i}.thickness = {}\nplaque.{i}.plaque_hu = {}\nplaque.{i}.narrowing = {}\n\
                 plaque.{i}.taper = {}\nplaque.{i}.soft_margin = {}\nplaque.{i}.true_stenosis = {}\n",
                p.interval.0,
                p.interval.1,
                p.quadrants,
                p.first_quadrant,
                p.thickness,
                p.plaque_hu,
                p.narrowing,
                p.taper,
                p.soft_margin,
                self.stenosis[i]
            ));
        }
        out
    }

    /// Inverse of [`to_kv`](Self::to_kv) given the label volume.
    pub fn from_kv(text: &str, labels: Volume) -> Result<Self> {
        let m = parse_kv(text)?;
        let dims: Vec<usize> = list(&field::<String>(&m, "dims")?, ',')?;
        if dims != labels.dims() {
            return Err(Error::Format(format!(
                "truth dims {dims:?} disagree with label volume {:?}",
                labels.dims()
            )));
        }
        let centerline = field::<String>(&m, "centerline")?
            .split(',')
            .map(|p| {
                let c: Vec<f64> = list(p, ' ')?;
                <[f64; 3]>::try_from(c)
                    .map_err(|_| Error::Format(format!("centerline point {p:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let vessel = VesselModel {
            centerline,
            radius_profile: list(&field::<String>(&m, "radius_profile")?, ',')?,
            contrast_hu: field(&m, "contrast_hu")?,
            wall_hu: field(&m, "wall_hu")?,
            background_hu: field(&m, "background_hu")?,
            wall_thickness: field(&m, "wall_thickness")?,
        };
        let count: usize = field(&m, "plaques")?;
        let mut plaques = Vec::with_capacity(count);
        let mut stenosis = Vec::with_capacity(count);
        for i in 0..count {
            let key = |k: &str| format!("plaque.{i}.{k}");
            let iv: Vec<f64> = list(&field::<String>(&m, &key("interval"))?, ',')?;
            if iv.len() != 2 {
                return Err(Error::Format(format!("plaque {i} interval {iv:?}")));
            }
            plaques.push(PlaqueModel {
                interval: (iv[0], iv[1]),
                quadrants: field(&m, &key("quadrants"))?,
                first_quadrant: field(&m, &key("first_quadrant"))?,
                thickness: field(&m, &key("thickness"))?,
                plaque_hu: field(&m, &key("plaque_hu"))?,
                narrowing: field(&m, &key("narrowing"))?,
                taper: field(&m, &key("taper"))?,
                soft_margin: field(&m, &key("soft_margin"))?,
            });
            stenosis.push(field(&m, &key("true_stenosis"))?);
        }
        Geometry::new(&vessel, &plaques, labels.dims())?;
        Ok(Self {
            vessel,
            plaques,
            labels,
            stenosis,
            noise_sigma_hu: field(&m, "noise_sigma_hu")?,
            seed: field(&m, "seed")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vessel() -> VesselModel {
        VesselModel::straight([4.0, 12.0, 12.0], [36.0, 12.0, 12.0], 3.0)
    }

    #[test]
    fn plaque_free_noiseless_has_no_calcium() {
        let (v, t) = generate_phantom(&vessel(), &[], [41, 25, 25], 0.0, 1).unwrap();
        assert!(v.max_hu() < 700);
        assert_eq!(v.max_hu(), 350);
        assert_eq!(t.count(Tissue::Plaque), 0);
        assert!(t.count(Tissue::Lumen) > 0 && t.count(Tissue::Wall) > 0);
    }

    #[test]
    fn stenosis_follows_narrowing() {
        for (f, want) in [(0.0, 0.0), (0.5, 75.0), (0.3, 51.0)] {
            let p = PlaqueModel::new((10.0, 16.0), 2, f).with_hu(2000.0);
            let (_, t) = generate_phantom(&vessel(), &[p], [41, 25, 25], 0.0, 1).unwrap();
            // independent evaluation of 1 − (1 − f)²
            let oracle = 100.0 * (1.0 - (1.0 - f) * (1.0 - f));
            assert!((true_stenosis(&t, 0) - oracle).abs() < 1e-9);
            assert!((oracle - want).abs() < 1e-9);
        }
    }

    #[test]
    fn labels_are_the_supra_threshold_voxels() {
        let p = PlaqueModel::new((10.0, 18.0), 3, 0.4).with_hu(2400.0);
        let (v, t) = generate_phantom(&vessel(), &[p], [41, 25, 25], 0.0, 1).unwrap();
        let hot: Vec<usize> = (0..v.len()).filter(|&i| v.data()[i] > 700).collect();
        assert!(!hot.is_empty());
        assert_eq!(hot, t.plaque_indices());
    }

    #[test]
    fn blooming_spreads_into_the_lumen() {
        let p = PlaqueModel::new((10.0, 18.0), 2, 0.0).with_hu(2400.0);
        let (bloomed, t) = generate_phantom(&vessel(), &[p], [41, 25, 25], 0.0, 1).unwrap();
        let (clean, _) = generate_phantom(&vessel(), &[], [41, 25, 25], 0.0, 1).unwrap();
        let brighter_lumen = (0..clean.len())
            .filter(|&i| clean.data()[i] == 350 && bloomed.data()[i] > 350)
            .count();
        assert!(brighter_lumen > 0);
        assert!(t.count(Tissue::Plaque) > 0);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let a = generate_phantom(&vessel(), &[], [41, 25, 25], 20.0, 9).unwrap().0;
        let b = generate_phantom(&vessel(), &[], [41, 25, 25], 20.0, 9).unwrap().0;
        let c = generate_phantom(&vessel(), &[], [41, 25, 25], 20.0, 10).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn separation_constraint_is_enforced() {
        let p = PlaqueModel::new((10.0, 16.0), 1, 0.2);
        assert!(generate_phantom(&vessel(), &[p.clone()], [41, 25, 25], 70.0, 1).is_err());
        assert!(generate_phantom(&vessel(), &[p], [41, 25, 25], 30.0, 1).is_ok());
        assert!(generate_phantom(&vessel(), &[], [41, 25, 25], 120.0, 1).is_err());
        assert!(generate_phantom(&vessel(), &[], [30, 25, 25], 0.0, 1).is_err());
    }

    #[test]
    fn stenosis_ignores_translation() {
        let p = PlaqueModel::new((10.0, 16.0), 2, 0.35).with_hu(2000.0);
        let mut moved = vessel();
        moved.centerline.iter_mut().for_each(|q| {
            q[1] += 3.0;
            q[2] -= 2.5;
        });
        let a = generate_phantom(&vessel(), &[p.clone()], [41, 25, 25], 0.0, 1).unwrap().1;
        let b = generate_phantom(&moved, &[p], [41, 25, 25], 0.0, 1).unwrap().1;
        assert_eq!(a.stenosis, b.stenosis);
    }

    #[test]
    fn truth_sidecar_round_trip() {
        let p = PlaqueModel::new((10.0, 16.5), 3, 0.35).with_hu(2000.0);
        let (_, t) = generate_phantom(&vessel(), &[p], [41, 25, 25], 5.0, 3).unwrap();
        let back = PhantomTruth::from_kv(&t.to_kv(), t.labels.clone()).unwrap();
        assert_eq!(back, t);
    }
}
