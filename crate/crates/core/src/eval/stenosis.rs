//! Area-ratio stenosis measurement on cross-sections perpendicular to a
//! known centerline.

use std::collections::VecDeque;

use crate::ctvol::Volume;
use crate::error::{Error, Result};
use crate::phantom::{centerline, Centerline, PhantomTruth};

/// Sampling parameters of [`measure_stenosis`].
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureConfig {
    /// Lumen lower bound in HU, between wall and contrast.
    pub lumen_threshold_hu: f64,
    /// Lumen upper bound in HU; brighter voxels count as calcium.
    pub calcium_threshold_hu: f64,
    /// Largest in-plane distance from the centerline searched for lumen.
    pub radius_budget: f64,
    /// In-plane grid step in voxels.
    pub plane_step: f64,
    /// Spacing of cross-sections along the centerline in voxels.
    pub section_step: f64,
    pub interpolation: Interpolation,
}

/// How off-grid plane samples read the volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    /// Value of the nearest voxel; lumen classification then only depends
    /// on which side of the thresholds each voxel lies.
    Nearest,
    Trilinear,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            lumen_threshold_hu: 200.0,
            calcium_threshold_hu: 700.0,
            radius_budget: 7.0,
            plane_step: 0.25,
            section_step: 0.5,
            interpolation: Interpolation::Nearest,
        }
    }
}

/// Lumen area in voxel² of the cross-section at arc length `s`: the in-plane
/// samples with `lumen < HU < calcium` connected to the centerline point.
pub fn cross_section_area(volume: &Volume, line: &Centerline, s: f64, cfg: &MeasureConfig) -> Result<f64> {
    let frame = line.frame_at(s);
    if centerline::norm(frame.tangent) < 0.5 {
        return Err(Error::Measurement(format!("degenerate tangent at s = {s}")));
    }
    let c = line.point_at(s);
    let half = (cfg.radius_budget / cfg.plane_step).floor() as isize;
    let side = (2 * half + 1) as usize;
    let r2 = cfg.radius_budget * cfg.radius_budget;
    let mut lumen = vec![false; side * side];
    for j in 0..side {
        for i in 0..side {
            let u = (i as isize - half) as f64 * cfg.plane_step;
            let v = (j as isize - half) as f64 * cfg.plane_step;
            if u * u + v * v > r2 {
                continue;
            }
            let p = centerline::add(
                c,
                centerline::add(centerline::scale(frame.normal, u), centerline::scale(frame.binormal, v)),
            );
            let hu = match cfg.interpolation {
                Interpolation::Nearest => volume.sample_nearest(p).map(f64::from),
                Interpolation::Trilinear => volume.sample_trilinear(p),
            };
            if let Some(hu) = hu {
                lumen[j * side + i] = hu > cfg.lumen_threshold_hu && hu < cfg.calcium_threshold_hu;
            }
        }
    }
    // flood fill from the lumen sample nearest the centerline point
    let seed = (0..side * side)
        .filter(|&k| lumen[k])
        .map(|k| {
            let di = (k % side) as isize - half;
            let dj = (k / side) as isize - half;
            (di * di + dj * dj, k)
        })
        .min()
        .filter(|&(d2, _)| (d2 as f64).sqrt() * cfg.plane_step <= 1.0)
        .map(|(_, k)| k);
    let Some(seed) = seed else {
        return Ok(0.0);
    };
    let mut seen = vec![false; side * side];
    let mut queue = VecDeque::from([seed]);
    seen[seed] = true;
    let mut count = 0usize;
    while let Some(k) = queue.pop_front() {
        count += 1;
        let (i, j) = (k % side, k / side);
        let mut visit = |n: usize| {
            if lumen[n] && !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        };
        if i > 0 {
            visit(k - 1);
        }
        if i + 1 < side {
            visit(k + 1);
        }
        if j > 0 {
            visit(k - side);
        }
        if j + 1 < side {
            visit(k + side);
        }
    }
    Ok(count as f64 * cfg.plane_step * cfg.plane_step)
}

fn sections(interval: (f64, f64), step: f64) -> Vec<f64> {
    let (a, b) = interval;
    if !(b >= a) {
        return Vec::new();
    }
    let n = ((b - a) / step).floor() as usize;
    (0..=n).map(|i| a + i as f64 * step).collect()
}

/// Percent stenosis `(1 − min A(lesion) / median A(reference))·100`,
/// clamped to `[0, 100]`.
pub fn measure_stenosis(
    volume: &Volume,
    line: &Centerline,
    reference: (f64, f64),
    lesion: (f64, f64),
    cfg: &MeasureConfig,
) -> Result<f64> {
    let len = line.length();
    let clip = |(a, b): (f64, f64)| (a.max(0.0), b.min(len));
    let ref_s = sections(clip(reference), cfg.section_step);
    if ref_s.is_empty() {
        return Err(Error::Measurement(format!("empty reference interval {reference:?}")));
    }
    let les_s = sections(clip(lesion), cfg.section_step);
    if les_s.is_empty() {
        return Err(Error::Measurement(format!("empty lesion interval {lesion:?}")));
    }
    let mut ref_areas = ref_s
        .iter()
        .map(|&s| cross_section_area(volume, line, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    ref_areas.sort_by(f64::total_cmp);
    let m = ref_areas.len();
    let median = if m % 2 == 1 {
        ref_areas[m / 2]
    } else {
        0.5 * (ref_areas[m / 2 - 1] + ref_areas[m / 2])
    };
    if median <= 0.0 {
        return Err(Error::Measurement("reference lumen area is zero".into()));
    }
    let mut min_area = f64::INFINITY;
    for &s in &les_s {
        min_area = min_area.min(cross_section_area(volume, line, s, cfg)?);
    }
    Ok(((1.0 - min_area / median) * 100.0).clamp(0.0, 100.0))
}

/// Default reference and lesion intervals for plaque `index` of a phantom:
/// the lesion is the calcified interval; the reference is the longer stretch
/// of healthy vessel just outside the narrowing shoulders.
pub fn lesion_windows(truth: &PhantomTruth, index: usize) -> ((f64, f64), (f64, f64)) {
    let line = truth.centerline();
    let len = line.length();
    let p = &truth.plaques[index];
    let (a, b) = p.interval;
    // clearance from the shoulders plus the blooming reach
    let gap = p.soft_margin + p.taper + 3.0;
    let width = 8.0;
    let before = ((a - gap - width).max(1.0), a - gap);
    let after = (b + gap, (b + gap + width).min(len - 1.0));
    let reference = if before.1 - before.0 >= after.1 - after.0 {
        before
    } else {
        after
    };
    (reference, p.interval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{generate_phantom, phantom_suite, PlaqueModel, VesselModel};

    fn straight() -> VesselModel {
        VesselModel::straight([5.0, 20.0, 20.0], [55.0, 20.0, 20.0], 4.0)
    }

    #[test]
    fn healthy_vessel_reads_near_zero() {
        let (v, _) = generate_phantom(&straight(), &[], [61, 41, 41], 0.0, 1).unwrap();
        let line = Centerline::new(straight().centerline).unwrap();
        let got = measure_stenosis(&v, &line, (5.0, 15.0), (20.0, 40.0), &MeasureConfig::default()).unwrap();
        assert!(got < 3.0, "{got}");
    }

    #[test]
    fn constant_offset_does_not_change_calcium_free_readings() {
        let vessel = straight().with_narrowing((22.0, 28.0), 0.4, 3.0).unwrap();
        let (v, _) = generate_phantom(&vessel, &[], [61, 41, 41], 10.0, 1).unwrap();
        let line = Centerline::new(vessel.centerline.clone()).unwrap();
        let cfg = MeasureConfig::default();
        let base = measure_stenosis(&v, &line, (5.0, 14.0), (22.0, 28.0), &cfg).unwrap();
        for d in [-50, -20, 10, 50] {
            let got = measure_stenosis(&v.shifted(d), &line, (5.0, 14.0), (22.0, 28.0), &cfg).unwrap();
            assert_eq!(got, base);
        }
    }

    #[test]
    fn clean_narrowing_reads_near_truth() {
        let vessel = straight().with_narrowing((22.0, 28.0), 0.5, 3.0).unwrap();
        let (v, _) = generate_phantom(&vessel, &[], [61, 41, 41], 0.0, 1).unwrap();
        let line = Centerline::new(vessel.centerline.clone()).unwrap();
        let got = measure_stenosis(&v, &line, (5.0, 14.0), (22.0, 28.0), &MeasureConfig::default()).unwrap();
        assert!((got - 75.0).abs() < 5.0, "{got}");
    }

    #[test]
    fn blooming_overestimates() {
        let p = PlaqueModel::new((22.0, 28.0), 2, 0.3).with_hu(2400.0);
        let (v, t) = generate_phantom(&straight(), &[p], [61, 41, 41], 0.0, 1).unwrap();
        let (r, l) = lesion_windows(&t, 0);
        let got = measure_stenosis(&v, &t.centerline(), r, l, &MeasureConfig::default()).unwrap();
        assert!(got > t.stenosis[0], "{got} vs {}", t.stenosis[0]);
    }

    #[test]
    fn suite_direction_and_offset_invariance() {
        let cfg = MeasureConfig::default();
        for p in phantom_suite(3).unwrap() {
            let (r, l) = lesion_windows(&p.truth, 0);
            let line = p.truth.centerline();
            let got = measure_stenosis(&p.volume, &line, r, l, &cfg).unwrap();
            let tri = MeasureConfig { interpolation: Interpolation::Trilinear, ..cfg.clone() };
            let t = measure_stenosis(&p.volume, &line, r, l, &tri).unwrap();
            println!("{}: truth {:.1} measured {:.1} trilinear {:.1}", p.name, p.truth.stenosis[0], got, t);
            assert!(got > p.truth.stenosis[0], "{}", p.name);
        }
    }

    #[test]
    fn rejects_empty_reference() {
        let (v, _) = generate_phantom(&straight(), &[], [61, 41, 41], 0.0, 1).unwrap();
        let line = Centerline::new(straight().centerline).unwrap();
        assert!(measure_stenosis(&v, &line, (10.0, 5.0), (20.0, 30.0), &MeasureConfig::default()).is_err());
    }
}
