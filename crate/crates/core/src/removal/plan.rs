use crate::ctvol::{PatchSpec, RegionOfInterest, Volume};
use crate::error::{Error, Result};

/// Voxels of `roi` brighter than `threshold_hu`, in scan order.
pub fn detect_calcium(volume: &Volume, roi: &RegionOfInterest, threshold_hu: f64) -> Result<Vec<[usize; 3]>> {
    roi.validate(volume.dims())?;
    let [ox, oy, oz] = roi.origin;
    let [dx, dy, dz] = roi.dims;
    let mut out = Vec::new();
    for z in oz..oz + dz {
        for y in oy..oy + dy {
            let row = volume.index([ox, y, z]);
            for (i, &hu) in volume.data()[row..row + dx].iter().enumerate() {
                if hu as f64 > threshold_hu {
                    out.push([ox + i, y, z]);
                }
            }
        }
    }
    Ok(out)
}

/// `detections` plus every voxel within Chebyshev distance `radius` of one
/// that lies at least `margin` from each border, in scan order. Detections
/// themselves are always kept.
pub fn grow_detections(dims: [usize; 3], detections: &[[usize; 3]], radius: usize, margin: usize) -> Vec<[usize; 3]> {
    let mut out: Vec<[usize; 3]> = detections.to_vec();
    if radius > 0 {
        let r = radius as isize;
        for p in detections {
            for dz in -r..=r {
                for dy in -r..=r {
                    for dx in -r..=r {
                        let q = [p[0] as isize + dx, p[1] as isize + dy, p[2] as isize + dz];
                        if (0..3).all(|a| q[a] >= margin as isize && q[a] + (margin as isize) < dims[a] as isize) {
                            out.push(q.map(|c| c as usize));
                        }
                    }
                }
            }
        }
    }
    out.sort_by_key(|p| (p[2], p[1], p[0]));
    out.dedup();
    out
}

/// Ordered patch placements whose masks cover a detection set.
#[derive(Clone, Debug, PartialEq)]
pub struct RemovalPlan {
    pub steps: Vec<PatchSpec>,
    pub threshold_hu: f64,
    pub max_iterations: usize,
}

/// Inclusive 3D prefix sums over a box, for O(1) sub-box counts.
struct Counts {
    lo: [usize; 3],
    dims: [usize; 3],
    sums: Vec<u32>,
}

impl Counts {
    fn new(lo: [usize; 3], hi: [usize; 3], points: &[[usize; 3]], live: &[bool]) -> Self {
        let dims = [0, 1, 2].map(|a| hi[a] - lo[a] + 1);
        let (px, py) = (dims[0] + 1, dims[1] + 1);
        let mut sums = vec![0u32; px * py * (dims[2] + 1)];
        let at = |x: usize, y: usize, z: usize| (z * py + y) * px + x;
        for (p, _) in points.iter().zip(live).filter(|(_, &l)| l) {
            sums[at(p[0] - lo[0] + 1, p[1] - lo[1] + 1, p[2] - lo[2] + 1)] += 1;
        }
        for z in 1..=dims[2] {
            for y in 1..=dims[1] {
                for x in 1..=dims[0] {
                    sums[at(x, y, z)] += sums[at(x - 1, y, z)] + sums[at(x, y - 1, z)] + sums[at(x, y, z - 1)]
                        + sums[at(x - 1, y - 1, z - 1)]
                        - sums[at(x - 1, y - 1, z)]
                        - sums[at(x - 1, y, z - 1)]
                        - sums[at(x, y - 1, z - 1)];
                }
            }
        }
        Self { lo, dims, sums }
    }

    /// Points inside the half-open box `[a, a + n)`.
    fn count(&self, a: [usize; 3], n: usize) -> u32 {
        let (px, py) = (self.dims[0] + 1, self.dims[1] + 1);
        let mut l = [0usize; 3];
        let mut h = [0usize; 3];
        for k in 0..3 {
            l[k] = a[k].saturating_sub(self.lo[k]).min(self.dims[k]);
            h[k] = (a[k] + n).saturating_sub(self.lo[k]).min(self.dims[k]);
        }
        let s = |x: usize, y: usize, z: usize| self.sums[(z * py + y) * px + x] as i64;
        let v = s(h[0], h[1], h[2]) - s(l[0], h[1], h[2]) - s(h[0], l[1], h[2]) - s(h[0], h[1], l[2])
            + s(l[0], l[1], h[2])
            + s(l[0], h[1], l[2])
            + s(h[0], l[1], l[2])
            - s(l[0], l[1], l[2]);
        v as u32
    }
}

/// Greedy cover of `detections` by patch masks.
///
/// The first uncovered detection in scan order must lie in the next mask;
/// among the clamped placements that contain it, the one covering the
/// most uncovered detections wins, ties going to the placement whose mask
/// center is closest to that voxel, then to the lowest origin.
pub fn plan_removal(
    dims: [usize; 3],
    detections: &[[usize; 3]],
    patch_size: usize,
    mask_size: usize,
) -> Result<Vec<PatchSpec>> {
    if detections.is_empty() {
        return Ok(Vec::new());
    }
    let probe = PatchSpec::new([0; 3], patch_size, mask_size)?;
    probe.validate(dims)?;
    let off = probe.mask_offset();
    let mut order: Vec<[usize; 3]> = detections.to_vec();
    order.sort_by_key(|p| (p[2], p[1], p[0]));
    order.dedup();
    let lo = [0, 1, 2].map(|a| order.iter().map(|p| p[a]).min().unwrap());
    let hi = [0, 1, 2].map(|a| order.iter().map(|p| p[a]).max().unwrap());
    let mut live = vec![true; order.len()];
    let mut steps = Vec::new();
    let mut next = 0;
    while next < order.len() {
        let p = order[next];
        let counts = Counts::new(lo, hi, &order, &live);
        // per axis, mask origins that contain p and keep the patch inside
        let mut ranges = [(0usize, 0usize); 3];
        for a in 0..3 {
            let min_m = (p[a] + 1).saturating_sub(mask_size).max(off);
            let max_m = p[a].min(dims[a] - patch_size + off);
            if min_m > max_m {
                return Err(Error::Uncoverable(p));
            }
            ranges[a] = (min_m, max_m);
        }
        let mut best: Option<(u32, i64, [usize; 3])> = None;
        for mz in ranges[2].0..=ranges[2].1 {
            for my in ranges[1].0..=ranges[1].1 {
                for mx in ranges[0].0..=ranges[0].1 {
                    let m = [mx, my, mz];
                    let c = counts.count(m, mask_size);
                    // twice the distance keeps even mask centers integral
                    let d2: i64 = (0..3)
                        .map(|a| {
                            let d = 2 * m[a] as i64 + mask_size as i64 - 1 - 2 * p[a] as i64;
                            d * d
                        })
                        .sum();
                    let better = match best {
                        None => true,
                        Some((bc, bd, _)) => c > bc || (c == bc && d2 < bd),
                    };
                    if better {
                        best = Some((c, d2, m));
                    }
                }
            }
        }
        let (_, _, m) = best.expect("non-empty candidate ranges");
        let spec = PatchSpec::new(m.map(|v| v - off), patch_size, mask_size)?;
        for (q, l) in order.iter().zip(live.iter_mut()) {
            if *l && spec.mask_contains(*q) {
                *l = false;
            }
        }
        debug_assert!(!live[next]);
        steps.push(spec);
        while next < order.len() && !live[next] {
            next += 1;
        }
    }
    Ok(steps)
}
