use crate::error::{Error, Result};

use super::centerline::{Centerline, Vec3};

/// HU above which a voxel counts as calcium.
pub const CALCIUM_THRESHOLD_HU: f64 = 700.0;

/// Tubular vessel: contrast-filled lumen inside a soft-tissue wall.
#[derive(Clone, Debug, PartialEq)]
pub struct VesselModel {
    /// Polyline in voxel coordinates `[x, y, z]`.
    pub centerline: Vec<Vec3>,
    /// Un-narrowed lumen radius in voxels at each centerline point.
    pub radius_profile: Vec<f64>,
    pub contrast_hu: f64,
    pub wall_hu: f64,
    pub background_hu: f64,
    /// Wall thickness in voxels outside the un-narrowed lumen.
    pub wall_thickness: f64,
}

impl VesselModel {
    pub fn new(centerline: Vec<Vec3>, radius_profile: Vec<f64>) -> Self {
        Self {
            centerline,
            radius_profile,
            contrast_hu: 350.0,
            wall_hu: 50.0,
            background_hu: 0.0,
            wall_thickness: 1.5,
        }
    }

    /// Constant-radius straight segment sampled at roughly unit spacing.
    pub fn straight(from: Vec3, to: Vec3, radius: f64) -> Self {
        let len = super::centerline::norm(super::centerline::sub(to, from));
        let n = (len.ceil() as usize).max(1);
        let points = (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                [
                    from[0] + (to[0] - from[0]) * t,
                    from[1] + (to[1] - from[1]) * t,
                    from[2] + (to[2] - from[2]) * t,
                ]
            })
            .collect();
        Self::new(points, vec![radius; n + 1])
    }

    /// Calcium-free lesion: scales the radius profile by `1 − fraction`
    /// over the arc-length `interval`, with cosine shoulders of `taper`.
    pub fn with_narrowing(mut self, interval: (f64, f64), fraction: f64, taper: f64) -> Result<Self> {
        let line = Centerline::new(self.centerline.clone())?;
        let shape = PlaqueModel {
            taper,
            ..PlaqueModel::new(interval, 1, fraction)
        };
        for (r, &s) in self.radius_profile.iter_mut().zip(line.arc_lengths()) {
            *r *= 1.0 - fraction * shape.weight(s);
        }
        Ok(self)
    }

    pub fn max_radius(&self) -> f64 {
        self.radius_profile.iter().copied().fold(0.0, f64::max)
    }

    /// Checks the invariants against a volume of `dims` and returns the
    /// parameterised centerline.
    pub fn validate(&self, dims: [usize; 3]) -> Result<Centerline> {
        if self.radius_profile.len() != self.centerline.len() {
            return Err(Error::Phantom(format!(
                "{} radii for {} centerline points",
                self.radius_profile.len(),
                self.centerline.len()
            )));
        }
        if self.radius_profile.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::Phantom("lumen radii must be positive".into()));
        }
        if !(self.wall_thickness >= 0.0) {
            return Err(Error::Phantom("wall thickness must be non-negative".into()));
        }
        let r = self.max_radius();
        for p in &self.centerline {
            for a in 0..3 {
                if p[a] < r || p[a] > dims[a] as f64 - 1.0 - r {
                    return Err(Error::Phantom(format!(
                        "centerline point {p:?} is closer than {r} voxels to the boundary of {dims:?}"
                    )));
                }
            }
        }
        Centerline::new(self.centerline.clone())
    }
}

/// Calcified plaque on an arc-length interval of the centerline.
///
/// The lumen radius is scaled by `1 − narrowing` over the interval widened
/// by `soft_margin` on both sides, and returns to the reference radius along
/// cosine shoulders of length `taper`. Calcium fills `thickness` voxels
/// radially outward of the narrowed lumen in the listed quadrants, over the
/// interval only.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaqueModel {
    /// Arc-length interval `[start, end]` in voxels.
    pub interval: (f64, f64),
    /// Number of calcified quadrants, 1 to 4.
    pub quadrants: u8,
    /// Quadrant the calcified arc starts from, 0 to 3, counted from the
    /// centerline frame normal.
    pub first_quadrant: u8,
    pub thickness: f64,
    pub plaque_hu: f64,
    pub narrowing: f64,
    pub taper: f64,
    /// Non-calcified stretch of the narrowing beyond each end of the interval.
    pub soft_margin: f64,
}

impl PlaqueModel {
    pub fn new(interval: (f64, f64), quadrants: u8, narrowing: f64) -> Self {
        Self {
            interval,
            quadrants,
            first_quadrant: 0,
            thickness: 2.0,
            plaque_hu: 900.0,
            narrowing,
            taper: 3.0,
            soft_margin: 0.0,
        }
    }

    pub fn with_hu(mut self, hu: f64) -> Self {
        self.plaque_hu = hu;
        self
    }

    pub fn with_soft_margin(mut self, margin: f64) -> Self {
        self.soft_margin = margin;
        self
    }

    pub fn validate(&self, length: f64) -> Result<()> {
        let (a, b) = self.interval;
        if !(0.0 <= a && a < b && b <= length) {
            return Err(Error::Phantom(format!(
                "plaque interval {:?} outside centerline length {length}",
                self.interval
            )));
        }
        if !(1..=4).contains(&self.quadrants) || self.first_quadrant > 3 {
            return Err(Error::Phantom(format!(
                "angular extent {} from quadrant {} is not in 1..=4 / 0..=3",
                self.quadrants, self.first_quadrant
            )));
        }
        if !(self.plaque_hu > CALCIUM_THRESHOLD_HU) {
            return Err(Error::Phantom(format!(
                "plaque HU {} must exceed {CALCIUM_THRESHOLD_HU}",
                self.plaque_hu
            )));
        }
        if !(0.0..1.0).contains(&self.narrowing) {
            return Err(Error::Phantom(format!(
                "narrowing fraction {} not in [0, 1)",
                self.narrowing
            )));
        }
        if !(self.thickness > 0.0) || !(self.taper >= 0.0) || !(self.soft_margin >= 0.0) {
            return Err(Error::Phantom("plaque thickness must be > 0, taper and soft margin ≥ 0".into()));
        }
        Ok(())
    }

    /// Narrowing weight in `[0, 1]` at arc length `s`.
    pub fn weight(&self, s: f64) -> f64 {
        let (a, b) = (self.interval.0 - self.soft_margin, self.interval.1 + self.soft_margin);
        let d = if s < a {
            a - s
        } else if s > b {
            s - b
        } else {
            return 1.0;
        };
        if d >= self.taper {
            0.0
        } else {
            0.5 * (1.0 + (std::f64::consts::PI * d / self.taper).cos())
        }
    }

    pub fn covers(&self, s: f64) -> bool {
        s >= self.interval.0 && s <= self.interval.1
    }

    pub fn quadrant_calcified(&self, quadrant: u8) -> bool {
        (quadrant + 4 - self.first_quadrant) % 4 < self.quadrants
    }

    /// Plaque extent along the centerline.
    pub fn span(&self) -> f64 {
        self.interval.1 - self.interval.0
    }
}

/// Quadrant index 0..4 of an angle in `[0, 2π)`.
pub fn quadrant_of(angle: f64) -> u8 {
    ((angle / std::f64::consts::FRAC_PI_2).floor() as i64).rem_euclid(4) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taper_is_continuous() {
        let p = PlaqueModel::new((10.0, 20.0), 2, 0.5);
        assert_eq!(p.weight(15.0), 1.0);
        assert_eq!(p.weight(10.0), 1.0);
        assert!((p.weight(8.5) - 0.5).abs() < 1e-12);
        assert_eq!(p.weight(6.9), 0.0);
        assert_eq!(p.weight(23.0), 0.0);
        let p = p.with_soft_margin(2.0);
        assert_eq!(p.weight(8.0), 1.0);
        assert!((p.weight(6.5) - 0.5).abs() < 1e-12);
        assert!(!p.covers(9.0));
    }

    #[test]
    fn quadrant_sets_wrap() {
        let mut p = PlaqueModel::new((0.0, 1.0), 2, 0.0);
        p.first_quadrant = 3;
        let set: Vec<u8> = (0..4).filter(|&q| p.quadrant_calcified(q)).collect();
        assert_eq!(set, vec![0, 3]);
        assert_eq!(quadrant_of(0.0), 0);
        assert_eq!(quadrant_of(3.2), 2);
        assert_eq!(quadrant_of(6.28), 3);
    }

    #[test]
    fn validation() {
        assert!(PlaqueModel::new((0.0, 5.0), 1, 0.5).validate(10.0).is_ok());
        assert!(PlaqueModel::new((0.0, 5.0), 0, 0.5).validate(10.0).is_err());
        assert!(PlaqueModel::new((0.0, 5.0), 5, 0.5).validate(10.0).is_err());
        assert!(PlaqueModel::new((0.0, 5.0), 1, 1.0).validate(10.0).is_err());
        assert!(PlaqueModel::new((0.0, 12.0), 1, 0.5).validate(10.0).is_err());
        assert!(PlaqueModel::new((0.0, 5.0), 1, 0.5).with_hu(650.0).validate(10.0).is_err());
        let v = VesselModel::straight([2.0, 5.0, 5.0], [8.0, 5.0, 5.0], 2.0);
        assert!(v.validate([11, 11, 11]).is_ok());
        assert!(v.validate([11, 11, 7]).is_err());
    }
}
