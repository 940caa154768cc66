//! Polyline centerlines with arc-length parameterisation and a
//! rotation-minimising frame.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn unit(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    (n > 1e-12).then(|| scale(a, 1.0 / n))
}

/// Local orthonormal frame: tangent, normal, binormal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub tangent: Vec3,
    pub normal: Vec3,
    pub binormal: Vec3,
}

/// Nearest point of a centerline to a query point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Closest {
    /// Arc length of the nearest point.
    pub s: f64,
    pub distance: f64,
    /// Query minus nearest point.
    pub offset: Vec3,
    pub segment: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Centerline {
    points: Vec<Vec3>,
    /// Cumulative arc length at each point.
    arc: Vec<f64>,
    /// One frame per segment, transported along the curve.
    frames: Vec<Frame>,
}

impl Centerline {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Phantom("centerline needs at least 2 points".into()));
        }
        let mut arc = vec![0.0];
        let mut tangents = Vec::with_capacity(points.len() - 1);
        for w in points.windows(2) {
            let d = sub(w[1], w[0]);
            let t = unit(d).ok_or_else(|| {
                Error::Geometry(format!("degenerate centerline segment at {:?}", w[0]))
            })?;
            tangents.push(t);
            arc.push(arc.last().unwrap() + norm(d));
        }
        // seed the normal from the axis least aligned with the first tangent
        let t0 = tangents[0];
        let axis = (0..3)
            .min_by(|&a, &b| t0[a].abs().total_cmp(&t0[b].abs()))
            .unwrap();
        let mut e = [0.0; 3];
        e[axis] = 1.0;
        let mut normal = unit(sub(e, scale(t0, dot(e, t0)))).unwrap();
        let mut frames = Vec::with_capacity(tangents.len());
        let mut prev = t0;
        for &t in &tangents {
            // rotate the previous normal by the rotation taking prev onto t
            let axis = cross(prev, t);
            let (sin, cos) = (norm(axis), dot(prev, t));
            if sin > 1e-12 {
                let k = scale(axis, 1.0 / sin);
                normal = add(
                    add(scale(normal, cos), scale(cross(k, normal), sin)),
                    scale(k, dot(k, normal) * (1.0 - cos)),
                );
            } else if cos < 0.0 {
                return Err(Error::Geometry("centerline reverses direction".into()));
            }
            normal = unit(sub(normal, scale(t, dot(normal, t)))).unwrap();
            frames.push(Frame {
                tangent: t,
                normal,
                binormal: cross(t, normal),
            });
            prev = t;
        }
        Ok(Self {
            points,
            arc,
            frames,
        })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Cumulative arc length at every point.
    pub fn arc_lengths(&self) -> &[f64] {
        &self.arc
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    fn segment_at(&self, s: f64) -> (usize, f64) {
        let s = s.clamp(0.0, self.length());
        let i = match self.arc.binary_search_by(|a| a.total_cmp(&s)) {
            Ok(i) => i.min(self.frames.len() - 1),
            Err(i) => (i - 1).min(self.frames.len() - 1),
        };
        let len = self.arc[i + 1] - self.arc[i];
        (i, ((s - self.arc[i]) / len).clamp(0.0, 1.0))
    }

    pub fn point_at(&self, s: f64) -> Vec3 {
        let (i, t) = self.segment_at(s);
        add(self.points[i], scale(sub(self.points[i + 1], self.points[i]), t))
    }

    pub fn frame_at(&self, s: f64) -> Frame {
        self.frames[self.segment_at(s).0]
    }

    /// Linear interpolation of per-point samples at arc length `s`.
    pub fn interpolate(&self, samples: &[f64], s: f64) -> f64 {
        let (i, t) = self.segment_at(s);
        samples[i] + (samples[i + 1] - samples[i]) * t
    }

    pub fn closest(&self, p: Vec3) -> Closest {
        let mut best = Closest {
            s: 0.0,
            distance: f64::INFINITY,
            offset: [0.0; 3],
            segment: 0,
        };
        for (i, w) in self.points.windows(2).enumerate() {
            let d = sub(w[1], w[0]);
            let len2 = dot(d, d);
            let t = (dot(sub(p, w[0]), d) / len2).clamp(0.0, 1.0);
            let q = add(w[0], scale(d, t));
            let off = sub(p, q);
            let dist = norm(off);
            if dist < best.distance {
                best = Closest {
                    s: self.arc[i] + t * len2.sqrt(),
                    distance: dist,
                    offset: off,
                    segment: i,
                };
            }
        }
        best
    }

    /// Angle of the offset around the tangent, measured from the frame
    /// normal towards the binormal, in `[0, 2π)`.
    pub fn angle(&self, c: &Closest) -> f64 {
        let f = self.frames[c.segment];
        let a = dot(c.offset, f.binormal).atan2(dot(c.offset, f.normal));
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    }
}
