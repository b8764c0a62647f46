//! Segment, capsule and sphere clearance.

use nalgebra::Vector3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
}

impl Segment {
    pub fn new(a: Vector3<f64>, b: Vector3<f64>) -> Self {
        Self { a, b }
    }

    /// Degenerate segment, i.e. a sphere center.
    pub fn point(p: Vector3<f64>) -> Self {
        Self { a: p, b: p }
    }

    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.a + (self.b - self.a) * t
    }
}

/// Closest pair of parameters `(s, t)` on two segments.
pub fn closest_parameters(s1: &Segment, s2: &Segment) -> (f64, f64) {
    let d1 = s1.b - s1.a;
    let d2 = s2.b - s2.a;
    let r = s1.a - s2.a;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    const EPS: f64 = 1e-18;

    if a <= EPS && e <= EPS {
        return (0.0, 0.0);
    }
    if a <= EPS {
        return (0.0, (f / e).clamp(0.0, 1.0));
    }
    let c = d1.dot(&r);
    if e <= EPS {
        return ((-c / a).clamp(0.0, 1.0), 0.0);
    }
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    // Parallel segments: any s works, pick the start and let t fix it up.
    let mut s = if denom > 1e-14 * a * e {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (s, t)
}

pub fn segment_distance(s1: &Segment, s2: &Segment) -> f64 {
    let (s, t) = closest_parameters(s1, s2);
    (s1.at(s) - s2.at(t)).norm()
}

/// Signed clearance between two capsules: segment distance minus both
/// radii. Negative values mean penetration.
pub fn capsule_distance(seg_a: &Segment, r_a: f64, seg_b: &Segment, r_b: f64) -> f64 {
    segment_distance(seg_a, seg_b) - (r_a + r_b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Vector3<f64>,
    pub radius: f64,
}

/// Distance from a point to a segment.
pub fn point_segment_distance(p: &Vector3<f64>, seg: &Segment) -> f64 {
    segment_distance(&Segment::point(*p), seg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn parallel_unit_segments() {
        let a = Segment::new(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0));
        let b = Segment::new(v(0.0, 5.0, 0.0), v(1.0, 5.0, 0.0));
        assert_relative_eq!(capsule_distance(&a, 1.0, &b, 1.0), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn coincident_segments() {
        let a = Segment::new(v(1.0, 2.0, 3.0), v(4.0, 5.0, 6.0));
        assert_relative_eq!(capsule_distance(&a, 0.7, &a, 1.1), -1.8, epsilon = 1e-12);
    }

    #[test]
    fn crossing_segments_touch() {
        let a = Segment::new(v(-1.0, 0.0, 0.0), v(1.0, 0.0, 0.0));
        let b = Segment::new(v(0.0, -1.0, 0.0), v(0.0, 1.0, 0.0));
        assert_relative_eq!(segment_distance(&a, &b), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn endpoint_to_endpoint() {
        let a = Segment::new(v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0));
        let b = Segment::new(v(4.0, 4.0, 0.0), v(4.0, 8.0, 0.0));
        assert_relative_eq!(segment_distance(&a, &b), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn sphere_is_zero_length_capsule() {
        let p = Segment::point(v(0.0, 0.0, 3.0));
        let q = Segment::point(v(4.0, 0.0, 0.0));
        assert_relative_eq!(capsule_distance(&p, 1.0, &q, 1.5), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn point_against_segment_interior() {
        let seg = Segment::new(v(0.0, 0.0, 0.0), v(10.0, 0.0, 0.0));
        assert_relative_eq!(
            point_segment_distance(&v(3.0, 4.0, 0.0), &seg),
            4.0,
            epsilon = 1e-12
        );
    }
}
