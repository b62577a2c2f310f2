//! Minimal 2D/3D geometry helpers used by the scenario and channel code.

/// 3D point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance_2d(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn distance_3d(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Axis-aligned heading on the street grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heading {
    East,
    West,
    North,
    South,
}

impl Heading {
    pub fn unit(&self) -> (f64, f64) {
        match self {
            Heading::East => (1.0, 0.0),
            Heading::West => (-1.0, 0.0),
            Heading::North => (0.0, 1.0),
            Heading::South => (0.0, -1.0),
        }
    }

    pub fn left(&self) -> Heading {
        match self {
            Heading::East => Heading::North,
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
        }
    }

    pub fn right(&self) -> Heading {
        self.left().opposite()
    }

    pub fn opposite(&self) -> Heading {
        match self {
            Heading::East => Heading::West,
            Heading::West => Heading::East,
            Heading::North => Heading::South,
            Heading::South => Heading::North,
        }
    }

    /// Azimuth in radians, east = 0, counterclockwise.
    pub fn azimuth(&self) -> f64 {
        match self {
            Heading::East => 0.0,
            Heading::North => std::f64::consts::FRAC_PI_2,
            Heading::West => std::f64::consts::PI,
            Heading::South => -std::f64::consts::FRAC_PI_2,
        }
    }
}

/// Rigid 2D pose (position plus axis-aligned heading) at ground level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Point3,
    pub heading: Heading,
}

impl Pose {
    /// Transform a body-frame offset (forward, left, up) to world space.
    pub fn apply(&self, forward: f64, left: f64, up: f64) -> Point3 {
        let (hx, hy) = self.heading.unit();
        // left of (hx, hy) is (-hy, hx)
        Point3::new(
            self.position.x + forward * hx - left * hy,
            self.position.y + forward * hy + left * hx,
            self.position.z + up,
        )
    }
}

/// Oriented box used for bus-body penetration tests. The box is centered
/// at `center` with half extents along the heading axis, its left normal,
/// and vertical.
#[derive(Debug, Clone, Copy)]
pub struct OrientedBox {
    pub center: Point3,
    pub heading: Heading,
    pub half_len: f64,
    pub half_wid: f64,
    pub half_height: f64,
}

impl OrientedBox {
    fn local_coords(&self, p: &Point3) -> (f64, f64, f64) {
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        let (hx, hy) = self.heading.unit();
        let fwd = dx * hx + dy * hy;
        let left = -dx * hy + dy * hx;
        (fwd, left, p.z - self.center.z)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        let (f, l, u) = self.local_coords(p);
        f.abs() <= self.half_len && l.abs() <= self.half_wid && u.abs() <= self.half_height
    }

    /// Whether the segment a-b intersects the box (slab test in the box frame).
    pub fn intersects_segment(&self, a: &Point3, b: &Point3) -> bool {
        let (ax, ay, az) = self.local_coords(a);
        let (bx, by, bz) = self.local_coords(b);
        let dir = (bx - ax, by - ay, bz - az);
        let mut t_min = 0.0f64;
        let mut t_max = 1.0f64;
        for (origin, d, half) in [
            (ax, dir.0, self.half_len),
            (ay, dir.1, self.half_wid),
            (az, dir.2, self.half_height),
        ] {
            if d.abs() < 1e-12 {
                if origin.abs() > half {
                    return false;
                }
            } else {
                let inv = 1.0 / d;
                let mut t0 = (-half - origin) * inv;
                let mut t1 = (half - origin) * inv;
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                t_min = t_min.max(t0);
                t_max = t_max.min(t1);
                if t_min > t_max {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_rotates_offsets() {
        let pose = Pose {
            position: Point3::new(10.0, 20.0, 0.0),
            heading: Heading::North,
        };
        // forward 2 to the north, left 1 to the west
        let p = pose.apply(2.0, 1.0, 3.0);
        assert!((p.x - 9.0).abs() < 1e-12);
        assert!((p.y - 22.0).abs() < 1e-12);
        assert!((p.z - 3.0).abs() < 1e-12);
    }

    #[test]
    fn segment_box_intersection() {
        let bus = OrientedBox {
            center: Point3::new(0.0, 0.0, 1.5),
            heading: Heading::East,
            half_len: 6.0,
            half_wid: 1.275,
            half_height: 1.5,
        };
        // Through the body
        let a = Point3::new(-10.0, 0.0, 1.0);
        let b = Point3::new(10.0, 0.0, 1.0);
        assert!(bus.intersects_segment(&a, &b));
        // Above the roof
        let c = Point3::new(-10.0, 0.0, 4.0);
        let d = Point3::new(10.0, 0.0, 4.0);
        assert!(!bus.intersects_segment(&c, &d));
        // From inside (a passenger) to outside
        let seat = Point3::new(2.0, 0.5, 1.0);
        let out = Point3::new(50.0, 30.0, 25.0);
        assert!(bus.intersects_segment(&seat, &out));
    }

    #[test]
    fn heading_turns_are_consistent() {
        for h in [Heading::East, Heading::West, Heading::North, Heading::South] {
            assert_eq!(h.left().right(), h);
            assert_eq!(h.opposite().opposite(), h);
            assert_ne!(h.left(), h.right());
        }
    }
}
