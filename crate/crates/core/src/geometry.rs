//! Small geometric helpers shared by the hull, polar and volume code.

use nalgebra::{Matrix3, Vector3};

pub type Point3 = Vector3<f64>;

/// Relative tolerance (times the diameter) under which points are treated as
/// coplanar when facets are merged, or as coincident when deduplicating.
pub const COPLANAR_REL_TOL: f64 = 1e-9;

/// Relative tolerance used when validating plane incidences.
pub const PLANE_REL_TOL: f64 = 1e-8;

/// Relative margin by which a vertex must lie inside a facet it does not
/// belong to. Kept below the merge tolerance so hull output always passes.
pub const INTERIOR_MARGIN_REL_TOL: f64 = 1e-10;

/// Exact sign of `((b - a) x (c - a)) . (d - a)`.
///
/// Positive when `d` lies on the side the right-handed normal of `(a, b, c)`
/// points to.
pub fn orient(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> f64 {
    // robust::orient3d has the opposite sign convention
    -robust::orient3d(coord(a), coord(b), coord(c), coord(d))
}

fn coord(p: &Point3) -> robust::Coord3D<f64> {
    robust::Coord3D { x: p.x, y: p.y, z: p.z }
}

pub fn det3(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    Matrix3::from_columns(&[*a, *b, *c]).determinant()
}

pub fn diameter(points: &[Point3]) -> f64 {
    let mut d2: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d2 = d2.max((p - q).norm_squared());
        }
    }
    d2.sqrt()
}

pub fn barycenter(points: &[Point3]) -> Point3 {
    let sum: Point3 = points.iter().sum();
    sum / points.len() as f64
}

/// Newell normal of a closed polygon (not normalized). Its length is twice the
/// polygon's area.
pub fn newell_normal(ring: &[Point3]) -> Point3 {
    let mut n = Point3::zeros();
    for (i, p) in ring.iter().enumerate() {
        let q = &ring[(i + 1) % ring.len()];
        n.x += (p.y - q.y) * (p.z + q.z);
        n.y += (p.z - q.z) * (p.x + q.x);
        n.z += (p.x - q.x) * (p.y + q.y);
    }
    n
}

/// Orthonormal pair spanning the plane orthogonal to `n` (assumed unit).
pub fn plane_basis(n: &Point3) -> (Point3, Point3) {
    let helper = if n.x.abs() < 0.6 {
        Point3::x()
    } else if n.y.abs() < 0.6 {
        Point3::y()
    } else {
        Point3::z()
    };
    let e1 = (helper - n * n.dot(&helper)).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

pub fn to_array(p: &Point3) -> [f64; 3] {
    [p.x, p.y, p.z]
}

pub fn from_array(a: [f64; 3]) -> Point3 {
    Point3::new(a[0], a[1], a[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orient_sign_matches_right_hand_rule() {
        let o = Point3::zeros();
        let (x, y, z) = (Point3::x(), Point3::y(), Point3::z());
        assert!(orient(&o, &x, &y, &z) > 0.0);
        assert!(orient(&o, &y, &x, &z) < 0.0);
        assert_eq!(orient(&o, &x, &y, &Point3::new(3.0, -2.0, 0.0)), 0.0);
    }

    #[test]
    fn newell_normal_of_unit_square() {
        let ring = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let n = newell_normal(&ring);
        assert_eq!(n, Point3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn plane_basis_is_orthonormal() {
        for n in [Point3::x(), Point3::new(1.0, 2.0, 3.0).normalize(), -Point3::z()] {
            let (a, b) = plane_basis(&n);
            assert!(a.dot(&n).abs() < 1e-15 && b.dot(&n).abs() < 1e-15);
            assert!((a.norm() - 1.0).abs() < 1e-15 && (b.norm() - 1.0).abs() < 1e-15);
            assert!(a.dot(&b).abs() < 1e-15);
        }
    }
}
