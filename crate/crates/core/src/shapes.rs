//! Built-in polytopes and seeded random polytopes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::hull::hull;
use crate::polytope::Polytope;

const PHI: f64 = 1.618_033_988_749_895;

fn builtin_hull(points: &[Point3]) -> Polytope {
    hull(points).expect("built-in shape is full-dimensional")
}

/// The self-dual regular simplex `conv{(1,1,1),(1,-1,-1),(-1,1,-1),(-1,-1,1)}`.
pub fn simplex() -> Polytope {
    builtin_hull(&[
        Point3::new(1.0, 1.0, 1.0),
        Point3::new(1.0, -1.0, -1.0),
        Point3::new(-1.0, 1.0, -1.0),
        Point3::new(-1.0, -1.0, 1.0),
    ])
}

/// `[-1, 1]^3`; vertex `s` has coordinate signs given by the bits of `s`
/// (bit 2 for x, bit 1 for y, bit 0 for z).
pub fn cube() -> Polytope {
    let pts: Vec<Point3> = (0..8)
        .map(|s: usize| {
            let c = |b: usize| if (s >> b) & 1 == 1 { 1.0 } else { -1.0 };
            Point3::new(c(2), c(1), c(0))
        })
        .collect();
    builtin_hull(&pts)
}

/// `conv{+-e_1, +-e_2, +-e_3}` with labels `e1, -e1, e2, -e2, e3, -e3`.
pub fn octahedron() -> Polytope {
    let mut pts = Vec::new();
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut p = Point3::zeros();
            p[axis] = sign;
            pts.push(p);
        }
    }
    builtin_hull(&pts)
}

pub fn dodecahedron() -> Polytope {
    let mut pts = Vec::new();
    for s in 0..8 {
        let c = |b: usize| if (s >> b) & 1 == 1 { 1.0 } else { -1.0 };
        pts.push(Point3::new(c(2), c(1), c(0)));
    }
    for a in [1.0, -1.0] {
        for b in [1.0, -1.0] {
            pts.push(Point3::new(0.0, a / PHI, b * PHI));
            pts.push(Point3::new(a / PHI, b * PHI, 0.0));
            pts.push(Point3::new(a * PHI, 0.0, b / PHI));
        }
    }
    builtin_hull(&pts)
}

pub fn icosahedron() -> Polytope {
    let mut pts = Vec::new();
    for a in [1.0, -1.0] {
        for b in [1.0, -1.0] {
            pts.push(Point3::new(0.0, a, b * PHI));
            pts.push(Point3::new(a, b * PHI, 0.0));
            pts.push(Point3::new(a * PHI, 0.0, b));
        }
    }
    builtin_hull(&pts)
}

pub const BUILTIN_NAMES: [&str; 5] = ["simplex", "cube", "octahedron", "dodecahedron", "icosahedron"];

pub fn builtin(name: &str) -> Result<Polytope> {
    match name {
        "simplex" | "tetrahedron" => Ok(simplex()),
        "cube" => Ok(cube()),
        "octahedron" => Ok(octahedron()),
        "dodecahedron" => Ok(dodecahedron()),
        "icosahedron" => Ok(icosahedron()),
        other => Err(Error::InvalidArgument(format!(
            "unknown shape '{other}' (expected one of {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

/// `n` points uniformly distributed on the unit sphere.
pub fn sphere_points(n: usize, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = Point3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let r = p.norm();
        if r > 1e-3 && r <= 1.0 {
            out.push(p / r);
        }
    }
    out
}

/// `n` nearly evenly spread points on the unit sphere (Fibonacci lattice).
pub fn fibonacci_sphere(n: usize) -> Vec<Point3> {
    let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden_angle * i as f64;
            Point3::new(r * a.cos(), r * a.sin(), z)
        })
        .collect()
}

/// Hull of `n` seeded uniform points on the unit sphere. A degenerate draw is
/// retried with the next seed, at most 100 times.
pub fn random_polytope(n: usize, seed: u64) -> Result<Polytope> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("need n >= 4, got {n}")));
    }
    let mut last = None;
    for attempt in 0..100 {
        match hull(&sphere_points(n, seed.wrapping_add(attempt))) {
            Ok(p) if p.is_valid() => return Ok(p),
            Ok(p) => last = Some(Error::InvalidPolytope(p.validate().to_string())),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}
