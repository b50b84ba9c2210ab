//! Shared fixtures for the benchmarks.

use mahler_core::shapes::{random_polytope, sphere_points};
use mahler_core::{Point3, Polytope};

/// Vertex counts the benchmarks sweep over.
pub const SIZES: [usize; 4] = [8, 32, 128, 512];

pub fn points(n: usize) -> Vec<Point3> {
    sphere_points(n, n as u64)
}

pub fn polytope(n: usize) -> Polytope {
    random_polytope(n, n as u64).expect("random polytope")
}
