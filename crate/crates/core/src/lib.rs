//! Computational toolkit for the three-dimensional volume product.
//!
//! The crate builds convex polytopes with labeled face lattices, computes
//! polar bodies, Santalo points and volume products, describes the space of
//! admissible vertex speeds for shadow systems, deforms polytopes along such
//! systems, and runs a volume-product descent toward the tetrahedron.

pub mod descent;
pub mod error;
pub mod geometry;
pub mod hull;
pub mod lattice;
pub mod off;
pub mod polar;
pub mod polytope;
pub mod rational;
pub mod shadow;
pub mod shapes;
pub mod speeds;

pub use error::{Error, Result};
pub use geometry::Point3;
pub use hull::hull;
pub use lattice::{Diagnostics, FaceLattice, Issue};
pub use polar::{polar, polar_volume, santalo_point, volume_product, SantaloResult};
pub use polytope::{Facet, Polytope};
pub use speeds::{AdmissibleBasis, Alternative, SpeedAssignment};

/// `P(simplex) = 4^4 / (3!)^2`.
pub const SIMPLEX_PRODUCT: f64 = 64.0 / 9.0;

/// `4^3 / 3!`, the product of the cube and of the octahedron.
pub const CUBE_PRODUCT: f64 = 32.0 / 3.0;
