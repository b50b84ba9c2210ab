//! Admissible vertex speeds.
//!
//! A speed vector `alpha` (one entry per vertex position) is admissible for a
//! direction `theta` when, on every facet not parallel to `theta`, the values
//! of `alpha` at the facet's vertices are the trace of an affine function on
//! the facet plane. For a facet with ring `p_1, ..., p_m` that is `m - 3`
//! linear conditions: writing `p_j = a p_1 + b p_2 + c p_3` with
//! `a + b + c = 1`, we need `alpha_j = a alpha_1 + b alpha_2 + c alpha_3`
//! for `j >= 4`.
//!
//! Globally affine speeds `alpha_i = w . x_i + beta` always satisfy these and
//! form the 4-dimensional trivial subspace.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{orient, to_array, Point3};
use crate::polytope::{Facet, Polytope};
use crate::rational::{self, Rational};

/// `|theta . v_k|` at or below this counts as parallel.
pub const PARALLEL_TOL: f64 = 1e-10;

/// Singular values at or below this fraction of the largest are treated as
/// zero on the floating route.
pub const SVD_REL_THRESHOLD: f64 = 1e-8;

/// Relative residual under which a floating speed satisfies a facet condition.
pub const ADMISSIBLE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedAssignment {
    pub theta: [f64; 3],
    pub alpha: Vec<f64>,
}

impl SpeedAssignment {
    /// Normalizes `theta`; fails on a zero or non-finite direction.
    pub fn new(theta: Point3, alpha: Vec<f64>) -> Result<SpeedAssignment> {
        let n = theta.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidArgument("direction must be nonzero".into()));
        }
        Ok(SpeedAssignment {
            theta: to_array(&(theta / n)),
            alpha,
        })
    }

    pub fn theta(&self) -> Point3 {
        Point3::from(self.theta)
    }
}

/// Which arithmetic to use for rank and kernel computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Arithmetic {
    /// Exact when every facet is exactly coplanar in rational arithmetic.
    #[default]
    Auto,
    Exact,
    Float,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleBasis {
    pub theta: [f64; 3],
    pub basis: Vec<Vec<f64>>,
    pub dim: usize,
    pub trivial_dim: usize,
    /// Whether rank and kernel were computed exactly.
    pub exact: bool,
    /// Facet labels whose condition was dropped as parallel.
    pub parallel_facets: Vec<usize>,
    /// Parallel facets whose `|theta . v|` was nonzero but within tolerance.
    pub near_parallel: Vec<usize>,
}

fn facet_by_label(p: &Polytope, k: usize) -> Result<&Facet> {
    p.facet(k)
        .ok_or_else(|| Error::InvalidArgument(format!("no facet labeled {k}")))
}

pub fn facet_parallel(p: &Polytope, k: usize, theta: &Point3) -> Result<bool> {
    let f = facet_by_label(p, k)?;
    Ok(is_parallel(f, &theta.normalize()))
}

fn is_parallel(f: &Facet, unit_theta: &Point3) -> bool {
    unit_theta.dot(&f.normal).abs() <= PARALLEL_TOL
}

/// True when each facet's vertices are exactly coplanar as rationals.
pub fn exactly_planar(p: &Polytope) -> bool {
    let x = p.points();
    p.facets().iter().all(|f| {
        f.ring[3..]
            .iter()
            .all(|&j| orient(&x[f.ring[0]], &x[f.ring[1]], &x[f.ring[2]], &x[j]) == 0.0)
    })
}

/// Coordinate to drop when projecting a facet to 2D.
fn drop_axis(n: &Point3) -> usize {
    n.iamax()
}

fn project(p: &Point3, axis: usize) -> (f64, f64) {
    match axis {
        0 => (p.y, p.z),
        1 => (p.z, p.x),
        _ => (p.x, p.y),
    }
}

/// Indices into the ring of the vertex triple spanning the largest triangle,
/// so the affine coordinates of the other vertices stay well conditioned.
fn reference_triple(p: &Polytope, f: &Facet) -> [usize; 3] {
    let x = p.points();
    let m = f.ring.len();
    let mut best = ([0, 1, 2], f64::NEG_INFINITY);
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let (a, b, c) = (x[f.ring[i]], x[f.ring[j]], x[f.ring[k]]);
                let area = (b - a).cross(&(c - a)).norm();
                if area > best.1 {
                    best = ([i, j, k], area);
                }
            }
        }
    }
    best.0
}

/// Per-facet conditions in floating point: `(facet label, row)` pairs.
fn float_rows(p: &Polytope, facets: &[&Facet]) -> Vec<(usize, Vec<f64>)> {
    let x = p.points();
    let mut rows = Vec::new();
    for f in facets {
        let axis = drop_axis(&f.normal);
        let t = reference_triple(p, f);
        let (r1, r2, r3) = (f.ring[t[0]], f.ring[t[1]], f.ring[t[2]]);
        let q = [project(&x[r1], axis), project(&x[r2], axis), project(&x[r3], axis)];
        let m = Matrix3::new(q[0].0, q[1].0, q[2].0, q[0].1, q[1].1, q[2].1, 1.0, 1.0, 1.0);
        let lu = m.lu();
        for (_, &j) in f.ring.iter().enumerate().filter(|(i, _)| !t.contains(i)) {
            let (u, v) = project(&x[j], axis);
            let abc = lu.solve(&Vector3::new(u, v, 1.0)).unwrap_or_else(Vector3::zeros);
            let mut row = vec![0.0; x.len()];
            row[j] += 1.0;
            row[r1] -= abc[0];
            row[r2] -= abc[1];
            row[r3] -= abc[2];
            rows.push((f.label, row));
        }
    }
    rows
}

/// Same conditions, computed exactly by Cramer's rule.
fn exact_rows(p: &Polytope, facets: &[&Facet]) -> Vec<Vec<Rational>> {
    let x = p.points();
    let zero = Rational::from_integer(0.into());
    let mut rows = Vec::new();
    for f in facets {
        let axis = drop_axis(&f.normal);
        let tri = reference_triple(p, f);
        let (r1, r2, r3) = (f.ring[tri[0]], f.ring[tri[1]], f.ring[tri[2]]);
        let q: Vec<(Rational, Rational)> = [r1, r2, r3]
            .iter()
            .map(|&i| {
                let (u, v) = project(&x[i], axis);
                (rational::from_f64(u), rational::from_f64(v))
            })
            .collect();
        // det of [[u1 u2 u3], [v1 v2 v3], [1 1 1]]
        let det = |a: &(Rational, Rational), b: &(Rational, Rational), c: &(Rational, Rational)| {
            &a.0 * (&b.1 - &c.1) - &b.0 * (&a.1 - &c.1) + &c.0 * (&a.1 - &b.1)
        };
        let d = det(&q[0], &q[1], &q[2]);
        for (_, &j) in f.ring.iter().enumerate().filter(|(i, _)| !tri.contains(i)) {
            let (u, v) = project(&x[j], axis);
            let t = (rational::from_f64(u), rational::from_f64(v));
            let a = det(&t, &q[1], &q[2]) / &d;
            let b = det(&q[0], &t, &q[2]) / &d;
            let c = det(&q[0], &q[1], &t) / &d;
            let mut row = vec![zero.clone(); x.len()];
            row[j] += Rational::from_integer(1.into());
            row[r1] -= a;
            row[r2] -= b;
            row[r3] -= c;
            rows.push(row);
        }
    }
    rows
}

fn constrained_facets<'a>(p: &'a Polytope, unit_theta: &Point3) -> (Vec<&'a Facet>, Vec<usize>, Vec<usize>) {
    let mut active = Vec::new();
    let mut parallel = Vec::new();
    let mut near = Vec::new();
    for f in p.facets() {
        if is_parallel(f, unit_theta) {
            parallel.push(f.label);
            if unit_theta.dot(&f.normal).abs() > 1e-13 {
                near.push(f.label);
            }
        } else if f.ring.len() > 3 {
            active.push(f);
        }
    }
    (active, parallel, near)
}

/// Rank and kernel of a dense row set via SVD with a relative threshold.
pub fn float_kernel(rows: &[Vec<f64>], cols: usize, rel_threshold: f64) -> (usize, Vec<Vec<f64>>) {
    if rows.is_empty() {
        let basis = (0..cols)
            .map(|c| (0..cols).map(|r| if r == c { 1.0 } else { 0.0 }).collect())
            .collect();
        return (0, basis);
    }
    let n = rows.len().max(cols);
    let m = DMatrix::from_fn(n, cols, |r, c| if r < rows.len() { rows[r][c] } else { 0.0 });
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let s = &svd.singular_values;
    let max = s.max();
    let mut rank = 0;
    let mut basis = Vec::new();
    for i in 0..cols {
        if max > 0.0 && s[i] > rel_threshold * max {
            rank += 1;
        } else {
            basis.push(v_t.row(i).iter().copied().collect());
        }
    }
    (rank, basis)
}

pub fn admissible_space(p: &Polytope, theta: &Point3) -> Result<AdmissibleBasis> {
    admissible_space_with(p, theta, Arithmetic::Auto)
}

pub fn admissible_space_with(p: &Polytope, theta: &Point3, arithmetic: Arithmetic) -> Result<AdmissibleBasis> {
    let unit = SpeedAssignment::new(*theta, Vec::new())?.theta();
    let (active, parallel_facets, near_parallel) = constrained_facets(p, &unit);
    let cols = p.num_vertices();
    let exact = match arithmetic {
        Arithmetic::Exact => true,
        Arithmetic::Float => false,
        Arithmetic::Auto => exactly_planar(p),
    };
    let basis: Vec<Vec<f64>> = if exact {
        rational::kernel_basis(&exact_rows(p, &active), cols)
            .iter()
            .map(|v| v.iter().map(rational::to_f64).collect())
            .collect()
    } else {
        let rows: Vec<Vec<f64>> = float_rows(p, &active)
            .into_iter()
            .map(|(_, r)| {
                let n = r.iter().map(|c| c * c).sum::<f64>().sqrt();
                r.into_iter().map(|c| c / n).collect()
            })
            .collect();
        float_kernel(&rows, cols, SVD_REL_THRESHOLD).1
    };

    let speed_ok = |alpha: &[f64]| {
        let s = SpeedAssignment {
            theta: to_array(&unit),
            alpha: alpha.to_vec(),
        };
        admissibility_violations(p, &s).is_empty()
    };
    let trivial_dim = trivial_space(p)?.iter().filter(|t| speed_ok(t)).count();

    Ok(AdmissibleBasis {
        theta: to_array(&unit),
        dim: basis.len(),
        basis,
        trivial_dim,
        exact,
        parallel_facets,
        near_parallel,
    })
}

/// Facets (label, relative residual) on which `s` fails the affine condition.
pub fn admissibility_violations(p: &Polytope, s: &SpeedAssignment) -> Vec<(usize, f64)> {
    if s.alpha.len() != p.num_vertices() {
        return vec![(usize::MAX, f64::INFINITY)];
    }
    let (active, _, _) = constrained_facets(p, &s.theta());
    let scale = s.alpha.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let mut worst: Vec<(usize, f64)> = Vec::new();
    for (label, row) in float_rows(p, &active) {
        let norm = row.iter().map(|c| c * c).sum::<f64>().sqrt();
        let r = row.iter().zip(&s.alpha).map(|(c, a)| c * a).sum::<f64>().abs() / (scale * norm);
        if r > ADMISSIBLE_REL_TOL {
            match worst.last_mut() {
                Some((l, w)) if *l == label => *w = w.max(r),
                _ => worst.push((label, r)),
            }
        }
    }
    worst
}

/// Evaluations of `1, x, y, z` at the vertices.
pub fn trivial_space(p: &Polytope) -> Result<Vec<Vec<f64>>> {
    let x = p.points();
    let basis = vec![
        vec![1.0; x.len()],
        x.iter().map(|v| v.x).collect(),
        x.iter().map(|v| v.y).collect(),
        x.iter().map(|v| v.z).collect(),
    ];
    let m = DMatrix::from_fn(x.len(), 4, |r, c| basis[c][r]);
    let s = m.singular_values();
    if x.len() < 4 || s.min() <= 1e-12 * s.max() {
        return Err(Error::DegenerateInput("vertices do not affinely span 3-space".into()));
    }
    Ok(basis)
}

/// Orthonormal basis (as columns) of the trivial speeds.
fn trivial_projector(p: &Polytope) -> Result<DMatrix<f64>> {
    let t = trivial_space(p)?;
    let m = DMatrix::from_fn(p.num_vertices(), 4, |r, c| t[c][r]);
    Ok(m.qr().q())
}

/// A unit admissible speed orthogonal to the trivial speeds, if the
/// admissible space is larger than them.
pub fn nontrivial_speed(p: &Polytope, theta: &Point3) -> Result<Option<SpeedAssignment>> {
    let basis = admissible_space(p, theta)?;
    nontrivial_from_basis(p, &basis)
}

pub fn nontrivial_from_basis(p: &Polytope, basis: &AdmissibleBasis) -> Result<Option<SpeedAssignment>> {
    if basis.dim <= 4 {
        return Ok(None);
    }
    let q = trivial_projector(p)?;
    let mut best: Option<(f64, DVector<f64>)> = None;
    for b in &basis.basis {
        let v = DVector::from_column_slice(b);
        let v = &v / v.norm();
        let r = &v - &q * (q.transpose() * &v);
        let n = r.norm();
        if best.as_ref().is_none_or(|(m, _)| n > *m) {
            best = Some((n, r));
        }
    }
    match best {
        Some((n, r)) if n > 1e-8 => Ok(Some(SpeedAssignment {
            theta: basis.theta,
            alpha: (r / n).iter().copied().collect(),
        })),
        _ => Ok(None),
    }
}

/// The facet used for the dimension bound: lowest label among facets with
/// the most vertices.
pub fn maximal_facet(p: &Polytope) -> &Facet {
    let delta = p.facets().iter().map(|f| f.ring.len()).max().unwrap_or(0);
    p.facets()
        .iter()
        .find(|f| f.ring.len() == delta)
        .expect("polytope has facets")
}

/// Unit directions of the edges of the maximal facet, in edge-label order.
/// The first one is the direction used by `dimension_bound_check`.
pub fn candidate_directions(p: &Polytope) -> Vec<Point3> {
    let facet = maximal_facet(p);
    let on_facet: BTreeSet<usize> = facet.ring.iter().copied().collect();
    p.edges()
        .into_iter()
        .filter(|(_, a, b)| on_facet.contains(a) && on_facet.contains(b))
        .filter(|(j, _, _)| p.lattice().phi2.get(j).is_some_and(|s| s.contains(&facet.label)))
        .map(|(_, a, b)| (p.points()[b] - p.points()[a]).normalize())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub facet: usize,
    pub theta: [f64; 3],
    pub dim: usize,
    pub bound: i64,
    pub satisfied: bool,
    pub exact: bool,
    pub near_parallel: Vec<usize>,
}

/// Computes `dim A_theta(P)` for `theta` along the first edge of the maximal
/// facet and compares it with `F - V + Delta + 1`.
pub fn dimension_bound_check(p: &Polytope) -> Result<BoundReport> {
    let facet = maximal_facet(p);
    let theta = candidate_directions(p)
        .into_iter()
        .next()
        .ok_or_else(|| Error::InvalidPolytope("maximal facet has no edges".into()))?;
    let space = admissible_space(p, &theta)?;
    let bound = p.num_facets() as i64 - p.num_vertices() as i64 + facet.ring.len() as i64 + 1;
    Ok(BoundReport {
        facet: facet.label,
        theta: space.theta,
        dim: space.dim,
        bound,
        satisfied: space.dim as i64 >= bound,
        exact: space.exact,
        near_parallel: space.near_parallel,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alternative {
    PrimalMoves,
    PolarMoves,
    Both,
    Tetrahedron,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Criteria {
    /// `Delta(P) > V - F + 3`
    pub primal: bool,
    /// `d(P) > F - V + 3`
    pub polar: bool,
}

pub fn criteria(p: &Polytope) -> Criteria {
    let (delta, degree) = p.facet_stats();
    let (v, f) = (p.num_vertices() as i64, p.num_facets() as i64);
    Criteria {
        primal: delta as i64 > v - f + 3,
        polar: degree as i64 > f - v + 3,
    }
}

pub fn combinatorial_alternative(p: &Polytope) -> Alternative {
    match criteria(p) {
        Criteria {
            primal: true,
            polar: true,
        } => Alternative::Both,
        Criteria {
            primal: true,
            polar: false,
        } => Alternative::PrimalMoves,
        Criteria {
            primal: false,
            polar: true,
        } => Alternative::PolarMoves,
        Criteria {
            primal: false,
            polar: false,
        } => Alternative::Tetrahedron,
    }
}

/// JSON report for the admissible-speed analysis of one polytope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedReport {
    pub theta: [f64; 3],
    pub dim: usize,
    pub trivial_dim: usize,
    pub bound: i64,
    pub basis: Vec<Vec<f64>>,
    pub criteria: Criteria,
    pub alternative: Alternative,
}

/// Report for `theta`, or for the bound direction when `theta` is `None`.
pub fn speed_report(p: &Polytope, theta: Option<Point3>) -> Result<SpeedReport> {
    let theta = match theta {
        Some(t) => t,
        None => Point3::from(dimension_bound_check(p)?.theta),
    };
    let space = admissible_space(p, &theta)?;
    let delta = p.facet_stats().0 as i64;
    Ok(SpeedReport {
        theta: space.theta,
        dim: space.dim,
        trivial_dim: space.trivial_dim,
        bound: p.num_facets() as i64 - p.num_vertices() as i64 + delta + 1,
        basis: space.basis,
        criteria: criteria(p),
        alternative: combinatorial_alternative(p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::{cube, dodecahedron, octahedron, simplex};

    fn face_with_normal(p: &Polytope, n: Point3) -> usize {
        p.facets().iter().find(|f| (f.normal - n).norm() < 1e-12).unwrap().label
    }

    #[test]
    fn facet_parallel_on_cube() {
        let c = cube();
        let k = face_with_normal(&c, Point3::x());
        assert!(facet_parallel(&c, k, &Point3::y()).unwrap());
        assert!(!facet_parallel(&c, k, &Point3::x()).unwrap());
        assert!(!facet_parallel(&c, k, &Point3::new(1.0, 1.0, 0.0)).unwrap());
        assert!(facet_parallel(&c, 99, &Point3::x()).is_err());
    }

    #[test]
    fn dims_of_builtins() {
        let theta = Point3::new(0.3, -0.5, 0.8);
        assert_eq!(admissible_space(&simplex(), &theta).unwrap().dim, 4);
        assert_eq!(admissible_space(&octahedron(), &theta).unwrap().dim, 6);
        let c = admissible_space(&cube(), &Point3::x()).unwrap();
        assert!(c.exact);
        assert_eq!((c.dim, c.trivial_dim), (6, 4));
        assert_eq!(c.parallel_facets.len(), 4);
    }

    #[test]
    fn cube_hand_speed_is_admissible_and_nontrivial() {
        // alpha = y on the facet {x = 1}, 0 on {x = -1}
        let c = cube();
        let alpha: Vec<f64> = c.points().iter().map(|p| if p.x > 0.0 { p.y } else { 0.0 }).collect();
        let s = SpeedAssignment::new(Point3::x(), alpha.clone()).unwrap();
        assert!(admissibility_violations(&c, &s).is_empty());

        // least-squares oracle: the best trivial fit leaves a nonzero residual
        let t = trivial_space(&c).unwrap();
        let m = DMatrix::from_fn(8, 4, |r, k| t[k][r]);
        let b = DVector::from_vec(alpha);
        let coef = m.clone().svd(true, true).solve(&b, 1e-12).unwrap();
        assert!((&m * coef - &b).norm() > 0.5);

        let n = nontrivial_speed(&c, &Point3::x()).unwrap().unwrap();
        assert!(admissibility_violations(&c, &n).is_empty());
        assert!((n.alpha.iter().map(|a| a * a).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inadmissible_speed_names_the_facet() {
        let c = cube();
        let mut alpha = vec![0.0; 8];
        let top = face_with_normal(&c, Point3::x());
        let pos = c.facet(top).unwrap().ring[0];
        alpha[pos] = 1.0;
        let s = SpeedAssignment::new(Point3::x(), alpha).unwrap();
        let bad = admissibility_violations(&c, &s);
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].0, top);
    }

    #[test]
    fn trivial_speeds_are_admissible_everywhere() {
        for p in [cube(), octahedron(), dodecahedron()] {
            for theta in [Point3::x(), Point3::new(1.0, 2.0, -0.5)] {
                for t in trivial_space(&p).unwrap() {
                    let s = SpeedAssignment::new(theta, t).unwrap();
                    assert!(admissibility_violations(&p, &s).is_empty());
                }
            }
        }
    }

    #[test]
    fn nontrivial_speed_presence() {
        assert!(nontrivial_speed(&simplex(), &Point3::new(0.2, 0.1, 0.9))
            .unwrap()
            .is_none());
        assert!(nontrivial_speed(&octahedron(), &Point3::new(0.2, 0.1, 0.9))
            .unwrap()
            .is_some());
    }

    #[test]
    fn dimension_bounds() {
        let c = dimension_bound_check(&cube()).unwrap();
        assert_eq!(c.bound, 3);
        assert!(c.dim >= 6 && c.satisfied);
        let t = dimension_bound_check(&simplex()).unwrap();
        assert_eq!((t.dim, t.bound), (4, 4));
        let d = dimension_bound_check(&dodecahedron()).unwrap();
        assert_eq!(d.bound, -2);
        assert!(d.satisfied && !d.exact && d.dim >= 4);
    }

    #[test]
    fn alternatives_of_builtins() {
        assert_eq!(combinatorial_alternative(&cube()), Alternative::PolarMoves);
        assert_eq!(combinatorial_alternative(&octahedron()), Alternative::PrimalMoves);
        assert_eq!(combinatorial_alternative(&simplex()), Alternative::Tetrahedron);
    }

    #[test]
    fn exact_and_float_routes_agree_on_cube() {
        for theta in [
            Point3::x(),
            Point3::y(),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(1.0, 2.0, 3.0),
        ] {
            let e = admissible_space_with(&cube(), &theta, Arithmetic::Exact).unwrap();
            let f = admissible_space_with(&cube(), &theta, Arithmetic::Float).unwrap();
            assert_eq!(e.dim, f.dim);
        }
    }
}
