//! Polar bodies about interior centers, the Santalo point and the volume
//! product.
//!
//! For a polytope with facet planes `x . v_k <= h_k` and a center `z`, the
//! polar `P^z` has one vertex `z + v_k / (h_k - z . v_k)` per facet and one
//! facet per vertex of `P`. Its volume, as a function of `z`, is
//!
//! ```text
//! |P^z| = 1/6 * sum_T |det(v_a, v_b, v_c)| / (m_a m_b m_c),   m_k = h_k - z . v_k
//! ```
//!
//! summed over a fixed triangulation `T` of the dual facets (one fan per
//! vertex figure of `P`). The function is smooth and strictly convex on the
//! interior, blows up at the boundary, and its gradient is
//! `4 |P^z| (centroid(P^z) - z)`, so the Santalo point is where the polar
//! centroid coincides with the center.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{det3, to_array, Point3};
use crate::polytope::Polytope;

/// Minimum facet margin `h_k - z . v_k`, relative to the diameter, for a
/// center to count as interior.
pub const INTERIOR_REL_TOL: f64 = 1e-12;

/// Default first-order residual `|centroid(P^z) - z| / diam(P)`.
pub const DEFAULT_TOL: f64 = 1e-8;

pub const MAX_ITERATIONS: usize = 10_000;

/// Smallest facet margin and the facet (label) where it occurs.
pub fn min_margin(p: &Polytope, z: &Point3) -> (usize, f64) {
    p.facets()
        .iter()
        .map(|f| (f.label, f.offset - z.dot(&f.normal)))
        .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

fn check_interior(p: &Polytope, z: &Point3) -> Result<()> {
    let (facet, margin) = min_margin(p, z);
    if margin >= INTERIOR_REL_TOL * p.diameter() {
        Ok(())
    } else {
        Err(Error::CenterNotInterior { facet, margin })
    }
}

/// The polar body of `p` with center `z`.
///
/// Dual vertex `k` sits at `z + v_k / (h_k - z . v_k)` for facet label `k`;
/// dual facet `i` corresponds to vertex label `i`; the dual edge crossing
/// primal edge `j` keeps label `j`.
pub fn polar(p: &Polytope, z: &Point3) -> Result<Polytope> {
    check_interior(p, z)?;
    let figures = p.vertex_figures()?;
    let labels: Vec<usize> = p.facets().iter().map(|f| f.label).collect();
    let points: Vec<Point3> = p
        .facets()
        .iter()
        .map(|f| z + f.normal / (f.offset - z.dot(&f.normal)))
        .collect();
    let facets: Vec<(usize, Vec<usize>)> = figures
        .into_iter()
        .enumerate()
        .map(|(i, ring)| (p.labels()[i], ring))
        .collect();
    let edge_map = p
        .lattice()
        .phi2
        .iter()
        .filter(|(_, fs)| fs.len() == 2)
        .map(|(&j, fs)| {
            let v: Vec<usize> = fs.iter().copied().collect();
            ((v[0], v[1]), j)
        })
        .collect();
    let mut dual = Polytope::assemble(labels, points, facets, Some(&edge_map));

    // exact planes: the dual facet of x_i lies on {y : (y - z) . (x_i - z) = 1}
    for (pos, x) in p.points().iter().enumerate() {
        let d = x - z;
        let n = d.norm();
        let label = p.labels()[pos];
        dual.set_plane(label, d / n, (1.0 + z.dot(&d)) / n);
    }
    Ok(dual)
}

/// `|P^z|`, failing with `CenterNotInterior` when `z` is too close to the
/// boundary.
pub fn polar_volume(p: &Polytope, z: &Point3) -> Result<f64> {
    check_interior(p, z)?;
    let obj = PolarVolume::new(p)?;
    obj.value(z).ok_or(Error::CenterNotInterior {
        facet: min_margin(p, z).0,
        margin: min_margin(p, z).1,
    })
}

/// Precomputed data for evaluating `z -> |P^z|` with derivatives.
#[derive(Debug, Clone)]
pub struct PolarVolume {
    normals: Vec<Point3>,
    offsets: Vec<f64>,
    triangles: Vec<([usize; 3], f64)>,
    min_margin: f64,
}

impl PolarVolume {
    pub fn new(p: &Polytope) -> Result<PolarVolume> {
        let normals: Vec<Point3> = p.facets().iter().map(|f| f.normal).collect();
        let offsets = p.facets().iter().map(|f| f.offset).collect();
        let mut triangles = Vec::new();
        for mut ring in p.vertex_figures()? {
            let start = (0..ring.len()).min_by_key(|&s| ring[s]).unwrap_or(0);
            ring.rotate_left(start);
            for w in ring[1..].windows(2) {
                let t = [ring[0], w[0], w[1]];
                let d = det3(&normals[t[0]], &normals[t[1]], &normals[t[2]]).abs();
                triangles.push((t, d));
            }
        }
        Ok(PolarVolume {
            normals,
            offsets,
            triangles,
            min_margin: INTERIOR_REL_TOL * p.diameter(),
        })
    }

    fn margins(&self, z: &Point3) -> Option<Vec<f64>> {
        let m: Vec<f64> = self
            .normals
            .iter()
            .zip(&self.offsets)
            .map(|(v, h)| h - z.dot(v))
            .collect();
        m.iter().all(|&x| x >= self.min_margin).then_some(m)
    }

    /// `|P^z|`, or `None` if `z` is not interior.
    pub fn value(&self, z: &Point3) -> Option<f64> {
        let m = self.margins(z)?;
        let sum: f64 = self
            .triangles
            .iter()
            .map(|([a, b, c], d)| d / (m[*a] * m[*b] * m[*c]))
            .sum();
        Some(sum / 6.0)
    }

    /// Value, gradient and Hessian at an interior `z`.
    pub fn eval(&self, z: &Point3) -> Option<(f64, Vector3<f64>, Matrix3<f64>)> {
        let m = self.margins(z)?;
        let mut f = 0.0;
        let mut grad = Vector3::zeros();
        let mut hess = Matrix3::zeros();
        for ([a, b, c], d) in &self.triangles {
            let g = d / (m[*a] * m[*b] * m[*c]);
            let ua = self.normals[*a] / m[*a];
            let ub = self.normals[*b] / m[*b];
            let uc = self.normals[*c] / m[*c];
            let s = ua + ub + uc;
            f += g;
            grad += g * s;
            hess += g * (s * s.transpose() + ua * ua.transpose() + ub * ub.transpose() + uc * uc.transpose());
        }
        Some((f / 6.0, grad / 6.0, hess / 6.0))
    }

    /// `centroid(P^z) - z`, recovered from the gradient.
    pub fn centroid_offset(&self, z: &Point3) -> Option<Vector3<f64>> {
        let (f, g, _) = self.eval(z)?;
        Some(g / (4.0 * f))
    }

    /// Open interval of `t` keeping `z + t * dir` interior.
    fn line_bounds(&self, z: &Point3, dir: &Vector3<f64>) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (v, h) in self.normals.iter().zip(&self.offsets) {
            let rate = dir.dot(v);
            let room = h - z.dot(v) - self.min_margin;
            if rate > 0.0 {
                hi = hi.min(room / rate);
            } else if rate < 0.0 {
                lo = lo.max(room / rate);
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SantaloResult {
    pub point: [f64; 3],
    pub polar_volume: f64,
    pub volume: f64,
    pub product: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl SantaloResult {
    pub fn point(&self) -> Point3 {
        Point3::from(self.point)
    }
}

/// Minimizes `z -> |P^z|` by damped Newton steps; falls back to coordinate
/// golden-section sweeps when the Newton line search stalls. Succeeds once
/// `|centroid(P^z) - z| <= tol * diam(P)`.
pub fn santalo_point(p: &Polytope, tol: f64) -> Result<SantaloResult> {
    santalo_point_with(p, tol, MAX_ITERATIONS)
}

pub fn santalo_point_with(p: &Polytope, tol: f64, max_iter: usize) -> Result<SantaloResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    p.ensure_valid()?;
    let volume = p.volume_unchecked();
    let obj = PolarVolume::new(p)?;
    let diam = p.diameter();
    let mut z = p.vertex_barycenter();
    let mut residual = f64::INFINITY;

    for it in 0..max_iter {
        let (f, g, h) = obj.eval(&z).ok_or(Error::CenterNotInterior {
            facet: min_margin(p, &z).0,
            margin: min_margin(p, &z).1,
        })?;
        residual = (g / (4.0 * f)).norm() / diam;
        if residual <= tol {
            return Ok(SantaloResult {
                point: to_array(&z),
                polar_volume: f,
                volume,
                product: volume * f,
                residual,
                iterations: it,
            });
        }

        let newton = h.cholesky().map(|ch| -ch.solve(&g));
        let step = match newton {
            Some(s) if -g.dot(&s) > 0.0 => s,
            _ => -g * (diam * diam / (4.0 * f)),
        };
        let decrement = -g.dot(&step);
        let mut lambda = 1.0;
        let mut moved = false;
        while lambda > 1e-20 {
            let cand = z + lambda * step;
            if let Some(fc) = obj.value(&cand) {
                if fc <= f - 1e-4 * lambda * decrement || decrement < 1e-12 * f {
                    z = cand;
                    moved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !moved && !coordinate_sweep(&obj, &mut z, f) {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

/// One golden-section pass along each axis. Returns whether the value dropped.
fn coordinate_sweep(obj: &PolarVolume, z: &mut Point3, f0: f64) -> bool {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    for axis in 0..3 {
        let mut dir = Vector3::zeros();
        dir[axis] = 1.0;
        let (lo, hi) = obj.line_bounds(z, &dir);
        let eval = |t: f64| obj.value(&(*z + t * dir)).unwrap_or(f64::INFINITY);
        let (mut a, mut b) = (lo, hi);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let (mut fc, mut fd) = (eval(c), eval(d));
        for _ in 0..80 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = eval(d);
            }
        }
        let t = 0.5 * (a + b);
        if eval(t) < eval(0.0) {
            *z += t * dir;
        }
    }
    obj.value(z).is_some_and(|f| f < f0)
}

/// `|P| * |P^{s(P)}|` at the default tolerance.
pub fn volume_product(p: &Polytope) -> Result<f64> {
    Ok(santalo_point(p, DEFAULT_TOL)?.product)
}

/// Checks that `z -> |P^z|` at `result.point` is no larger than at `probes`
/// random interior points (half drawn as random convex combinations of the
/// vertices, half as small perturbations of the result).
pub fn probe_minimality(p: &Polytope, result: &SantaloResult, probes: usize, seed: u64) -> Result<bool> {
    let obj = PolarVolume::new(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = result.point();
    let diam = p.diameter();
    let best = result.polar_volume * (1.0 - 1e-12);
    let mut checked = 0;
    while checked < probes {
        let z = if checked % 2 == 0 {
            let w: Vec<f64> = p.points().iter().map(|_| rng.random::<f64>()).collect();
            let total: f64 = w.iter().sum();
            p.points().iter().zip(&w).map(|(x, wi)| x * *wi).sum::<Point3>() / total
        } else {
            let u = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            s + u * (1e-3 * diam)
        };
        if let Some(v) = obj.value(&z) {
            if v < best {
                return Ok(false);
            }
            checked += 1;
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub product: f64,
    pub polar_product: f64,
    pub holds: bool,
}

/// Absolute slack used when comparing `P(K^{s(K)})` with `P(K)`.
pub const MONOTONICITY_SLACK: f64 = 1e-7;

/// Compares the volume product of the Santalo polar with that of `p`.
pub fn product_monotonicity_check(p: &Polytope) -> Result<MonotonicityReport> {
    let s = santalo_point(p, DEFAULT_TOL)?;
    let dual = polar(p, &s.point())?;
    let polar_product = volume_product(&dual)?;
    Ok(MonotonicityReport {
        product: s.product,
        polar_product,
        holds: polar_product <= s.product + MONOTONICITY_SLACK,
    })
}

/// JSON report for a single polytope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductReport {
    pub vertices: usize,
    pub facets: usize,
    pub santalo_point: [f64; 3],
    pub polar_volume: f64,
    pub volume: f64,
    pub product: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl ProductReport {
    pub fn new(p: &Polytope, s: &SantaloResult) -> ProductReport {
        ProductReport {
            vertices: p.num_vertices(),
            facets: p.num_facets(),
            santalo_point: s.point,
            polar_volume: s.polar_volume,
            volume: s.volume,
            product: s.product,
            residual: s.residual,
            iterations: s.iterations,
        }
    }
}
